//! Scattered samples in R^n.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{MmlsError, Result};

/// `I` points in R^n, one point per column.
///
/// Synthetic clouds may carry a ground-truth twin of the same shape holding
/// the noise-free samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    truth: Option<DMatrix<f64>>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(MmlsError::InvalidInput(
                "point cloud contains non-finite values".into(),
            ));
        }
        Ok(Self {
            points,
            truth: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != n) {
            return Err(MmlsError::InvalidInput(
                "points have inconsistent dimensions".into(),
            ));
        }
        let m = DMatrix::from_fn(n, points.len(), |r, c| points[c][r]);
        Self::new(m)
    }

    pub fn with_truth(mut self, truth: DMatrix<f64>) -> Result<Self> {
        if truth.shape() != self.points.shape() {
            return Err(MmlsError::InvalidInput(format!(
                "ground truth shape {:?} does not match cloud shape {:?}",
                truth.shape(),
                self.points.shape()
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> DVectorView<'_, f64> {
        self.points.column(i)
    }

    pub fn truth(&self) -> Option<&DMatrix<f64>> {
        self.truth.as_ref()
    }

    pub fn into_points(self) -> DMatrix<f64> {
        self.points
    }

    /// Largest pairwise distance, computed exactly for small clouds and
    /// bounded by the bounding-box diagonal otherwise.
    pub fn diameter(&self) -> f64 {
        let count = self.len();
        if count < 2 {
            return 0.0;
        }
        if count <= 2048 {
            let mut best = 0.0f64;
            for i in 0..count {
                for j in (i + 1)..count {
                    let d = (self.points.column(i) - self.points.column(j)).norm_squared();
                    best = best.max(d);
                }
            }
            return best.sqrt();
        }
        let mut span = 0.0;
        for row in self.points.row_iter() {
            let lo = row.min();
            let hi = row.max();
            span += (hi - lo) * (hi - lo);
        }
        span.sqrt()
    }

    /// Returns a copy with every point mapped through `f`.
    pub fn map_points(&self, f: impl Fn(DVectorView<'_, f64>) -> DVector<f64>) -> Result<Self> {
        let cols: Vec<DVector<f64>> = self.points.column_iter().map(&f).collect();
        let points = if cols.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let mut out = Self::new(points)?;
        if let Some(t) = &self.truth {
            let tcols: Vec<DVector<f64>> = t.column_iter().map(&f).collect();
            out.truth = Some(DMatrix::from_columns(&tcols));
        }
        Ok(out)
    }
}
