//! Geometrically weighted PCA and the subspace-iteration view of the
//! iterative least-squares frame fit.
//!
//! Weighted PCA finds the rank-`d` orthogonal projection `P` minimizing
//! `Σ w_i ‖P(x_i − q) − (x_i − q)‖²`, which is the span of the top `d` left
//! singular vectors of the matrix with columns `√w_i (x_i − q)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{MmlsError, Result};
use crate::linalg::{fix_signs, left_svd, orthonormalize, randomized_left_svd};

/// Above this ambient dimension the rank-`d` truncation uses a randomized
/// range finder instead of a dense SVD.
pub const FULL_SVD_MAX_DIM: usize = 512;
pub const RANDOMIZED_OVERSAMPLE: usize = 8;
pub const RANDOMIZED_POWER_ITERS: usize = 2;
const RANDOMIZED_SEED: u64 = 0x6d6d_6c73;

/// Relative singular-value floor below which a direction counts as missing.
pub const RANK_TOLERANCE: f64 = 1e-12;

const ORTHO_TOLERANCE: f64 = 1e-10;

/// An ordered orthonormal set of `d` vectors in R^n, stored as the columns of
/// an `n × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis(DMatrix<f64>);

impl OrthonormalBasis {
    /// Wraps `vectors` after checking orthonormality, then applies the sign
    /// convention (largest-magnitude entry of each vector positive).
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        let d = vectors.ncols();
        let gram = vectors.tr_mul(&vectors);
        let err = (gram - DMatrix::<f64>::identity(d, d)).amax();
        if err > ORTHO_TOLERANCE || vectors.iter().any(|v| !v.is_finite()) {
            return Err(MmlsError::InvalidInput(format!(
                "basis is not orthonormal (Gram deviation {err:e})"
            )));
        }
        Ok(Self(fix_signs(vectors)))
    }

    pub(crate) fn from_orthonormal(vectors: DMatrix<f64>) -> Self {
        Self(fix_signs(vectors))
    }

    /// Orthonormal basis of the column space of an arbitrary full-rank matrix.
    pub fn orthonormalize(vectors: DMatrix<f64>) -> Result<Self> {
        let d = vectors.ncols();
        let rank = column_rank(&vectors);
        if rank < d {
            return Err(MmlsError::DegenerateData { rank, required: d });
        }
        Ok(Self::from_orthonormal(orthonormalize(vectors)))
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest deviation of `UᵀU` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        (self.0.tr_mul(&self.0) - DMatrix::<f64>::identity(d, d)).amax()
    }
}

fn column_rank(a: &DMatrix<f64>) -> usize {
    if a.ncols() == 0 {
        return 0;
    }
    let values = left_svd(a).values;
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > RANK_TOLERANCE * top).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SvdRoute {
    Dense,
    /// Randomized range finder, unless the sketch would be as wide as the
    /// matrix itself.
    Sketch,
}

/// Columns `√w_i (x_i − q)` for source points `x_i` about origin `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCloudMatrix {
    columns: DMatrix<f64>,
    origin: DVector<f64>,
    weights: Vec<f64>,
}

impl WeightedCloudMatrix {
    pub fn assemble(points: &DMatrix<f64>, origin: &DVector<f64>, weights: &[f64]) -> Result<Self> {
        if points.ncols() != weights.len() {
            return Err(MmlsError::InvalidInput(format!(
                "{} points but {} weights",
                points.ncols(),
                weights.len()
            )));
        }
        if points.nrows() != origin.len() {
            return Err(MmlsError::InvalidInput(format!(
                "points live in R^{} but the origin in R^{}",
                points.nrows(),
                origin.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(MmlsError::InvalidInput(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        let mut columns = points.clone();
        for (mut col, &w) in columns.column_iter_mut().zip(weights) {
            col -= origin;
            col *= w.sqrt();
        }
        Ok(Self {
            columns,
            origin: origin.clone(),
            weights: weights.to_vec(),
        })
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Top-`d` left singular subspace: dense SVD for `n ≤ FULL_SVD_MAX_DIM`,
    /// randomized above.
    pub fn principal_subspace(&self, d: usize) -> Result<OrthonormalBasis> {
        let route = if self.columns.nrows() <= FULL_SVD_MAX_DIM {
            SvdRoute::Dense
        } else {
            SvdRoute::Sketch
        };
        self.principal_subspace_via(d, route)
    }

    pub(crate) fn principal_subspace_via(
        &self,
        d: usize,
        route: SvdRoute,
    ) -> Result<OrthonormalBasis> {
        let n = self.columns.nrows();
        if d == 0 || d > n {
            return Err(MmlsError::InvalidInput(format!(
                "rank {d} requested in R^{n}"
            )));
        }
        let active: Vec<usize> = (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect();
        if active.len() < d {
            return Err(MmlsError::DegenerateData {
                rank: active.len(),
                required: d,
            });
        }
        let a = self.columns.select_columns(&active);
        let sketch_width = d + RANDOMIZED_OVERSAMPLE;
        let dense = match route {
            SvdRoute::Dense => true,
            SvdRoute::Sketch => sketch_width >= n.min(a.ncols()),
        };
        let svd = if dense {
            left_svd(&a)
        } else {
            randomized_left_svd(
                &a,
                d,
                RANDOMIZED_OVERSAMPLE,
                RANDOMIZED_POWER_ITERS,
                RANDOMIZED_SEED,
            )
        };
        let top = svd.values.first().copied().unwrap_or(0.0);
        let rank = if top > 0.0 {
            svd.values
                .iter()
                .filter(|&&s| s > RANK_TOLERANCE * top)
                .count()
        } else {
            0
        };
        if rank < d {
            return Err(MmlsError::DegenerateData { rank, required: d });
        }
        Ok(OrthonormalBasis::from_orthonormal(
            svd.vectors.columns(0, d).into_owned(),
        ))
    }
}

/// Weighted PCA of `points` (columns) about the caller's centre `q`.
pub fn weighted_pca(
    points: &DMatrix<f64>,
    q: &DVector<f64>,
    weights: &[f64],
    d: usize,
) -> Result<OrthonormalBasis> {
    WeightedCloudMatrix::assemble(points, q, weights)?.principal_subspace(d)
}

fn check_start(r: &DMatrix<f64>, u0: &OrthonormalBasis) -> Result<()> {
    if r.nrows() != u0.ambient_dim() {
        return Err(MmlsError::InvalidInput(format!(
            "matrix has {} rows but the start basis lives in R^{}",
            r.nrows(),
            u0.ambient_dim()
        )));
    }
    if r.iter().all(|v| *v == 0.0) {
        return Err(MmlsError::DegenerateData {
            rank: 0,
            required: u0.dim(),
        });
    }
    Ok(())
}

/// Iterates `U ← Q(qr(R Rᵀ U))`, returning `U_1, …, U_k`.
pub fn subspace_iteration_history(
    r: &DMatrix<f64>,
    u0: &OrthonormalBasis,
    iterations: usize,
) -> Result<Vec<OrthonormalBasis>> {
    check_start(r, u0)?;
    let mut u = u0.matrix().clone();
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let next = OrthonormalBasis::orthonormalize(r * r.tr_mul(&u))?;
        u = next.matrix().clone();
        out.push(next);
    }
    Ok(out)
}

/// `k` steps of subspace iteration against `R Rᵀ`; `k = 0` returns `U₀`.
pub fn subspace_iteration(
    r: &DMatrix<f64>,
    u0: &OrthonormalBasis,
    iterations: usize,
) -> Result<OrthonormalBasis> {
    let mut hist = subspace_iteration_history(r, u0, iterations)?;
    Ok(hist.pop().unwrap_or_else(|| u0.clone()))
}

/// The explicit alternating scheme: coordinates `X_k = U_kᵀ R`, then
/// `A_{k+1} = argmin_A ‖R − A X_k‖_F`, then `U_{k+1} = Q(qr(A_{k+1}))`.
/// Returns `U_1, …, U_k`.
pub fn iterative_ls_history(
    points: &DMatrix<f64>,
    u0: &OrthonormalBasis,
    iterations: usize,
) -> Result<Vec<OrthonormalBasis>> {
    check_start(points, u0)?;
    let d = u0.dim();
    let mut u = u0.matrix().clone();
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let x = u.tr_mul(points);
        let gram = &x * x.transpose();
        // Normal equations of the LS problem: A G = R Xᵀ, with G = X Xᵀ.
        let chol =
            Cholesky::<f64, Dyn>::new(gram.clone()).ok_or_else(|| MmlsError::DegenerateData {
                rank: column_rank(&gram),
                required: d,
            })?;
        let a_t = chol.solve(&(&x * points.transpose()));
        let next = OrthonormalBasis::orthonormalize(a_t.transpose())?;
        u = next.matrix().clone();
        out.push(next);
    }
    Ok(out)
}

pub fn iterative_ls_subspace(
    points: &DMatrix<f64>,
    u0: &OrthonormalBasis,
    iterations: usize,
) -> Result<OrthonormalBasis> {
    let mut hist = iterative_ls_history(points, u0, iterations)?;
    Ok(hist.pop().unwrap_or_else(|| u0.clone()))
}
