//! The two-step projection: solve the local frame of a query, fit an
//! `R^n`-valued polynomial over that frame, and return its value at the
//! frame origin.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};
use crate::frame::{
    solve_whitened, weights_about, whiten_point, AffineFrame, FrameParams, FrameSolveReport,
    Iterations, DEFAULT_MAX_ITERS, DEFAULT_RELATIVE_EPS,
};
use crate::poly::{fit_scaled, PolynomialMap};
use crate::weights::{
    active_set, estimate_sigma_detailed, DistanceReduction, MetricForm, WeightFunction,
    DEFAULT_OVERSAMPLE, DEFAULT_SIGMA_TRIALS,
};

pub const DEFAULT_SEED: u64 = 20_170_822;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    CompactBump,
}

/// Where the weight's length scale comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    Fixed(WeightFunction),
    /// Monte-Carlo estimate (see [`crate::weights::estimate_sigma`]),
    /// multiplied by `factor`.
    Auto {
        kind: KernelKind,
        trials: usize,
        oversample: usize,
        factor: f64,
    },
}

impl Bandwidth {
    pub fn auto(kind: KernelKind) -> Self {
        Bandwidth::Auto {
            kind,
            trials: DEFAULT_SIGMA_TRIALS,
            oversample: DEFAULT_OVERSAMPLE,
            factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmlsConfig {
    /// Intrinsic dimension.
    pub d: usize,
    /// Total degree of the local fit.
    pub m: usize,
    pub bandwidth: Bandwidth,
    pub metric: MetricForm,
    /// Absolute origin tolerance; `None` means `1e-10 · diameter`.
    pub eps: Option<f64>,
    pub iterations: Iterations,
    /// Retry with lower degrees (down to 1) when the degree-`m` fit is
    /// rank-deficient.
    pub degree_fallback: bool,
    /// Measure kernel distances in the cloud's leading `k`-dimensional
    /// principal subspace instead of the full space. Fits still use the
    /// full vectors.
    pub distance_rank: Option<usize>,
    pub seed: u64,
}

impl MmlsConfig {
    pub fn new(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            bandwidth: Bandwidth::auto(KernelKind::Gaussian),
            metric: MetricForm::Euclidean,
            eps: None,
            iterations: Iterations::UpTo(DEFAULT_MAX_ITERS),
            degree_fallback: true,
            distance_rank: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_weight(mut self, weight: WeightFunction) -> Self {
        self.bandwidth = Bandwidth::Fixed(weight);
        self
    }

    pub fn with_iterations(mut self, iterations: Iterations) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_metric(mut self, metric: MetricForm) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_distance_rank(mut self, rank: usize) -> Self {
        self.distance_rank = Some(rank);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub projected: DVector<f64>,
    /// The frame used, in the metric's whitened coordinates.
    pub frame: AffineFrame,
    pub report: FrameSolveReport,
    /// Local fit in frame coordinates; `local_fit.at_origin() == projected`.
    pub local_fit: PolynomialMap,
    /// Points whose weight survived the cutoff.
    pub effective_points: usize,
    /// Degree actually fitted; below the configured `m` after a fallback.
    pub degree_used: usize,
}

impl ProjectionResult {
    pub fn converged(&self) -> bool {
        self.report.converged
    }

    pub fn degraded(&self, configured_m: usize) -> bool {
        self.degree_used < configured_m
    }
}

/// A cloud prepared for repeated projections under one configuration.
#[derive(Debug, Clone)]
pub struct Projector {
    points: DMatrix<f64>,
    config: MmlsConfig,
    frame_params: FrameParams,
    diameter: f64,
}

impl Projector {
    pub fn new(cloud: &PointCloud, config: &MmlsConfig) -> Result<Self> {
        let n = cloud.dim();
        if config.d == 0 || config.d >= n {
            return Err(MmlsError::Config(format!(
                "intrinsic dimension {} must satisfy 1 <= d < n = {n}",
                config.d
            )));
        }
        if config.m == 0 {
            return Err(MmlsError::Config("degree m must be >= 1".into()));
        }
        config.metric.check_dim(n)?;
        let points = config.metric.to_euclidean(cloud.points());
        let whitened = PointCloud::new(points.clone())?;
        let diameter = whitened.diameter();
        let reduction = config
            .distance_rank
            .map(|k| DistanceReduction::fit(&points, k, config.seed).map(Arc::new))
            .transpose()?;
        let distance_points = match &reduction {
            Some(red) => red.reduced_points(),
            None => &points,
        };

        let weight = match &config.bandwidth {
            Bandwidth::Fixed(w) => *w,
            Bandwidth::Auto {
                kind,
                trials,
                oversample,
                factor,
            } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(MmlsError::Config(format!(
                        "invalid bandwidth factor {factor}"
                    )));
                }
                let est = estimate_sigma_detailed(
                    distance_points,
                    config.d,
                    config.m,
                    *trials,
                    *oversample,
                    config.seed,
                )?;
                let scale = est.sigma * factor;
                if scale <= 0.0 {
                    return Err(MmlsError::DegenerateData {
                        rank: 0,
                        required: est.neighbors,
                    });
                }
                match kind {
                    KernelKind::Gaussian => WeightFunction::gaussian(scale)?,
                    KernelKind::CompactBump => WeightFunction::compact_bump(scale)?,
                }
            }
        };
        let eps = config
            .eps
            .unwrap_or(DEFAULT_RELATIVE_EPS * diameter.max(f64::MIN_POSITIVE));
        let frame_params = FrameParams {
            d: config.d,
            weight,
            metric: MetricForm::Euclidean,
            eps,
            iterations: config.iterations,
            reduction,
        };
        Ok(Self {
            points,
            config: config.clone(),
            frame_params,
            diameter,
        })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.frame_params.weight
    }

    pub fn config(&self) -> &MmlsConfig {
        &self.config
    }

    /// Diameter of the cloud under the configured metric.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn eps(&self) -> f64 {
        self.frame_params.eps
    }

    /// Solves the local frame of `r` (result in whitened coordinates).
    pub fn frame(&self, r: &DVector<f64>) -> Result<(AffineFrame, FrameSolveReport)> {
        self.check_query(r)?;
        let rw = whiten_point(&self.config.metric, r);
        solve_whitened(&self.points, &rw, &self.frame_params, None)
    }

    pub fn project(&self, r: &DVector<f64>) -> Result<ProjectionResult> {
        let (frame, report) = self.frame(r)?;
        self.project_with_frame(frame, report)
    }

    /// Runs the polynomial step over a given frame (whitened coordinates).
    pub fn project_with_frame(
        &self,
        frame: AffineFrame,
        report: FrameSolveReport,
    ) -> Result<ProjectionResult> {
        let theta = &self.frame_params.weight;
        let q = &frame.origin;
        let weights = weights_about(
            &self.points,
            q,
            theta,
            self.frame_params.reduction.as_deref(),
        );
        let active = active_set(&weights);
        let mut centered = self.points.select_columns(&active);
        for mut col in centered.column_iter_mut() {
            col -= q;
        }
        let coords = frame.basis.matrix().tr_mul(&centered);
        let sub_w: Vec<f64> = active.iter().map(|&i| weights[i]).collect();

        let lowest = if self.config.degree_fallback {
            1
        } else {
            self.config.m
        };
        let mut last_err = None;
        let mut fit = None;
        for degree in (lowest..=self.config.m).rev() {
            match fit_scaled(&coords, &centered, &sub_w, degree, theta.scale()) {
                Ok(f) => {
                    fit = Some(f);
                    break;
                }
                Err(e @ MmlsError::DegenerateNeighborhood { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let fit = match fit {
            Some(f) => f,
            None => return Err(last_err.expect("at least one degree attempted")),
        };
        let degree_used = fit.degree();

        // Shift the constant row back by q, then leave whitened coordinates.
        let mut coefficients = fit.coefficients().clone();
        let mut constant = coefficients.row_mut(0);
        constant += q.transpose();
        let shifted = PolynomialMap::new(fit.domain_dim(), degree_used, fit.scale(), coefficients)?;
        let metric = &self.config.metric;
        let local_fit = if metric.is_euclidean() {
            shifted
        } else {
            shifted.map_codomain(|pts| metric.from_euclidean(pts))
        };
        let projected = local_fit.at_origin();
        Ok(ProjectionResult {
            projected,
            frame,
            report,
            local_fit,
            effective_points: active.len(),
            degree_used,
        })
    }

    /// Projects every query, in order; failures stay per-query.
    pub fn project_all(&self, queries: &[DVector<f64>]) -> Vec<Result<ProjectionResult>> {
        queries.par_iter().map(|r| self.project(r)).collect()
    }

    fn check_query(&self, r: &DVector<f64>) -> Result<()> {
        if r.len() != self.points.nrows() {
            return Err(MmlsError::InvalidInput(format!(
                "query lives in R^{} but the cloud in R^{}",
                r.len(),
                self.points.nrows()
            )));
        }
        Ok(())
    }
}

/// Projects a single query onto the approximating manifold of `cloud`.
pub fn project_point(
    cloud: &PointCloud,
    r: &DVector<f64>,
    config: &MmlsConfig,
) -> Result<ProjectionResult> {
    Projector::new(cloud, config)?.project(r)
}

/// Batch form of [`project_point`]: configuration errors fail the call,
/// per-query errors are returned in place.
pub fn project_cloud(
    cloud: &PointCloud,
    queries: &[DVector<f64>],
    config: &MmlsConfig,
) -> Result<Vec<Result<ProjectionResult>>> {
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    Ok(Projector::new(cloud, config)?.project_all(queries))
}
