//! Weight kernels, ambient metrics and the Monte-Carlo bandwidth estimate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};
use crate::linalg::randomized_left_svd;
use crate::poly::poly_dim;

pub const DEFAULT_SIGMA_TRIALS: usize = 100;
pub const DEFAULT_OVERSAMPLE: usize = 10;

/// Points whose weight falls below this fraction of the largest weight are
/// left out of local fits.
pub const WEIGHT_CUTOFF: f64 = 1e-14;

/// Indices of weights at or above `WEIGHT_CUTOFF × max(weights)`.
pub fn active_set(weights: &[f64]) -> Vec<usize> {
    let top = weights.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let floor = WEIGHT_CUTOFF * top;
    (0..weights.len())
        .filter(|&i| weights[i] >= floor)
        .collect()
}

/// A non-negative, non-increasing radial weight `θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// `θ(t) = exp(-t²/σ²)`.
    Gaussian { sigma: f64 },
    /// `θ(t) = exp(-t²/(s²-t²))` on `[0, s)`, zero beyond; C^∞ with `θ(0) = 1`.
    CompactBump { support: f64 },
}

impl WeightFunction {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        check_length("bandwidth", sigma)?;
        Ok(WeightFunction::Gaussian { sigma })
    }

    pub fn compact_bump(support: f64) -> Result<Self> {
        check_length("support radius", support)?;
        Ok(WeightFunction::CompactBump { support })
    }

    /// Characteristic length: σ or the support radius.
    pub fn scale(&self) -> f64 {
        match *self {
            WeightFunction::Gaussian { sigma } => sigma,
            WeightFunction::CompactBump { support } => support,
        }
    }

    /// Same kernel shape with its length scale replaced.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        match self {
            WeightFunction::Gaussian { .. } => Self::gaussian(scale),
            WeightFunction::CompactBump { .. } => Self::compact_bump(scale),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(MmlsError::Domain(format!(
                "weight evaluated at negative distance {t}"
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    /// `eval` without the domain check; `t` must be a distance.
    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match *self {
            WeightFunction::Gaussian { sigma } => (-(t * t) / (sigma * sigma)).exp(),
            WeightFunction::CompactBump { support } => {
                if t >= support {
                    0.0
                } else {
                    let t2 = t * t;
                    (-t2 / (support * support - t2)).exp()
                }
            }
        }
    }
}

fn check_length(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(MmlsError::InvalidInput(format!(
            "{what} must be positive and finite, got {v}"
        )))
    }
}

/// Evaluates `θ(t)`. Negative `t` is a domain error.
pub fn eval_weight(theta: &WeightFunction, t: f64) -> Result<f64> {
    theta.eval(t)
}

/// Inner-product norm used for every distance in the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricForm {
    Euclidean,
    /// `‖x‖_A = sqrt(xᵀ A x)`. `factor` is the lower Cholesky factor `L`
    /// with `A = L Lᵀ`, so `‖x‖_A = ‖Lᵀ x‖`.
    Spd {
        matrix: DMatrix<f64>,
        factor: DMatrix<f64>,
    },
}

impl MetricForm {
    pub fn spd(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(MmlsError::InvalidInput(
                "metric matrix must be square and non-empty".into(),
            ));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(MmlsError::InvalidInput(
                "metric matrix is not symmetric".into(),
            ));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig.is_nan() || min_eig <= 0.0 {
            return Err(MmlsError::InvalidInput(format!(
                "metric matrix is not positive definite (smallest eigenvalue {min_eig})"
            )));
        }
        let chol = Cholesky::<f64, Dyn>::new(matrix.clone()).ok_or_else(|| {
            MmlsError::InvalidInput("metric matrix failed Cholesky factorization".into())
        })?;
        Ok(MetricForm::Spd {
            matrix,
            factor: chol.l(),
        })
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, MetricForm::Euclidean)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            MetricForm::Euclidean => None,
            MetricForm::Spd { matrix, .. } => Some(matrix.nrows()),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(k) if k != n => Err(MmlsError::Config(format!(
                "metric is {k}x{k} but the ambient dimension is {n}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let diff = x - y;
        match self {
            MetricForm::Euclidean => diff.norm(),
            MetricForm::Spd { matrix, .. } => diff.dot(&(matrix * &diff)).max(0.0).sqrt(),
        }
    }

    /// Maps points (columns) into coordinates where this metric is Euclidean.
    pub fn to_euclidean(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MetricForm::Euclidean => points.clone(),
            MetricForm::Spd { factor, .. } => factor.tr_mul(points),
        }
    }

    /// Inverse of [`MetricForm::to_euclidean`].
    pub fn from_euclidean(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MetricForm::Euclidean => points.clone(),
            MetricForm::Spd { factor, .. } => factor
                .transpose()
                .solve_upper_triangular(points)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }
}

/// Low-rank coordinates used only to measure kernel distances.
///
/// The cloud (centred at its mean) is sketched onto its `rank` leading left
/// singular vectors; distances between a point and a sample are then taken
/// between their coordinates in that subspace. Fits still run on the full
/// vectors. This tames the noise floor of distances in very high ambient
/// dimension, where per-coordinate noise otherwise dominates `‖r_i − q‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReduction {
    basis: DMatrix<f64>,
    reduced: DMatrix<f64>,
}

impl DistanceReduction {
    /// Sketches `points` (columns) to `rank` dimensions with a seeded
    /// randomized SVD. A rank at or above the ambient dimension keeps every
    /// direction.
    pub fn fit(points: &DMatrix<f64>, rank: usize, seed: u64) -> Result<Self> {
        let (n, count) = points.shape();
        if rank == 0 {
            return Err(MmlsError::Config("distance rank must be >= 1".into()));
        }
        if count == 0 {
            return Err(MmlsError::InsufficientData {
                required: 1,
                available: 0,
            });
        }
        let mean = points.column_mean();
        let mut centered = points.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let keep = rank.min(n).min(count);
        let svd = randomized_left_svd(&centered, keep, 8, 2, seed);
        let basis = svd.vectors.columns(0, keep).into_owned();
        let reduced = basis.tr_mul(points);
        Ok(Self { basis, reduced })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal `n × rank` basis of the distance subspace.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The fitted samples in reduced coordinates (`rank × I`).
    pub fn reduced_points(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    /// Reduced distances from `q` to every fitted sample.
    pub fn distances(&self, q: &DVector<f64>) -> Vec<f64> {
        let qr = self.basis.tr_mul(q);
        self.reduced
            .column_iter()
            .map(|c| (c - &qr).norm())
            .collect()
    }
}

/// Outcome of the Monte-Carlo bandwidth search.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// Number of points every trial ball must hold, `oversample · dim(Π_m^d)`.
    pub neighbors: usize,
    /// `(sample index, enclosing radius)` per trial, in draw order.
    pub trials: Vec<(usize, f64)>,
}

/// Bandwidth estimate: the largest, over `trials` randomly drawn sample points,
/// of the smallest radius whose ball holds `oversample · dim(Π_m^d)` samples
/// (the centre itself included).
pub fn estimate_sigma(
    cloud: &PointCloud,
    d: usize,
    m: usize,
    trials: usize,
    oversample: usize,
    rng_seed: u64,
) -> Result<f64> {
    estimate_sigma_detailed(cloud.points(), d, m, trials, oversample, rng_seed).map(|e| e.sigma)
}

/// [`estimate_sigma`] over raw columns, reporting every trial.
pub fn estimate_sigma_detailed(
    points: &DMatrix<f64>,
    d: usize,
    m: usize,
    trials: usize,
    oversample: usize,
    rng_seed: u64,
) -> Result<SigmaEstimate> {
    if d == 0 {
        return Err(MmlsError::InvalidInput(
            "intrinsic dimension must be >= 1".into(),
        ));
    }
    if trials == 0 || oversample == 0 {
        return Err(MmlsError::InvalidInput(
            "trials and oversample must both be >= 1".into(),
        ));
    }
    let neighbors = oversample * poly_dim(d, m);
    let count = points.ncols();
    if count < neighbors {
        return Err(MmlsError::InsufficientData {
            required: neighbors,
            available: count,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut dist = vec![0.0; count];
    let mut out = Vec::with_capacity(trials);
    let mut sigma = 0.0f64;
    for _ in 0..trials {
        let center = rng.random_range(0..count);
        let c = points.column(center);
        for (slot, col) in dist.iter_mut().zip(points.column_iter()) {
            *slot = (col - c).norm_squared();
        }
        let (_, kth, _) = dist.select_nth_unstable_by(neighbors - 1, f64::total_cmp);
        let radius = kth.sqrt();
        sigma = sigma.max(radius);
        out.push((center, radius));
    }
    Ok(SigmaEstimate {
        sigma,
        neighbors,
        trials: out,
    })
}
