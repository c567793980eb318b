//! Local affine coordinate systems.
//!
//! For a query `r` the frame is an origin `q` and a `d`-dimensional affine
//! space `H ∋ q` minimizing
//!
//! ```text
//! J(r; q, H) = Σ_i dist(r_i, H)² θ(‖r_i − q‖)    subject to   r − q ⊥ H.
//! ```
//!
//! The solver alternates between freezing the weights at the current origin,
//! fitting an affine map over the current frame by weighted least squares,
//! and re-deriving an orthonormal frame from that map, with the origin reset
//! to the orthogonal projection of `r` so the constraint holds exactly.
//!
//! With an SPD metric all of this happens in whitened coordinates
//! `y = Lᵀ x` (`A = L Lᵀ`), where the metric is Euclidean; frames returned by
//! this module are expressed in those coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};
use crate::poly::fit_scaled;
use crate::weights::{active_set, DistanceReduction, MetricForm, WeightFunction};
use crate::wpca::{OrthonormalBasis, SvdRoute, WeightedCloudMatrix};

pub const DEFAULT_MAX_ITERS: usize = 10;
/// Default stopping tolerance relative to the cloud diameter.
pub const DEFAULT_RELATIVE_EPS: f64 = 1e-10;

/// An origin and an orthonormal basis of `H − q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrame {
    pub origin: DVector<f64>,
    pub basis: OrthonormalBasis,
    /// `max_k |⟨r − q, e_k⟩|` for the query the frame was solved for.
    pub constraint_residual: f64,
}

impl AffineFrame {
    pub fn new(origin: DVector<f64>, basis: OrthonormalBasis, r: &DVector<f64>) -> Self {
        let constraint_residual = constraint_residual(&origin, basis.matrix(), r);
        Self {
            origin,
            basis,
            constraint_residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Local coordinates `Uᵀ(x − q)` of every column of `points`.
    pub fn local_coordinates(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = points.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.origin;
        }
        self.basis.matrix().tr_mul(&centered)
    }
}

fn constraint_residual(q: &DVector<f64>, u: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    u.tr_mul(&(r - q)).amax()
}

/// Diagnostics of one frame solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSolveReport {
    pub iterations_used: usize,
    /// `J` at the starting frame followed by `J` after every iteration.
    pub cost_history: Vec<f64>,
    pub converged: bool,
    /// `‖q_j − q_{j−1}‖` of the last iteration.
    pub final_step: f64,
}

/// How many refinement iterations to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iterations {
    /// Stop once the origin moves less than `eps`, or after this many.
    UpTo(usize),
    /// Run exactly this many iterations regardless of `eps`.
    Exactly(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameParams {
    pub d: usize,
    pub weight: WeightFunction,
    pub metric: MetricForm,
    /// Absolute tolerance on the origin update.
    pub eps: f64,
    pub iterations: Iterations,
    /// Optional low-rank subspace for kernel distances, fitted to the same
    /// (whitened) points the solver receives.
    pub reduction: Option<Arc<DistanceReduction>>,
}

impl FrameParams {
    /// Defaults for `cloud`: Euclidean metric, `eps = 1e-10 · diameter`,
    /// at most ten iterations.
    pub fn for_cloud(cloud: &PointCloud, d: usize, weight: WeightFunction) -> Self {
        Self {
            d,
            weight,
            metric: MetricForm::Euclidean,
            eps: DEFAULT_RELATIVE_EPS * cloud.diameter().max(f64::MIN_POSITIVE),
            iterations: Iterations::UpTo(DEFAULT_MAX_ITERS),
            reduction: None,
        }
    }
}

fn check_query(points: &DMatrix<f64>, r: &DVector<f64>, d: usize) -> Result<()> {
    let n = points.nrows();
    if r.len() != n {
        return Err(MmlsError::InvalidInput(format!(
            "query lives in R^{} but the cloud in R^{n}",
            r.len()
        )));
    }
    if d == 0 || d >= n {
        return Err(MmlsError::Config(format!(
            "intrinsic dimension {d} must satisfy 1 <= d < n = {n}"
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(MmlsError::InvalidInput(
            "query has non-finite entries".into(),
        ));
    }
    Ok(())
}

pub(crate) fn weights_about(
    points: &DMatrix<f64>,
    q: &DVector<f64>,
    theta: &WeightFunction,
    reduction: Option<&DistanceReduction>,
) -> Vec<f64> {
    match reduction {
        Some(red) => red
            .distances(q)
            .into_iter()
            .map(|t| theta.eval_unchecked(t))
            .collect(),
        None => points
            .column_iter()
            .map(|c| theta.eval_unchecked((c - q).norm()))
            .collect(),
    }
}

/// `J` for a frame given in Euclidean (whitened) coordinates.
pub(crate) fn cost_whitened(
    points: &DMatrix<f64>,
    theta: &WeightFunction,
    reduction: Option<&DistanceReduction>,
    frame: &AffineFrame,
) -> f64 {
    let u = frame.basis.matrix();
    let weights = weights_about(points, &frame.origin, theta, reduction);
    points
        .column_iter()
        .zip(weights)
        .map(|(c, w)| {
            let v = c - &frame.origin;
            if w == 0.0 {
                return 0.0;
            }
            let off = &v - u * u.tr_mul(&v);
            off.norm_squared() * w
        })
        .sum()
}

/// `J(r; q, H) = Σ dist(r_i, H)² θ(‖r_i − q‖)` under `metric`.
///
/// The frame must be expressed in the metric's whitened coordinates (which
/// are the original coordinates for the Euclidean metric).
pub fn cost_j(
    cloud: &PointCloud,
    theta: &WeightFunction,
    metric: &MetricForm,
    frame: &AffineFrame,
) -> Result<f64> {
    metric.check_dim(cloud.dim())?;
    if frame.origin.len() != cloud.dim() || frame.basis.ambient_dim() != cloud.dim() {
        return Err(MmlsError::InvalidInput(
            "frame and cloud live in different spaces".into(),
        ));
    }
    let points = metric.to_euclidean(cloud.points());
    Ok(cost_whitened(&points, theta, None, frame))
}

/// Solves for the local frame of `r`, starting from weighted PCA about `r`.
pub fn find_local_frame(
    cloud: &PointCloud,
    r: &DVector<f64>,
    params: &FrameParams,
) -> Result<(AffineFrame, FrameSolveReport)> {
    params.metric.check_dim(cloud.dim())?;
    let points = params.metric.to_euclidean(cloud.points());
    let rw = whiten_point(&params.metric, r);
    solve_whitened(&points, &rw, params, None)
}

/// Solves for the local frame of `r`, starting from `start` instead of the
/// weighted-PCA initialization.
pub fn find_local_frame_from(
    cloud: &PointCloud,
    r: &DVector<f64>,
    start: &AffineFrame,
    params: &FrameParams,
) -> Result<(AffineFrame, FrameSolveReport)> {
    params.metric.check_dim(cloud.dim())?;
    let points = params.metric.to_euclidean(cloud.points());
    let rw = whiten_point(&params.metric, r);
    solve_whitened(&points, &rw, params, Some(start))
}

pub(crate) fn whiten_point(metric: &MetricForm, r: &DVector<f64>) -> DVector<f64> {
    match metric {
        MetricForm::Euclidean => r.clone(),
        MetricForm::Spd { factor, .. } => factor.tr_mul(r),
    }
}

pub(crate) fn solve_whitened(
    points: &DMatrix<f64>,
    r: &DVector<f64>,
    params: &FrameParams,
    start: Option<&AffineFrame>,
) -> Result<(AffineFrame, FrameSolveReport)> {
    let d = params.d;
    check_query(points, r, d)?;
    let theta = &params.weight;
    let reduction = params.reduction.as_deref();
    if let Some(red) = reduction {
        if red.ambient_dim() != points.nrows() || red.reduced_points().ncols() != points.ncols() {
            return Err(MmlsError::Config(
                "distance reduction was fitted to a different cloud".into(),
            ));
        }
    }

    let (mut q, mut u) = match start {
        Some(f) => {
            if f.dim() != d || f.origin.len() != r.len() {
                return Err(MmlsError::InvalidInput(
                    "starting frame does not match the problem".into(),
                ));
            }
            (f.origin.clone(), f.basis.matrix().clone())
        }
        None => {
            let w = weights_about(points, r, theta, reduction);
            let active = active_set(&w);
            if active.len() < d + 1 {
                return Err(MmlsError::DegenerateNeighborhood {
                    rank: active.len(),
                    required: d + 1,
                });
            }
            let sub = points.select_columns(&active);
            let sub_w: Vec<f64> = active.iter().map(|&i| w[i]).collect();
            let basis = WeightedCloudMatrix::assemble(&sub, r, &sub_w)?
                .principal_subspace_via(d, SvdRoute::Sketch)
                .map_err(|e| match e {
                    MmlsError::DegenerateData { rank, required } => {
                        MmlsError::DegenerateNeighborhood { rank, required }
                    }
                    other => other,
                })?;
            (r.clone(), basis.into_matrix())
        }
    };

    let frame_of = |q: &DVector<f64>, u: &DMatrix<f64>| AffineFrame {
        origin: q.clone(),
        basis: OrthonormalBasis::from_orthonormal(u.clone()),
        constraint_residual: constraint_residual(q, u, r),
    };

    let (max_iters, fixed) = match params.iterations {
        Iterations::UpTo(k) => (k, false),
        Iterations::Exactly(k) => (k, true),
    };
    let scale = theta.scale();

    let mut current = frame_of(&q, &u);
    let mut cost_history = vec![cost_whitened(points, theta, reduction, &current)];
    // Without convergence, the iterate that moved least is the one closest
    // to settling; it is the last one whenever the steps keep shrinking.
    let mut best = (f64::INFINITY, current.clone());
    let mut final_step = f64::INFINITY;
    let mut converged = false;
    let mut iterations_used = 0;

    while iterations_used < max_iters {
        let w = weights_about(points, &q, theta, reduction);
        let active = active_set(&w);
        if active.len() < d + 1 {
            return Err(MmlsError::DegenerateNeighborhood {
                rank: active.len(),
                required: d + 1,
            });
        }
        let mut centered = points.select_columns(&active);
        for mut col in centered.column_iter_mut() {
            col -= &q;
        }
        let coords = u.tr_mul(&centered);
        let sub_w: Vec<f64> = active.iter().map(|&i| w[i]).collect();
        // Affine fit l(x) ≈ r_i − q over the current frame coordinates.
        let fit = fit_scaled(&coords, &centered, &sub_w, 1, scale)?;
        let c = fit.coefficients();
        let q_tmp = &q + c.row(0).transpose();
        let mut v = DMatrix::<f64>::zeros(r.len(), d);
        for k in 0..d {
            // l(e_k) − l(0), with monomials in x / scale.
            v.set_column(k, &(c.row(k + 1).transpose() / scale));
        }
        u = OrthonormalBasis::orthonormalize(v)
            .map_err(|e| match e {
                MmlsError::DegenerateData { rank, required } => {
                    MmlsError::DegenerateNeighborhood { rank, required }
                }
                other => other,
            })?
            .into_matrix();
        let q_next = &q_tmp + &u * u.tr_mul(&(r - &q_tmp));
        final_step = (&q_next - &q).norm();
        q = q_next;
        iterations_used += 1;

        current = frame_of(&q, &u);
        let cost = cost_whitened(points, theta, reduction, &current);
        cost_history.push(cost);
        if final_step < best.0 {
            best = (final_step, current.clone());
        }
        if final_step < params.eps {
            converged = true;
            if !fixed {
                break;
            }
        } else {
            converged = false;
        }
    }
    if max_iters == 0 {
        converged = true;
        final_step = 0.0;
    }

    let frame = if converged { current } else { best.1 };
    Ok((
        frame,
        FrameSolveReport {
            iterations_used,
            cost_history,
            converged,
            final_step,
        },
    ))
}

/// The minimizing `H` for a fixed origin `q`: weighted PCA of the points
/// `r_i − q` projected onto the orthogonal complement of `r − q`, with
/// weights `θ(‖r_i − q‖)`.
pub fn frame_given_q(
    cloud: &PointCloud,
    r: &DVector<f64>,
    q: &DVector<f64>,
    d: usize,
    theta: &WeightFunction,
    metric: &MetricForm,
) -> Result<AffineFrame> {
    metric.check_dim(cloud.dim())?;
    let points = metric.to_euclidean(cloud.points());
    let rw = whiten_point(metric, r);
    let qw = whiten_point(metric, q);
    check_query(&points, &rw, d)?;
    if qw.len() != rw.len() {
        return Err(MmlsError::InvalidInput(
            "origin has the wrong dimension".into(),
        ));
    }
    let normal = &rw - &qw;
    let norm = normal.norm();
    let scale = theta.scale();
    let normal = (norm > 1e-14 * scale).then(|| normal / norm);

    let mut projected = points.clone();
    for mut col in projected.column_iter_mut() {
        col -= &qw;
        if let Some(nrm) = &normal {
            let along = nrm.dot(&col);
            col.axpy(-along, nrm, 1.0);
        }
    }
    let weights = weights_about(&points, &qw, theta, None);
    let basis = WeightedCloudMatrix::assemble(&projected, &DVector::zeros(rw.len()), &weights)?
        .principal_subspace(d)?;
    Ok(AffineFrame::new(qw, basis, &rw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;

    fn line_cloud() -> PointCloud {
        let dir = DVector::from_vec(vec![1.0, 2.0, -0.5]).normalize();
        let base = DVector::from_vec(vec![0.3, -0.1, 0.7]);
        let cols: Vec<DVector<f64>> = (0..60)
            .map(|i| &base + &dir * (i as f64 * 0.05 - 1.5))
            .collect();
        PointCloud::new(DMatrix::from_columns(&cols)).unwrap()
    }

    #[test]
    fn line_query_on_line() {
        let cloud = line_cloud();
        let r = cloud.point(25).into_owned()
            + DVector::from_vec(vec![1.0, 2.0, -0.5]).normalize() * 0.013;
        let params = FrameParams::for_cloud(&cloud, 1, WeightFunction::gaussian(0.3).unwrap());
        let (frame, report) = find_local_frame(&cloud, &r, &params).unwrap();
        assert!(report.converged);
        assert!((&frame.origin - &r).norm() < 1e-8);
        let dir = DMatrix::from_column_slice(
            3,
            1,
            DVector::from_vec(vec![1.0, 2.0, -0.5])
                .normalize()
                .as_slice(),
        );
        assert!(max_principal_angle(frame.basis.matrix(), &dir) < 1e-8);
        assert!(report
            .cost_history
            .iter()
            .all(|c| c.is_finite() && *c >= 0.0));
    }

    #[test]
    fn single_point_cost() {
        let cloud = PointCloud::from_points(&[vec![0.0, 1.0]]).unwrap();
        let basis = OrthonormalBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let r = DVector::zeros(2);
        let frame = AffineFrame::new(DVector::zeros(2), basis, &r);
        // θ(1) = 1 needs a flat weight; a huge σ gets within rounding.
        let theta = WeightFunction::gaussian(1e9).unwrap();
        let j = cost_j(&cloud, &theta, &MetricForm::Euclidean, &frame).unwrap();
        assert!((j - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_neighbors_is_degenerate() {
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let params = FrameParams::for_cloud(&cloud, 1, WeightFunction::compact_bump(1.0).unwrap());
        let err = find_local_frame(&cloud, &DVector::zeros(3), &params).unwrap_err();
        assert!(matches!(err, MmlsError::DegenerateNeighborhood { .. }));
    }

    #[test]
    fn far_query_with_compact_support_is_degenerate() {
        let cloud = line_cloud();
        let params = FrameParams::for_cloud(&cloud, 1, WeightFunction::compact_bump(0.3).unwrap());
        let r = DVector::from_vec(vec![50.0, 50.0, 50.0]);
        assert!(matches!(
            find_local_frame(&cloud, &r, &params),
            Err(MmlsError::DegenerateNeighborhood { rank: 0, .. })
        ));
    }

    #[test]
    fn bad_dimension_rejected() {
        let cloud = line_cloud();
        let params = FrameParams::for_cloud(&cloud, 3, WeightFunction::gaussian(0.3).unwrap());
        assert!(matches!(
            find_local_frame(&cloud, &DVector::zeros(3), &params),
            Err(MmlsError::Config(_))
        ));
    }

    #[test]
    fn given_q_plane_normal_constraint() {
        // Points on the z = 0 plane, r straight above q.
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push(vec![i as f64 * 0.2 - 0.5, j as f64 * 0.2 - 0.5, 0.0]);
            }
        }
        let cloud = PointCloud::from_points(&pts).unwrap();
        let q = DVector::from_vec(vec![0.05, -0.02, 0.0]);
        let r = DVector::from_vec(vec![0.05, -0.02, 0.4]);
        let theta = WeightFunction::gaussian(0.5).unwrap();
        let frame = frame_given_q(&cloud, &r, &q, 2, &theta, &MetricForm::Euclidean).unwrap();
        let plane = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(max_principal_angle(frame.basis.matrix(), &plane) < 1e-12);
        assert!(frame.constraint_residual < 1e-15);
    }
}
