//! Experiment drivers: convergence order, denoising and ambient-dimension
//! scaling.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};
use crate::harness::manifold::{
    distance_to_manifold, sample_manifold, IsometricEmbedding, SyntheticManifold,
};
use crate::harness::metrics::{fill_distance, loglog_slope, paired_mean_distance, rms, Hausdorff};
use crate::harness::noise::NoiseModel;
use crate::project::{MmlsConfig, Projector};

/// A query the projection could not handle.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub index: usize,
    pub code: &'static str,
    pub message: String,
}

/// Per-resolution figures of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub samples: usize,
    /// Fill distance measured against a dense on-manifold grid.
    pub h: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub failures: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    /// RMS distance of the (noisy) inputs to the manifold.
    pub rmse_before: Option<f64>,
    /// RMS distance of the outputs to the manifold.
    pub rmse_to_truth: f64,
    /// Mean distance of inputs to their ground-truth twins.
    pub mean_twin_before: Option<f64>,
    /// Mean distance of outputs to the inputs' ground-truth twins.
    pub mean_twin_after: Option<f64>,
    /// Between the output set and the clean sample set.
    pub hausdorff: Option<Hausdorff>,
    /// Output-to-manifold distance per point (finest level for studies).
    pub per_point: Vec<f64>,
    pub failures: Vec<PointFailure>,
    pub not_converged: usize,
    pub levels: Vec<LevelStats>,
    /// Log-log slope of `max_error` against `h`; `None` when errors sit at
    /// round-off level (nothing to fit).
    pub slope: Option<f64>,
}

/// Resolution ladder: level `k` uses `base_count · 2^k` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub base_count: usize,
    pub levels: usize,
    pub probes: usize,
    pub seed: u64,
}

impl ConvergenceStudy {
    pub fn new(base_count: usize, levels: usize) -> Self {
        Self {
            base_count,
            levels,
            probes: 200,
            seed: 1,
        }
    }
}

/// Below this fraction of the cloud diameter errors count as round-off.
const ROUNDOFF_LEVEL: f64 = 1e-10;

/// Projects held-out on-manifold probes at successively halved fill
/// distances and fits the log-log slope of the worst probe error.
pub fn run_convergence_study(
    manifold: &SyntheticManifold,
    m: usize,
    study: &ConvergenceStudy,
    config: &MmlsConfig,
) -> Result<ErrorReport> {
    if study.levels < 3 {
        return Err(MmlsError::InvalidInput(format!(
            "a convergence study needs at least 3 levels, got {}",
            study.levels
        )));
    }
    let mut cfg = config.clone();
    cfg.m = m;
    cfg.d = manifold.intrinsic_dim();

    let mut report = ErrorReport::default();
    let mut all_roundoff = true;
    for level in 0..study.levels {
        let count = study.base_count << level;
        let cloud = sample_manifold(manifold, count, None, study.seed)?;
        let projector = Projector::new(&cloud, &cfg)?;
        let probe_params =
            manifold.random_params(study.probes, study.seed.wrapping_add(level as u64));
        let probes: Vec<DVector<f64>> = probe_params.iter().map(|p| manifold.point_at(p)).collect();
        let results = projector.project_all(&probes);

        let dense = manifold.points_at(&manifold.sample_params(count * 8)?);
        let h = fill_distance(cloud.points(), &dense);

        let mut errors = Vec::with_capacity(results.len());
        let mut failures = 0;
        let mut not_converged = 0;
        for (index, res) in results.iter().enumerate() {
            match res {
                Ok(r) => {
                    if !r.converged() {
                        not_converged += 1;
                    }
                    errors.push(distance_to_manifold(&r.projected, manifold)?.distance);
                }
                Err(e) => {
                    failures += 1;
                    if level + 1 == study.levels {
                        report.failures.push(PointFailure {
                            index,
                            code: e.code(),
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        let mean_error = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };
        if max_error > ROUNDOFF_LEVEL * projector.diameter() {
            all_roundoff = false;
        }
        report.levels.push(LevelStats {
            samples: count,
            h,
            max_error,
            mean_error,
            failures,
            not_converged,
        });
        if level + 1 == study.levels {
            report.rmse_to_truth = rms(&errors);
            report.not_converged = not_converged;
            report.per_point = errors;
        }
    }
    if !all_roundoff {
        let h: Vec<f64> = report.levels.iter().map(|l| l.h).collect();
        let e: Vec<f64> = report.levels.iter().map(|l| l.max_error).collect();
        report.slope = loglog_slope(&h, &e);
    }
    Ok(report)
}

/// Samples `count` noisy points, projects every one of them and compares
/// inputs and outputs against the manifold and the ground truth.
pub fn run_denoise_experiment(
    manifold: &SyntheticManifold,
    count: usize,
    noise: &NoiseModel,
    seed: u64,
    config: &MmlsConfig,
) -> Result<ErrorReport> {
    let mut cfg = config.clone();
    cfg.d = manifold.intrinsic_dim();
    let cloud = sample_manifold(manifold, count, Some(noise), seed)?;
    let truth = cloud
        .truth()
        .expect("sampled clouds carry ground truth")
        .clone();
    denoise_cloud(manifold, &cloud, &truth, &cfg)
}

fn denoise_cloud(
    manifold: &SyntheticManifold,
    cloud: &PointCloud,
    truth: &DMatrix<f64>,
    config: &MmlsConfig,
) -> Result<ErrorReport> {
    let projector = Projector::new(cloud, config)?;
    let queries: Vec<DVector<f64>> = cloud
        .points()
        .column_iter()
        .map(|c| c.into_owned())
        .collect();
    let results = projector.project_all(&queries);

    let mut report = ErrorReport::default();
    let mut ok_idx = Vec::new();
    let mut outputs = Vec::new();
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(r) => {
                if !r.converged() {
                    report.not_converged += 1;
                }
                ok_idx.push(index);
                outputs.push(r.projected);
            }
            Err(e) => report.failures.push(PointFailure {
                index,
                code: e.code(),
                message: e.to_string(),
            }),
        }
    }
    if outputs.is_empty() {
        return Err(MmlsError::DegenerateNeighborhood {
            rank: 0,
            required: config.d + 1,
        });
    }
    let out = DMatrix::from_columns(&outputs);
    let inputs = cloud.points().select_columns(&ok_idx);
    let twins = truth.select_columns(&ok_idx);

    let distances = |m: &DMatrix<f64>| -> Result<Vec<f64>> {
        m.column_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|c| distance_to_manifold(&c.into_owned(), manifold).map(|d| d.distance))
            .collect()
    };
    let before = distances(&inputs)?;
    let after = distances(&out)?;
    report.rmse_before = Some(rms(&before));
    report.rmse_to_truth = rms(&after);
    report.mean_twin_before = Some(paired_mean_distance(&inputs, &twins));
    report.mean_twin_after = Some(paired_mean_distance(&out, &twins));
    report.hausdorff = Some(Hausdorff::between(&out, truth));
    report.per_point = after;
    Ok(report)
}

/// Inputs for an ambient-dimension scaling run.
#[derive(Debug, Clone)]
pub struct ScalingSetup {
    /// Cloud in its native dimension.
    pub base: PointCloud,
    pub queries: Vec<DVector<f64>>,
    /// Target ambient dimensions, each at least the base dimension.
    pub dims: Vec<usize>,
    /// Timing repetitions; the fastest is reported.
    pub reps: usize,
    pub seed: u64,
}

impl ScalingSetup {
    /// Noisy helix (`d = 1`) or sphere (`d = 2`) with the first 32 samples as
    /// queries.
    pub fn for_dimension(d: usize, dims: Vec<usize>, seed: u64) -> Result<Self> {
        let (manifold, count, noise) = match d {
            1 => (SyntheticManifold::helix(), 400, 0.2),
            2 => (SyntheticManifold::Sphere { radius: 1.0 }, 600, 0.05),
            _ => {
                return Err(MmlsError::Unsupported(format!(
                    "scaling runs are provided for d = 1 or 2, not {d}"
                )))
            }
        };
        let base = sample_manifold(
            &manifold,
            count,
            Some(&NoiseModel::UniformBox { amplitude: noise }),
            seed,
        )?;
        let queries = base
            .points()
            .column_iter()
            .take(32)
            .map(|c| c.into_owned())
            .collect();
        Ok(Self {
            base,
            queries,
            dims,
            reps: 3,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub seconds_per_point: f64,
    /// Time ratio against the previous row.
    pub ratio: Option<f64>,
    /// `max ‖P_n(E r) − E P(r)‖` over the queries.
    pub equivariance_error: f64,
    pub failures: usize,
}

/// Embeds the base cloud isometrically into each target dimension, times
/// the per-point projection there and checks the outputs against the
/// embedded base-dimension projections.
pub fn measure_linear_scaling(
    setup: &ScalingSetup,
    config: &MmlsConfig,
) -> Result<Vec<ScalingRow>> {
    let base_proj = Projector::new(&setup.base, config)?;
    let reference: Vec<DVector<f64>> = setup
        .queries
        .iter()
        .map(|q| base_proj.project(q).map(|r| r.projected))
        .collect::<Result<_>>()?;

    let mut rows: Vec<ScalingRow> = Vec::with_capacity(setup.dims.len());
    for &n in &setup.dims {
        let embedding = IsometricEmbedding::new(setup.base.dim(), n, 4, setup.seed ^ n as u64)?;
        let cloud = PointCloud::new(embedding.embed_all(setup.base.points()))?;
        let queries: Vec<DVector<f64>> = setup.queries.iter().map(|q| embedding.embed(q)).collect();
        let projector = Projector::new(&cloud, config)?;

        let mut best = f64::INFINITY;
        let mut outputs = Vec::new();
        for _ in 0..setup.reps.max(1) {
            let start = Instant::now();
            outputs = queries
                .iter()
                .map(|q| projector.project(q))
                .collect::<Vec<_>>();
            best = best.min(start.elapsed().as_secs_f64());
        }
        let mut failures = 0;
        let mut equivariance_error = 0.0f64;
        for (res, expected) in outputs.iter().zip(&reference) {
            match res {
                Ok(r) => {
                    let e = (&r.projected - embedding.embed(expected)).norm();
                    equivariance_error = equivariance_error.max(e);
                }
                Err(_) => failures += 1,
            }
        }
        let seconds_per_point = best / queries.len().max(1) as f64;
        let ratio = rows
            .last()
            .map(|prev| seconds_per_point / prev.seconds_per_point);
        rows.push(ScalingRow {
            n,
            seconds_per_point,
            ratio,
            equivariance_error,
            failures,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightFunction;

    #[test]
    fn plane_study_has_no_slope() {
        let manifold = SyntheticManifold::random_plane(4, 2, 3).unwrap();
        let report = run_convergence_study(
            &manifold,
            1,
            &ConvergenceStudy::new(64, 3),
            &MmlsConfig::new(2, 1),
        )
        .unwrap();
        assert_eq!(report.slope, None);
        for level in &report.levels {
            assert!(level.max_error < 1e-10, "{level:?}");
        }
    }

    #[test]
    fn too_few_levels() {
        let manifold = SyntheticManifold::unit_circle();
        assert!(run_convergence_study(
            &manifold,
            2,
            &ConvergenceStudy::new(64, 2),
            &MmlsConfig::new(1, 2)
        )
        .is_err());
    }

    #[test]
    fn clean_plane_denoise_is_exact() {
        let manifold = SyntheticManifold::random_plane(3, 2, 8).unwrap();
        let report = run_denoise_experiment(
            &manifold,
            100,
            &NoiseModel::Gaussian { std_dev: 0.0 },
            1,
            &MmlsConfig::new(2, 2),
        )
        .unwrap();
        assert!(report.rmse_to_truth < 1e-10);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn single_point_cloud_surfaces_error() {
        let base = PointCloud::from_points(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let setup = ScalingSetup {
            base,
            queries: vec![DVector::zeros(3)],
            dims: vec![8],
            reps: 1,
            seed: 0,
        };
        let config = MmlsConfig::new(1, 2).with_weight(WeightFunction::gaussian(1.0).unwrap());
        assert!(matches!(
            measure_linear_scaling(&setup, &config),
            Err(MmlsError::DegenerateNeighborhood { .. })
        ));
    }
}
