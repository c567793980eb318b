//! Subcommand bodies. Each returns the text it would print so `main` owns
//! every write to stdout and stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mmls::harness::{
    measure_linear_scaling, run_convergence_study, run_denoise_experiment, ConvergenceStudy,
    NoiseModel, ScalingSetup, SyntheticManifold,
};
use mmls::io::{format_cloud, format_value, read_cloud, CloudFile};
use mmls::project::{Bandwidth, KernelKind};
use mmls::weights::estimate_sigma_detailed;
use mmls::{
    DistanceReduction, Iterations, MetricForm, MmlsConfig, MmlsError, ProjectionResult, Projector,
    WeightFunction,
};
use nalgebra::{DMatrix, DVector};

use crate::args::{
    ConvergenceArgs, ConvergenceKind, DenoiseArgs, DenoiseKind, Iters, MetricArg, ModelArgs,
    ProjectArgs, ScalingArgs, Sigma, SigmaArgs, StudyDenoiseArgs, WeightKind,
};

/// Failures of the command-line layer on top of the library's own.
#[derive(Debug)]
pub enum CliError {
    Core(MmlsError),
    Usage(String),
    /// `--strict` run with rows that failed or did not converge.
    Flagged {
        flagged: usize,
        total: usize,
    },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "E_USAGE",
            CliError::Flagged { .. } => "E_FLAGGED",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Flagged { flagged, total } => {
                write!(f, "{flagged} of {total} rows failed or did not converge")
            }
        }
    }
}

impl From<MmlsError> for CliError {
    fn from(e: MmlsError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a command produced: the primary output and a summary for stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub summary: Option<String>,
}

const NOT_CONVERGED: &str = "W_NOT_CONVERGED";

fn metric_form(arg: &MetricArg) -> CliResult<MetricForm> {
    match arg {
        MetricArg::Euclid => Ok(MetricForm::Euclidean),
        MetricArg::Spd(path) => {
            // Rows of the file are rows of the matrix; columns of a parsed
            // cloud are its rows.
            let file = read_cloud(path)?;
            Ok(MetricForm::spd(file.cloud.points().transpose())?)
        }
    }
}

pub fn build_config(model: &ModelArgs, d: usize) -> CliResult<MmlsConfig> {
    let mut config = MmlsConfig::new(d, model.m);
    config.bandwidth = match (model.weight, model.sigma) {
        (WeightKind::Gaussian, Sigma::Auto) => Bandwidth::auto(KernelKind::Gaussian),
        (WeightKind::Bump, Sigma::Auto) => Bandwidth::auto(KernelKind::CompactBump),
        (WeightKind::Gaussian, Sigma::Fixed(s)) => Bandwidth::Fixed(WeightFunction::gaussian(s)?),
        (WeightKind::Bump, Sigma::Fixed(s)) => Bandwidth::Fixed(WeightFunction::compact_bump(s)?),
    };
    if let Some(eps) = model.eps {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(MmlsError::Config(format!("--eps must be positive, got {eps}")).into());
        }
        config.eps = Some(eps);
    }
    config.iterations = match model.iters {
        Iters::UpTo(k) => Iterations::UpTo(k),
        Iters::Paper3 => Iterations::Exactly(3),
    };
    config.metric = metric_form(&model.metric)?;
    config.distance_rank = model.distance_rank;
    config.seed = model.seed;
    Ok(config)
}

fn intrinsic_dim(model: &ModelArgs, file: &CloudFile) -> CliResult<usize> {
    model.d.or(file.declared_d).ok_or_else(|| {
        MmlsError::Config(
            "intrinsic dimension unknown: pass --d or add `d=<d>` to the header".into(),
        )
        .into()
    })
}

fn columns(points: &DMatrix<f64>) -> Vec<DVector<f64>> {
    points.column_iter().map(|c| c.into_owned()).collect()
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| MmlsError::Io(format!("{}: {e}", path.display())).into())
}

/// Writes `text` to `out`, or hands it back for stdout.
fn emit(out: Option<&Path>, text: String) -> CliResult<String> {
    match out {
        Some(path) => write_file(path, &text).map(|()| String::new()),
        None => Ok(text),
    }
}

fn sidecar(out: Option<&Path>, report: Option<&Path>) -> Option<PathBuf> {
    report.map(Path::to_path_buf).or_else(|| {
        out.map(|p| {
            let mut name = p.as_os_str().to_owned();
            name.push(".report.csv");
            PathBuf::from(name)
        })
    })
}

/// Projects `queries` and renders the output cloud, the per-row report and
/// a summary line. Rows that fail keep their input coordinates.
fn project_rows(
    projector: &Projector,
    queries: &[DVector<f64>],
    d: usize,
    m: usize,
) -> (String, String, String, usize) {
    let results = projector.project_all(queries);
    let mut outputs = Vec::with_capacity(queries.len());
    let mut report =
        String::from("index,status,code,displacement,iterations,final_step,degree_used\n");
    let (mut not_converged, mut failed) = (0usize, 0usize);
    let (mut sum_disp, mut max_disp, mut ok) = (0.0f64, 0.0f64, 0usize);
    for (index, (query, result)) in queries.iter().zip(&results).enumerate() {
        match result {
            Ok(res) => {
                let ProjectionResult {
                    projected,
                    report: r,
                    degree_used,
                    ..
                } = res;
                let disp = (projected - query).norm();
                let (status, code) = if r.converged {
                    ("ok", "")
                } else {
                    not_converged += 1;
                    ("not_converged", NOT_CONVERGED)
                };
                sum_disp += disp;
                max_disp = max_disp.max(disp);
                ok += 1;
                writeln!(
                    report,
                    "{index},{status},{code},{},{},{},{degree_used}",
                    format_value(disp),
                    r.iterations_used,
                    format_value(r.final_step)
                )
                .unwrap();
                outputs.push(projected.clone());
            }
            Err(e) => {
                failed += 1;
                writeln!(report, "{index},failed,{},,,,", e.code()).unwrap();
                outputs.push(query.clone());
            }
        }
    }
    let cloud = if outputs.is_empty() {
        String::new()
    } else {
        format_cloud(&DMatrix::from_columns(&outputs), Some(d))
    };
    let mean = if ok > 0 { sum_disp / ok as f64 } else { 0.0 };
    let summary = format!(
        "projected {} points (d={d}, m={m}): {not_converged} not converged, {failed} failed; \
         displacement mean {mean:.6e} max {max_disp:.6e}",
        queries.len()
    );
    (cloud, report, summary, not_converged + failed)
}

fn finish_projection(
    projector: &Projector,
    queries: &[DVector<f64>],
    d: usize,
    m: usize,
    out: Option<&Path>,
    report_path: Option<&Path>,
    strict: bool,
) -> CliResult<Outcome> {
    let (cloud, report, summary, flagged) = project_rows(projector, queries, d, m);
    let stdout = emit(out, cloud)?;
    if let Some(path) = sidecar(out, report_path) {
        write_file(&path, &report)?;
    }
    if strict && flagged > 0 {
        return Err(CliError::Flagged {
            flagged,
            total: queries.len(),
        });
    }
    Ok(Outcome {
        stdout,
        summary: Some(summary),
    })
}

pub fn denoise(args: &DenoiseArgs) -> CliResult<Outcome> {
    let file = read_cloud(&args.input)?;
    let d = intrinsic_dim(&args.model, &file)?;
    let config = build_config(&args.model, d)?;
    let projector = Projector::new(&file.cloud, &config)?;
    let queries = columns(file.cloud.points());
    finish_projection(
        &projector,
        &queries,
        d,
        config.m,
        args.out.as_deref(),
        args.report.as_deref(),
        args.strict,
    )
}

pub fn project(args: &ProjectArgs) -> CliResult<Outcome> {
    let file = read_cloud(&args.cloud)?;
    let d = intrinsic_dim(&args.model, &file)?;
    let config = build_config(&args.model, d)?;
    let queries = read_cloud(&args.queries)?;
    if queries.cloud.dim() != file.cloud.dim() {
        return Err(MmlsError::Config(format!(
            "queries have {} columns but the cloud has {}",
            queries.cloud.dim(),
            file.cloud.dim()
        ))
        .into());
    }
    let projector = Projector::new(&file.cloud, &config)?;
    finish_projection(
        &projector,
        &columns(queries.cloud.points()),
        d,
        config.m,
        args.out.as_deref(),
        args.report.as_deref(),
        args.strict,
    )
}

pub fn sigma(args: &SigmaArgs) -> CliResult<Outcome> {
    let file = read_cloud(&args.input)?;
    let d = intrinsic_dim(&args.model, &file)?;
    let config = build_config(&args.model, d)?;
    config.metric.check_dim(file.cloud.dim())?;
    // Measured exactly as a projection would measure it.
    let whitened = config.metric.to_euclidean(file.cloud.points());
    let reduction = config
        .distance_rank
        .map(|k| DistanceReduction::fit(&whitened, k, config.seed))
        .transpose()?;
    let points = reduction.as_ref().map_or(&whitened, |r| r.reduced_points());
    let est = estimate_sigma_detailed(
        points,
        d,
        config.m,
        args.trials,
        args.oversample,
        config.seed,
    )?;
    let radii: Vec<f64> = est.trials.iter().map(|(_, r)| *r).collect();
    let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        stdout: format!(
            "sigma,neighbors,trials,min_radius\n{},{},{},{}\n",
            format_value(est.sigma),
            est.neighbors,
            est.trials.len(),
            format_value(min)
        ),
        summary: None,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub fn study_convergence(args: &ConvergenceArgs) -> CliResult<Outcome> {
    let manifold = match args.kind {
        ConvergenceKind::Circle => SyntheticManifold::unit_circle(),
        ConvergenceKind::Helix => SyntheticManifold::helix(),
        ConvergenceKind::Sphere => SyntheticManifold::Sphere { radius: 1.0 },
        ConvergenceKind::Torus => SyntheticManifold::Torus {
            major: 2.0,
            minor: 0.5,
        },
    };
    let config = build_config(&args.model, manifold.intrinsic_dim())?;
    let mut study = ConvergenceStudy::new(args.base, args.levels);
    study.probes = args.probes;
    study.seed = args.model.seed;
    let report = run_convergence_study(&manifold, config.m, &study, &config)?;
    let slope = opt(report.slope);
    let mut csv =
        String::from("kind,m,level,samples,h,max_error,mean_error,failures,not_converged,slope\n");
    for (level, s) in report.levels.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{level},{},{},{},{},{},{},{slope}",
            manifold.name(),
            config.m,
            s.samples,
            format_value(s.h),
            format_value(s.max_error),
            format_value(s.mean_error),
            s.failures,
            s.not_converged
        )
        .unwrap();
    }
    Ok(Outcome {
        stdout: emit(args.out.as_deref(), csv)?,
        summary: Some(format!("{} m={} slope {slope}", manifold.name(), config.m)),
    })
}

pub fn study_scaling(args: &ScalingArgs) -> CliResult<Outcome> {
    let d = args.model.d.unwrap_or(1);
    let config = build_config(&args.model, d)?;
    let mut setup = ScalingSetup::for_dimension(d, args.n.0.clone(), args.model.seed)?;
    setup.reps = args.reps.max(1);
    let rows = measure_linear_scaling(&setup, &config)?;
    let mut csv = String::from("n,seconds_per_point,ratio,equivariance_error,failures\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.n,
            format_value(row.seconds_per_point),
            opt(row.ratio),
            format_value(row.equivariance_error),
            row.failures
        )
        .unwrap();
    }
    Ok(Outcome {
        stdout: emit(args.out.as_deref(), csv)?,
        summary: None,
    })
}

pub fn study_denoise(args: &StudyDenoiseArgs) -> CliResult<Outcome> {
    let (manifold, count, noise) = match args.kind {
        DenoiseKind::Helix => (
            SyntheticManifold::helix(),
            400,
            NoiseModel::UniformBox { amplitude: 0.2 },
        ),
        DenoiseKind::Ellipse => (
            SyntheticManifold::ellipse_images(32),
            144,
            NoiseModel::Gaussian { std_dev: 0.05 },
        ),
    };
    let count = args.count.unwrap_or(count);
    let config = build_config(&args.model, manifold.intrinsic_dim())?;
    let report = run_denoise_experiment(&manifold, count, &noise, args.model.seed, &config)?;
    let mut csv = String::from(
        "kind,count,rmse_before,rmse_after,mean_twin_before,mean_twin_after,\
         hausdorff_forward,hausdorff_backward,failures,not_converged\n",
    );
    writeln!(
        csv,
        "{},{count},{},{},{},{},{},{},{},{}",
        manifold.name(),
        opt(report.rmse_before),
        format_value(report.rmse_to_truth),
        opt(report.mean_twin_before),
        opt(report.mean_twin_after),
        opt(report.hausdorff.map(|h| h.forward)),
        opt(report.hausdorff.map(|h| h.backward)),
        report.failures.len(),
        report.not_converged
    )
    .unwrap();
    if let Some(path) = &args.per_point {
        let failed: Vec<usize> = report.failures.iter().map(|f| f.index).collect();
        let mut rows = String::from("index,distance\n");
        let ok = (0..count).filter(|i| !failed.contains(i));
        for (index, dist) in ok.zip(&report.per_point) {
            writeln!(rows, "{index},{}", format_value(*dist)).unwrap();
        }
        write_file(path, &rows)?;
    }
    Ok(Outcome {
        stdout: emit(args.out.as_deref(), csv)?,
        summary: Some(format!(
            "{}: rmse to manifold {} -> {}",
            manifold.name(),
            opt(report.rmse_before),
            format_value(report.rmse_to_truth)
        )),
    })
}
