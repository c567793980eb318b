//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mmls",
    version,
    about = "Project noisy point clouds onto a smooth approximating manifold",
    long_about = "Project noisy point clouds onto a smooth approximating manifold.\n\n\
        Point files are CSV with one point per row and an optional `# n=<n> d=<d>` \
        first line. Every error prints a single line `error: <CODE>: <message>` on \
        stderr and exits nonzero.",
    after_help = "Environment:\n  MMLS_THREADS  Maximum number of worker threads (default: all cores)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project every sample of a cloud onto the manifold it approximates.
    ///
    /// Writes the projected cloud plus a sidecar report CSV with one row per
    /// point: displacement, iterations, convergence status and error code.
    /// Points that cannot be projected keep their input coordinates and are
    /// flagged in the report.
    Denoise(DenoiseArgs),
    /// Project query points onto the manifold approximating a cloud.
    Project(ProjectArgs),
    /// Estimate the kernel bandwidth of a cloud.
    Sigma(SigmaArgs),
    /// Run a synthetic experiment and emit its results as CSV.
    #[command(subcommand)]
    Study(StudyCommand),
}

/// Knobs shared by every projection.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Intrinsic dimension; defaults to the `d=` field of the input header.
    #[arg(long)]
    pub d: Option<usize>,
    /// Total degree of the local polynomial fit.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Weight function.
    #[arg(long, value_enum, default_value_t = WeightKind::Gaussian)]
    pub weight: WeightKind,
    /// Kernel width (Gaussian σ or bump support radius), or `auto` to
    /// estimate it from the data.
    #[arg(long, default_value = "auto", value_parser = parse_sigma)]
    pub sigma: Sigma,
    /// Absolute tolerance on the frame-origin update [default: 1e-10 × cloud diameter].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Frame iterations: a cap `k`, or `paper3` for exactly three. Rows whose
    /// last origin step still exceeds eps are flagged as not converged.
    #[arg(long, default_value = "10", value_parser = parse_iters)]
    pub iters: Iters,
    /// Distance metric: `euclid`, or `spd:<file>` with a symmetric positive
    /// definite matrix stored one row per line.
    #[arg(long, default_value = "euclid", value_parser = parse_metric)]
    pub metric: MetricArg,
    /// Measure kernel distances in the leading `k` principal directions of
    /// the cloud. Useful when n is large.
    #[arg(long, value_name = "K")]
    pub distance_rank: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = mmls::project::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightKind {
    Gaussian,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iters {
    UpTo(usize),
    Paper3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricArg {
    Euclid,
    Spd(PathBuf),
}

fn parse_sigma(s: &str) -> Result<Sigma, String> {
    if s == "auto" {
        return Ok(Sigma::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(Sigma::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

fn parse_iters(s: &str) -> Result<Iters, String> {
    if s == "paper3" {
        return Ok(Iters::Paper3);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(Iters::UpTo(k)),
        _ => Err(format!(
            "expected `paper3` or a positive integer, got `{s}`"
        )),
    }
}

fn parse_metric(s: &str) -> Result<MetricArg, String> {
    if s == "euclid" {
        return Ok(MetricArg::Euclid);
    }
    match s.strip_prefix("spd:") {
        Some(path) if !path.is_empty() => Ok(MetricArg::Spd(PathBuf::from(path))),
        _ => Err(format!("expected `euclid` or `spd:<file>`, got `{s}`")),
    }
}

/// Comma-separated list of dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimList(pub Vec<usize>);

fn parse_list(s: &str) -> Result<DimList, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{t}` is not a non-negative integer"))
        })
        .collect::<Result<_, _>>()
        .map(DimList)
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input cloud.
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output cloud [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-point report [default: `<out>.report.csv`, omitted when writing to stdout].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with an error if any point fails or does not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Cloud defining the manifold.
    pub cloud: PathBuf,
    /// Points to project, same column count as the cloud.
    pub queries: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output points [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-query report [default: `<out>.report.csv`, omitted when writing to stdout].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with an error if any query fails or does not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    /// Input cloud.
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of randomly drawn centre points.
    #[arg(long, default_value_t = mmls::weights::DEFAULT_SIGMA_TRIALS)]
    pub trials: usize,
    /// Neighbours required per centre, as a multiple of the polynomial space dimension.
    #[arg(long, default_value_t = mmls::weights::DEFAULT_OVERSAMPLE)]
    pub oversample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvergenceKind {
    Circle,
    Helix,
    Sphere,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenoiseKind {
    /// Helix in R³, 400 samples, uniform noise of amplitude 0.2.
    Helix,
    /// 32×32 ellipse images, 144 samples, Gaussian pixel noise of deviation 0.05.
    Ellipse,
}

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// Approximation order: project on-manifold probes at halving fill
    /// distances and fit the log-log slope of the worst error.
    Convergence(ConvergenceArgs),
    /// Time per projection as the ambient dimension grows.
    Scaling(ScalingArgs),
    /// Denoise a synthetic noisy cloud and compare against ground truth.
    Denoise(StudyDenoiseArgs),
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum, default_value_t = ConvergenceKind::Circle)]
    pub kind: ConvergenceKind,
    /// Number of resolutions; level k uses base · 2^k samples.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Samples at the coarsest level.
    #[arg(long, default_value_t = 128)]
    pub base: usize,
    /// Held-out probes per level.
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Comma-separated ambient dimensions.
    #[arg(long, value_parser = parse_list, default_value = "256,512,1024")]
    pub n: DimList,
    /// Timing repetitions; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyDenoiseArgs {
    #[arg(long, value_enum, default_value_t = DenoiseKind::Helix)]
    pub kind: DenoiseKind,
    /// Number of samples [default: 400 for the helix, 144 for ellipses].
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Summary CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-point output-to-manifold distances here.
    #[arg(long)]
    pub per_point: Option<PathBuf>,
}
