//! Synthetic data, error metrics and experiment drivers.

pub mod manifold;
pub mod metrics;
pub mod noise;
pub mod study;

pub use manifold::{
    distance_to_manifold, render_ellipse, sample_manifold, IsometricEmbedding, ManifoldDistance,
    SyntheticManifold,
};
pub use metrics::{directed_hausdorff, fill_distance, loglog_slope, Hausdorff};
pub use noise::NoiseModel;
pub use study::{
    measure_linear_scaling, run_convergence_study, run_denoise_experiment, ConvergenceStudy,
    ErrorReport, LevelStats, PointFailure, ScalingRow, ScalingSetup,
};
