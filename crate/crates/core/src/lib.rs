//! Manifold moving least-squares (MMLS).
//!
//! Projects points of R^n onto a smooth `d`-dimensional manifold that
//! approximates noisy scattered samples. Each projection solves a local
//! affine frame for the query ([`frame`]) and evaluates a weighted
//! polynomial fit over that frame at its origin ([`project`]).
//!
//! ```
//! use mmls::{project_point, MmlsConfig, PointCloud};
//! use nalgebra::DVector;
//!
//! let pts: Vec<Vec<f64>> = (0..1000)
//!     .map(|i| {
//!         let t = i as f64 * std::f64::consts::TAU / 1000.0;
//!         vec![t.cos(), t.sin()]
//!     })
//!     .collect();
//! let cloud = PointCloud::from_points(&pts).unwrap();
//! let r = DVector::from_vec(vec![1.05, 0.02]);
//! let res = project_point(&cloud, &r, &MmlsConfig::new(1, 2)).unwrap();
//! assert!((res.projected.norm() - 1.0).abs() < 1e-4);
//! ```

pub mod cloud;
pub mod error;
pub mod frame;
pub mod harness;
pub mod io;
mod linalg;
pub mod poly;
pub mod project;
pub mod weights;
pub mod wpca;

pub use cloud::PointCloud;
pub use error::{MmlsError, Result};
pub use frame::{
    cost_j, find_local_frame, find_local_frame_from, frame_given_q, AffineFrame, FrameParams,
    FrameSolveReport, Iterations,
};
pub use linalg::{max_principal_angle, principal_angles};
pub use poly::{mls_function_approx, poly_dim, weighted_poly_fit, PolynomialMap};
pub use project::{
    project_cloud, project_point, Bandwidth, KernelKind, MmlsConfig, ProjectionResult, Projector,
};
pub use weights::{estimate_sigma, eval_weight, DistanceReduction, MetricForm, WeightFunction};
pub use wpca::{
    iterative_ls_subspace, subspace_iteration, weighted_pca, OrthonormalBasis, WeightedCloudMatrix,
};
