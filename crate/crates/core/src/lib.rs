//! Simulation toolkit for convex hulls of Gaussian samples: hulls, intrinsic
//! volumes, Grassmannian sampling, the local construction near the sphere of
//! radius `sqrt(2 ln n - ln ln n)`, and the statistics used to read results.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod construction;
pub mod error;
pub mod experiments;
pub mod format;
pub mod geom;
pub mod grassmann;
pub mod intrinsic;
pub mod linalg;
pub mod sampling;
pub mod stats;

pub use construction::{Scaffold, SiteFrame};
pub use error::{Error, Result};
pub use experiments::{Experiment, ExperimentConfig, Report, ResultRow};
pub use geom::{convex_hull, HalfSpace, PointCloud, Polytope, Region, Simplex};
pub use grassmann::{CircularCone, Subspace};
pub use intrinsic::{IvEstimate, Method};
pub use sampling::{Model, RandomStream};
pub use stats::{Estimate, ScalingFit, SummaryStats};
