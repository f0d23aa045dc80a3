//! Shanks-based sequence transformations and Anderson-type mixing.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense ridge / sum-constrained / SVD kernels.
//! - [`window`]: rolling iterate histories and the difference matrices built from them.
//! - [`shanks`]: coefficient solvers (minimal-residual, topological, coupled) and combiners.
//! - [`lambda`]: regularization-parameter selection (fixed, grid search, GCV).
//! - [`drivers`]: restarted, continuous-updating, Anderson-type and stabilized iterations.
//! - [`problems`]: benchmark fixed-point maps (linear, PageRank, nonlinear Poisson, Bratu).
//! - [`experiment`]: config-driven comparison runs and record serialization.

pub mod drivers;
pub mod experiment;
pub mod lambda;
pub mod linalg;
pub mod problems;
pub mod shanks;
pub mod window;



pub use drivers::{Method, MethodConfig, Outcome, RunRecord, RunStatus};
pub use lambda::{LambdaScale, RegularizationPolicy};
pub use linalg::{Matrix, Metric, Vector};
pub use problems::FixedPointProblem;

