//! Sparse group lasso: regularization paths for linear and logistic models
//! with overlapping L1 and grouped L2 penalties, on dense or
//! compressed-sparse-column designs.
//!
//! The objective at penalty level lambda and mixing weight alpha is
//!
//! ```text
//! loss(beta, b0) + (1 - alpha) lambda sum_g sqrt(w_g) ||beta_g||_2
//!                +      alpha  lambda sum_j omega_j |beta_j|
//! ```
//!
//! where the loss is mean squared error / 2 (Gaussian) or the mean logistic
//! log-loss (Binomial). Paths are fitted over a decreasing lambda grid with
//! sequential screening, working-set iteration, and full optimality checks,
//! so screening never changes the answer — only the time to reach it.
//!
//! Entry points: [`solver::fit_path`] to fit, [`model::SolutionPath`] to
//! interpolate and predict, [`cv::cross_validate`] for K-fold selection,
//! [`risk::estimate_risk`] for information criteria, and [`oracle`] for the
//! slow reference implementations the fast ones are tested against.

pub mod cv;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod risk;
pub mod solver;

pub use linalg::{DenseMatrix, DesignMatrix, LinalgError, SparseColumnMatrix};
pub use model::{
    CoefAt, FitDiagnostics, ModelError, PathSummary, Prediction, PredictKind, SolutionPath,
};
pub use penalty::{PenaltyError, PenaltyParams};
pub use solver::{
    fit_path, Family, FitConfig, GroupStructure, KktReport, PathSolver, SolverError, SolverState,
};
