//! Command-line surface: subcommands, flags, and their documented defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgl_core::cv::CvLoss;
use sgl_core::{Family, PredictKind};

#[derive(Parser)]
#[command(
    name = "sgl",
    version,
    about = "Sparse group lasso paths: fit, cross-validate, assess, predict",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a regularization path and write it with plot-ready companions.
    Fit(FitArgs),
    /// Cross-validate the penalty level, then fit on all rows.
    Cv(CvArgs),
    /// Information criteria (df, AIC, BIC, GCV) along a stored Gaussian fit.
    Risk(RiskArgs),
    /// Predict new rows from a stored fit.
    Predict(PredictArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Design matrix: dense CSV with a header row, or a MatrixMarket
    /// coordinate file (detected by its %%MatrixMarket banner).
    #[arg(long, value_name = "FILE")]
    pub design: PathBuf,

    /// Response: single-column CSV (a non-numeric first line is a header).
    #[arg(long, value_name = "FILE")]
    pub response: PathBuf,

    /// Group map: a file with one group id per feature (contiguous blocks),
    /// or "size:K" for equal consecutive blocks of K features.
    #[arg(long, value_name = "FILE|size:K")]
    pub groups: String,

    /// Mixing weight in [0, 1]: 1 = pure lasso, 0 = pure group lasso.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,

    /// Number of automatically spaced penalty levels.
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,

    /// Smallest lambda as a fraction of lambda_max (default: 1e-2 when the
    /// design has more columns than rows, 1e-4 otherwise).
    #[arg(long, value_name = "RATIO")]
    pub lambda_min_ratio: Option<f64>,

    /// Explicit penalty levels, one per line; overrides --nlambda and
    /// --lambda-min-ratio. Values are sorted into decreasing order.
    #[arg(long, value_name = "FILE")]
    pub lambda_file: Option<PathBuf>,

    /// Loss family. Binomial responses must hold exactly two distinct values.
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,

    /// Convergence tolerance on the relative coefficient change per sweep.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Work budget per penalty level, counted in coordinate-block visits;
    /// levels that exhaust it are reported as not converged.
    #[arg(long, value_name = "N")]
    pub max_block_visits: Option<usize>,

    /// Fit without an intercept.
    #[arg(long)]
    pub no_intercept: bool,

    /// Scale columns to unit variance before fitting (reported coefficients
    /// are returned on the original scale).
    #[arg(long)]
    pub standardize: bool,

    /// Per-group penalty multipliers, one per line (default: sqrt of the
    /// group size).
    #[arg(long, value_name = "FILE")]
    pub group_weights: Option<PathBuf>,

    /// Per-feature multipliers on the L1 penalty term, one per line
    /// (default: 1).
    #[arg(long, value_name = "FILE")]
    pub feature_weights: Option<PathBuf>,

    /// Per-feature box constraints as "lower,upper" lines; each interval
    /// must contain zero, and inf/-inf disable a side.
    #[arg(long, value_name = "FILE")]
    pub bounds_file: Option<PathBuf>,

    /// Exit with code 3 if any penalty level fails to converge.
    #[arg(long)]
    pub strict: bool,

    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub fit: FitArgs,

    /// Number of cross-validation folds (each fold needs at least one row).
    #[arg(long, default_value_t = 10)]
    pub nfolds: usize,

    /// Held-out loss (default: mse for gaussian, deviance for binomial).
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,

    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads for fold fitting (falls back to the SGL_PATH_JOBS
    /// environment variable, then to the available parallelism).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct RiskArgs {
    /// Directory previously written by `sgl fit` or `sgl cv`.
    #[arg(long, value_name = "DIR")]
    pub fit_dir: PathBuf,

    /// The design the fit was computed on.
    #[arg(long, value_name = "FILE")]
    pub design: PathBuf,

    /// Use the nonzero-coefficient count as the degrees of freedom instead
    /// of the exact trace formula.
    #[arg(long)]
    pub approx_df: bool,

    /// Output directory (default: the fit directory itself).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Directory previously written by `sgl fit` or `sgl cv`.
    #[arg(long, value_name = "DIR")]
    pub fit_dir: PathBuf,

    /// Design rows to predict (same column count as the stored fit).
    #[arg(long, value_name = "FILE")]
    pub design: PathBuf,

    /// Penalty levels to predict at: numbers, or lambda.min / lambda.1se
    /// (which read selection.json from --cv-dir or the fit directory).
    #[arg(long = "s", value_name = "S", value_delimiter = ',', required = true, num_args = 1..)]
    pub s: Vec<String>,

    /// Prediction scale.
    #[arg(long = "type", value_enum, default_value_t = PredictTypeArg::Link)]
    pub kind: PredictTypeArg,

    /// Directory holding selection.json when it is not in --fit-dir.
    #[arg(long, value_name = "DIR")]
    pub cv_dir: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
}

impl FamilyArg {
    pub fn to_family(self) -> Family {
        match self {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    /// Mean squared prediction error (gaussian).
    Mse,
    /// Mean absolute prediction error (gaussian).
    Mae,
    /// Twice the mean held-out negative log-likelihood (binomial).
    Deviance,
    /// Misclassification rate (binomial).
    Misclass,
}

impl LossArg {
    pub fn to_loss(self) -> CvLoss {
        match self {
            LossArg::Mse => CvLoss::SquaredError,
            LossArg::Mae => CvLoss::AbsoluteError,
            LossArg::Deviance => CvLoss::Deviance,
            LossArg::Misclass => CvLoss::Misclass,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum PredictTypeArg {
    /// The linear predictor.
    Link,
    /// The linear predictor (gaussian) or fitted probability (binomial).
    Response,
    /// The predicted class label (binomial only).
    Class,
}

impl PredictTypeArg {
    pub fn to_kind(self) -> PredictKind {
        match self {
            PredictTypeArg::Link => PredictKind::Link,
            PredictTypeArg::Response => PredictKind::Response,
            PredictTypeArg::Class => PredictKind::Class,
        }
    }
}
