//! Seeded K-fold cross-validation over a frozen penalty grid, with held-out
//! loss aggregation and the two standard selections: the loss-minimizing
//! level and the most-penalized level within one standard error of it.
//!
//! The grid comes from one full-data fit so every fold solves the same
//! sequence; folds differ at most by one observation in size and are
//! assigned by a seeded shuffle, so results are reproducible for a given
//! seed regardless of thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{DesignMatrix, LinalgError};
use crate::model::SolutionPath;
use crate::penalty::log1p_exp;
use crate::solver::{fit_path, Family, FitConfig, GroupStructure, SolverError};

#[derive(Debug, Error)]
pub enum CvError {
    #[error("folds: {0}")]
    BadFolds(String),
    #[error("training data for fold {fold} contains a single class; use fewer folds")]
    SingleClassTrainingFold { fold: usize },
    #[error("loss {loss:?} is not defined for {family:?} fits")]
    LossFamilyMismatch { loss: CvLoss, family: Family },
    #[error("no penalty level was fitted successfully in any fold")]
    NoUsableLambda,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Held-out loss to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvLoss {
    /// Mean squared prediction error (Gaussian).
    SquaredError,
    /// Mean absolute prediction error (Gaussian).
    AbsoluteError,
    /// Twice the mean held-out negative log-likelihood (Binomial).
    Deviance,
    /// Misclassification rate (Binomial).
    Misclass,
}

impl CvLoss {
    fn default_for(family: Family) -> CvLoss {
        match family {
            Family::Gaussian => CvLoss::SquaredError,
            Family::Binomial => CvLoss::Deviance,
        }
    }

    fn valid_for(self, family: Family) -> bool {
        matches!(
            (self, family),
            (CvLoss::SquaredError, Family::Gaussian)
                | (CvLoss::AbsoluteError, Family::Gaussian)
                | (CvLoss::Deviance, Family::Binomial)
                | (CvLoss::Misclass, Family::Binomial)
        )
    }
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub n_folds: usize,
    /// Held-out loss; `None` picks the family default (squared error /
    /// deviance).
    pub loss: Option<CvLoss>,
    pub seed: u64,
    /// Worker threads for the fold fits; `None` uses the ambient pool.
    /// Results are identical either way.
    pub jobs: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            n_folds: 10,
            loss: None,
            seed: 42,
            jobs: None,
        }
    }
}

/// Aggregated cross-validation results.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean held-out loss per level (NaN when no fold contributed).
    pub mean_loss: Vec<f64>,
    /// Standard error of the fold means (NaN with fewer than two folds).
    pub se_loss: Vec<f64>,
    pub n_folds_used: Vec<usize>,
    pub lambda_min: f64,
    pub lambda_min_index: usize,
    pub lambda_1se: f64,
    pub lambda_1se_index: usize,
    pub loss: CvLoss,
    /// Fold id per observation.
    pub fold_of: Vec<usize>,
    /// (fold, level) cells dropped because the fold's fit did not converge
    /// there.
    pub dropped: Vec<(usize, usize)>,
    /// The full-data fit whose grid the folds refitted.
    pub full_path: SolutionPath,
}

/// Fold id per observation: a seeded shuffle dealt round-robin, so sizes
/// differ by at most one.
pub fn make_folds(n_obs: usize, n_folds: usize, seed: u64) -> Result<Vec<usize>, CvError> {
    if n_folds < 2 {
        return Err(CvError::BadFolds(format!(
            "need at least 2 folds, got {n_folds}"
        )));
    }
    if n_folds > n_obs {
        return Err(CvError::BadFolds(format!(
            "{n_folds} folds for {n_obs} observations"
        )));
    }
    let mut order: Vec<usize> = (0..n_obs).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n_obs];
    for (pos, &obs) in order.iter().enumerate() {
        fold_of[obs] = pos % n_folds;
    }
    Ok(fold_of)
}

/// K-fold cross-validation of a path fit.
pub fn cross_validate(
    x: &DesignMatrix,
    y: &[f64],
    groups: &GroupStructure,
    config: &FitConfig,
    cv: &CvConfig,
) -> Result<CvResult, CvError> {
    let loss = cv.loss.unwrap_or(CvLoss::default_for(config.family));
    if !loss.valid_for(config.family) {
        return Err(CvError::LossFamilyMismatch {
            loss,
            family: config.family,
        });
    }

    // One full-data fit freezes the grid (and validates the inputs).
    let full_path = fit_path(x, y, groups, config)?;
    let grid = full_path.lambdas.clone();
    let fold_of = make_folds(x.n_rows(), cv.n_folds, cv.seed)?;

    let run_fold = |fold: usize| -> Result<Vec<Option<f64>>, CvError> {
        let train: Vec<usize> = (0..x.n_rows()).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..x.n_rows()).filter(|&i| fold_of[i] == fold).collect();
        fold_losses(x, y, groups, config, &grid, loss, fold, &train, &test)
    };
    let outcomes: Vec<Result<Vec<Option<f64>>, CvError>> = match cv.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CvError::ThreadPool(e.to_string()))?;
            pool.install(|| (0..cv.n_folds).into_par_iter().map(run_fold).collect())
        }
        None => (0..cv.n_folds).into_par_iter().map(run_fold).collect(),
    };
    let mut per_fold: Vec<Vec<Option<f64>>> = Vec::with_capacity(cv.n_folds);
    for outcome in outcomes {
        per_fold.push(outcome?);
    }

    // Aggregate over folds.
    let m_levels = grid.len();
    let mut mean_loss = vec![f64::NAN; m_levels];
    let mut se_loss = vec![f64::NAN; m_levels];
    let mut n_used = vec![0usize; m_levels];
    let mut dropped = Vec::new();
    for m in 0..m_levels {
        let mut vals = Vec::with_capacity(cv.n_folds);
        for (fold, losses) in per_fold.iter().enumerate() {
            match losses[m] {
                Some(v) => vals.push(v),
                None => dropped.push((fold, m)),
            }
        }
        n_used[m] = vals.len();
        if !vals.is_empty() {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            mean_loss[m] = mean;
            if vals.len() >= 2 {
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (vals.len() - 1) as f64;
                se_loss[m] = (var / vals.len() as f64).sqrt();
            }
        }
    }

    // Selection happens among the levels with the best fold support, so a
    // stray truncated fold cannot silently shrink the comparison set.
    let max_used = n_used.iter().copied().max().unwrap_or(0);
    if max_used == 0 {
        return Err(CvError::NoUsableLambda);
    }
    let mut min_index = None;
    for m in 0..m_levels {
        if n_used[m] != max_used {
            continue;
        }
        match min_index {
            // <= moves ties to later (smaller) levels.
            Some(best) => {
                if mean_loss[m] <= mean_loss[best] {
                    min_index = Some(m);
                }
            }
            None => min_index = Some(m),
        }
    }
    let min_index = min_index.expect("max_used > 0 implies an eligible level");
    let se_at_min = se_loss[min_index];
    let threshold = if se_at_min.is_finite() {
        mean_loss[min_index] + se_at_min
    } else {
        mean_loss[min_index]
    };
    let mut one_se_index = min_index;
    for m in 0..m_levels {
        // Largest eligible level whose mean is within one SE of the minimum.
        if n_used[m] == max_used && mean_loss[m] <= threshold {
            one_se_index = m;
            break;
        }
    }

    Ok(CvResult {
        lambda_min: grid[min_index],
        lambda_min_index: min_index,
        lambda_1se: grid[one_se_index],
        lambda_1se_index: one_se_index,
        lambdas: grid,
        mean_loss,
        se_loss,
        n_folds_used: n_used,
        loss,
        fold_of,
        dropped,
        full_path,
    })
}

#[allow(clippy::too_many_arguments)]
fn fold_losses(
    x: &DesignMatrix,
    y: &[f64],
    groups: &GroupStructure,
    config: &FitConfig,
    grid: &[f64],
    loss: CvLoss,
    fold: usize,
    train: &[usize],
    test: &[usize],
) -> Result<Vec<Option<f64>>, CvError> {
    let x_train = x.select_rows(train)?;
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    if config.family == Family::Binomial {
        let first = y_train[0];
        if y_train.iter().all(|&v| v == first) {
            return Err(CvError::SingleClassTrainingFold { fold });
        }
    }
    let mut fold_config = config.clone();
    fold_config.lambdas = Some(grid.to_vec());
    let fold_path = fit_path(&x_train, &y_train, groups, &fold_config)?;

    let x_test = x.select_rows(test)?;
    let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let n_test = y_test.len() as f64;

    let mut losses = vec![None; grid.len()];
    for (m, slot) in losses.iter_mut().enumerate() {
        if m >= fold_path.n_levels() || !fold_path.diagnostics[m].converged {
            continue; // dropped cell
        }
        let beta = fold_path.dense_coefficients(m);
        let mut eta = x_test.matvec(&beta)?;
        for e in &mut eta {
            *e += fold_path.intercepts[m];
        }
        let value = match loss {
            CvLoss::SquaredError => {
                y_test
                    .iter()
                    .zip(&eta)
                    .map(|(yi, ei)| (yi - ei) * (yi - ei))
                    .sum::<f64>()
                    / n_test
            }
            CvLoss::AbsoluteError => {
                y_test
                    .iter()
                    .zip(&eta)
                    .map(|(yi, ei)| (yi - ei).abs())
                    .sum::<f64>()
                    / n_test
            }
            CvLoss::Deviance => {
                let (_, pos) = fold_path
                    .class_levels
                    .expect("binomial fits always record class levels");
                2.0 * y_test
                    .iter()
                    .zip(&eta)
                    .map(|(&yi, &ei)| {
                        let sign = if yi == pos { 1.0 } else { -1.0 };
                        log1p_exp(-sign * ei)
                    })
                    .sum::<f64>()
                    / n_test
            }
            CvLoss::Misclass => {
                let (neg, pos) = fold_path
                    .class_levels
                    .expect("binomial fits always record class levels");
                y_test
                    .iter()
                    .zip(&eta)
                    .filter(|(&yi, &ei)| {
                        let pred = if ei >= 0.0 { pos } else { neg };
                        pred != yi
                    })
                    .count() as f64
                    / n_test
            }
        };
        *slot = Some(value);
    }
    Ok(losses)
}
