//! Slow, structurally independent reference solver and derivative checks.
//!
//! The reference solver is a plain full-vector proximal-gradient method with
//! a single global step size, alternated with exact (or safeguarded Newton)
//! intercept updates. It shares only the proximal operator and objective
//! with the path solver; everything the fast solver does incrementally
//! (residual bookkeeping, per-group steps, screening, working sets) is
//! recomputed from scratch here each iteration, so agreement between the two
//! is meaningful evidence of correctness.

use crate::linalg::{DesignMatrix, LinalgError};
use crate::penalty::{
    self, group_prox_update, log1p_exp, sigmoid, PenaltyError, PenaltyParams,
};
use crate::solver::{Family, GroupStructure};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("reference solve: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Relative objective-change tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub intercept: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200_000,
            intercept: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefSolution {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One full proximal step: the group proximal operator applied to every
/// group of (beta - t grad).
pub fn prox_full(
    beta: &[f64],
    grad: &[f64],
    t: f64,
    params: &PenaltyParams,
    groups: &GroupStructure,
) -> Result<Vec<f64>, PenaltyError> {
    let mut out = vec![0.0; beta.len()];
    for g in 0..groups.n_groups() {
        let cols = groups.range(g);
        let block = group_prox_update(&beta[cols.clone()], &grad[cols.clone()], t, params, groups, g)?;
        out[cols].copy_from_slice(&block);
    }
    Ok(out)
}

/// Full-vector proximal gradient descent to (near) optimality. Warm starts
/// through `init` keep independent solution chains cheap along a path.
pub fn solve_reference(
    x: &DesignMatrix,
    y: &[f64],
    groups: &GroupStructure,
    params: &PenaltyParams,
    family: Family,
    init: Option<(Vec<f64>, f64)>,
    cfg: &OracleConfig,
) -> Result<RefSolution, OracleError> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(OracleError::BadInput(format!(
            "response length {} != {n} rows",
            y.len()
        )));
    }
    if groups.n_features() != p {
        return Err(OracleError::BadInput(format!(
            "group structure covers {} features, design has {p}",
            groups.n_features()
        )));
    }
    let nf = n as f64;

    // Global step from the largest eigenvalue of (1/n) X^T X, quartered
    // curvature for the logistic loss.
    let lip = x.block_lipschitz(0..p, 1.0 / nf, 1e-12, 100_000)?;
    let l = match family {
        Family::Gaussian => lip.value,
        Family::Binomial => lip.value / 4.0,
    };
    let t = 1.0 / l.max(1e-300);

    let (mut beta, mut b0) = init.unwrap_or((vec![0.0; p], 0.0));
    if beta.len() != p {
        return Err(OracleError::BadInput(format!(
            "warm start has {} coefficients, design has {p}",
            beta.len()
        )));
    }

    let objective = |beta: &[f64], b0: f64| -> Result<f64, OracleError> {
        Ok(penalty::objective(x, y, beta, b0, params, groups, family)?)
    };

    let mut f_prev = objective(&beta, b0)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut best = (beta.clone(), b0, f_prev);

    for it in 0..cfg.max_iter {
        iterations = it + 1;

        // Gradient of the smooth loss at (beta, b0), from scratch.
        let mut eta = x.matvec(&beta)?;
        for e in &mut eta {
            *e += b0;
        }
        let u: Vec<f64> = match family {
            Family::Gaussian => y.iter().zip(&eta).map(|(yi, ei)| yi - ei).collect(),
            Family::Binomial => y
                .iter()
                .zip(&eta)
                .map(|(&yi, &ei)| yi * sigmoid(-yi * ei))
                .collect(),
        };
        let mut grad = x.matvec_transpose(&u)?;
        for gj in &mut grad {
            *gj *= -1.0 / nf;
        }

        beta = prox_full(&beta, &grad, t, params, groups)?;

        if cfg.intercept {
            let mut eta = x.matvec(&beta)?;
            for e in &mut eta {
                *e += b0;
            }
            match family {
                Family::Gaussian => {
                    let mu = y
                        .iter()
                        .zip(&eta)
                        .map(|(yi, ei)| yi - ei)
                        .sum::<f64>()
                        / nf;
                    b0 += mu;
                }
                Family::Binomial => {
                    let mut g = 0.0;
                    let mut h = 0.0;
                    for (&yi, &ei) in y.iter().zip(&eta) {
                        let p1 = sigmoid(ei);
                        g += -yi * sigmoid(-yi * ei);
                        h += p1 * (1.0 - p1);
                    }
                    g /= nf;
                    h = (h / nf).max(1e-12);
                    if g != 0.0 {
                        let mut delta = (-g / h).clamp(-10.0, 10.0);
                        let loss_at = |shift: f64| -> f64 {
                            y.iter()
                                .zip(&eta)
                                .map(|(&yi, &ei)| log1p_exp(-yi * (ei + shift)))
                                .sum::<f64>()
                        };
                        let base = loss_at(0.0);
                        let mut halvings = 0;
                        while loss_at(delta) > base && halvings < 60 {
                            delta *= 0.5;
                            halvings += 1;
                        }
                        if halvings < 60 {
                            b0 += delta;
                        }
                    }
                }
            }
        }

        let f = objective(&beta, b0)?;
        if f < best.2 {
            best = (beta.clone(), b0, f);
        }
        if (f_prev - f).abs() <= cfg.tol * f_prev.abs().max(1.0) {
            converged = true;
            f_prev = f;
            break;
        }
        f_prev = f;
    }

    if converged {
        Ok(RefSolution {
            beta,
            intercept: b0,
            objective: f_prev,
            iterations,
            converged,
        })
    } else {
        // Out of budget: hand back the best iterate seen, flagged.
        Ok(RefSolution {
            beta: best.0,
            intercept: best.1,
            objective: best.2,
            iterations,
            converged,
        })
    }
}

/// Central-difference gradient of `f` at `at`.
pub fn finite_diff_gradient<F>(f: F, at: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = vec![0.0; at.len()];
    let mut probe = at.to_vec();
    for j in 0..at.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = f(&probe);
        probe[j] = orig - h;
        let down = f(&probe);
        probe[j] = orig;
        grad[j] = (up - down) / (2.0 * h);
    }
    grad
}
