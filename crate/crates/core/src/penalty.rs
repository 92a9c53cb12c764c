//! Penalized-objective kernels: coordinatewise soft thresholding, the
//! closed-form groupwise proximal update, thresholded subgradient norms (the
//! shared primitive behind optimality checks and screening), and full
//! objective evaluation for both families.
//!
//! The penalty with mixing weight `alpha` and level `lambda` is
//!
//! ```text
//! (1 - alpha) * lambda * sum_g sqrt(w_g) * ||beta_g||_2
//!     + alpha * lambda * sum_j omega_j * |beta_j|
//! ```
//!
//! so `alpha = 1` is the lasso and `alpha = 0` the group lasso.

use thiserror::Error;

use crate::linalg::{DesignMatrix, LinalgError};
use crate::solver::{Family, GroupStructure};

#[derive(Debug, Error)]
pub enum PenaltyError {
    #[error("{op}: expected length {expected}, got {got}")]
    LengthMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("soft_threshold: threshold {value} at position {index} is negative")]
    NegativeThreshold { index: usize, value: f64 },
    #[error("{op}: non-finite input at position {index}")]
    NonFiniteInput { op: &'static str, index: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("lambda must be non-negative and finite, got {0}")]
    BadLambda(f64),
    #[error("group weight {value} for group {group} must be strictly positive and finite")]
    BadGroupWeight { group: usize, value: f64 },
    #[error("feature weight {value} for feature {feature} must be non-negative and finite")]
    BadFeatureWeight { feature: usize, value: f64 },
    #[error("bounds for feature {feature} must satisfy lower <= 0 <= upper, got [{lower}, {upper}]")]
    BadBounds {
        feature: usize,
        lower: f64,
        upper: f64,
    },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("binomial objective requires labels in {{-1, +1}}, found {0}")]
    BadBinomialLabel(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Mixing weight, level, and per-group / per-feature weighting of the
/// penalty, plus box constraints on the coefficients.
#[derive(Debug, Clone)]
pub struct PenaltyParams {
    /// L1 mixing weight in [0, 1]: 1 = pure lasso, 0 = pure group lasso.
    pub alpha: f64,
    /// Penalty level; varies along the regularization path.
    pub lambda: f64,
    /// One multiplier per group, applied to that group's L2 norm. Defaults
    /// elsewhere to sqrt(group size). Strictly positive.
    pub group_weights: Vec<f64>,
    /// One multiplier per feature on the L1 term. Zero is legal and leaves
    /// that coordinate unpenalized by the L1 part.
    pub feature_weights: Vec<f64>,
    /// Per-feature box constraints containing zero; +-infinity disables a side.
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
}

impl PenaltyParams {
    pub fn new(
        alpha: f64,
        lambda: f64,
        group_weights: Vec<f64>,
        feature_weights: Vec<f64>,
        lower_bounds: Vec<f64>,
        upper_bounds: Vec<f64>,
    ) -> Result<Self, PenaltyError> {
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(PenaltyError::BadAlpha(alpha));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(PenaltyError::BadLambda(lambda));
        }
        for (g, &w) in group_weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(PenaltyError::BadGroupWeight { group: g, value: w });
            }
        }
        for (j, &w) in feature_weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(PenaltyError::BadFeatureWeight {
                    feature: j,
                    value: w,
                });
            }
        }
        if lower_bounds.len() != feature_weights.len() || upper_bounds.len() != feature_weights.len()
        {
            return Err(PenaltyError::LengthMismatch {
                op: "PenaltyParams::new bounds",
                expected: feature_weights.len(),
                got: lower_bounds.len().min(upper_bounds.len()),
            });
        }
        for j in 0..lower_bounds.len() {
            let (lo, hi) = (lower_bounds[j], upper_bounds[j]);
            if lo.is_nan() || hi.is_nan() || lo > 0.0 || hi < 0.0 {
                return Err(PenaltyError::BadBounds {
                    feature: j,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self {
            alpha,
            lambda,
            group_weights,
            feature_weights,
            lower_bounds,
            upper_bounds,
        })
    }

    /// Same weights and bounds at a different penalty level.
    pub fn at_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }
}

/// Coordinatewise soft threshold: `sign(v_j) * max(|v_j| - b_j, 0)`.
pub fn soft_threshold(v: &[f64], b: &[f64]) -> Result<Vec<f64>, PenaltyError> {
    if v.len() != b.len() {
        return Err(PenaltyError::LengthMismatch {
            op: "soft_threshold",
            expected: v.len(),
            got: b.len(),
        });
    }
    if let Some(index) = b.iter().position(|t| *t < 0.0) {
        return Err(PenaltyError::NegativeThreshold {
            index,
            value: b[index],
        });
    }
    Ok(v.iter()
        .zip(b)
        .map(|(&x, &t)| soft_threshold_scalar(x, t))
        .collect())
}

#[inline]
pub(crate) fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    let mag = x.abs() - t;
    if mag > 0.0 {
        mag * x.signum()
    } else {
        0.0
    }
}

/// Exact minimizer of the step-`t` majorized objective for one group:
/// soft-threshold the gradient step, shrink the surviving vector toward zero
/// by the group penalty, and project into the per-coordinate box. Returns the
/// zero vector whenever thresholding kills the whole group.
pub fn group_prox_update(
    beta0: &[f64],
    grad: &[f64],
    t: f64,
    params: &PenaltyParams,
    groups: &GroupStructure,
    g: usize,
) -> Result<Vec<f64>, PenaltyError> {
    let cols = groups.range(g);
    let d = cols.len();
    if beta0.len() != d {
        return Err(PenaltyError::LengthMismatch {
            op: "group_prox_update beta0",
            expected: d,
            got: beta0.len(),
        });
    }
    if grad.len() != d {
        return Err(PenaltyError::LengthMismatch {
            op: "group_prox_update grad",
            expected: d,
            got: grad.len(),
        });
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(PenaltyError::BadStep(t));
    }
    if let Some(index) = beta0.iter().position(|x| !x.is_finite()) {
        return Err(PenaltyError::NonFiniteInput {
            op: "group_prox_update beta0",
            index,
        });
    }
    if let Some(index) = grad.iter().position(|x| !x.is_finite()) {
        return Err(PenaltyError::NonFiniteInput {
            op: "group_prox_update grad",
            index,
        });
    }

    let omega = &params.feature_weights[cols.clone()];
    let lower = &params.lower_bounds[cols.clone()];
    let upper = &params.upper_bounds[cols.clone()];
    let l1_scale = t * params.alpha * params.lambda;

    let mut z = vec![0.0; d];
    let mut norm_sq = 0.0;
    for j in 0..d {
        let zj = soft_threshold_scalar(beta0[j] - t * grad[j], l1_scale * omega[j]);
        norm_sq += zj * zj;
        z[j] = zj;
    }
    let norm = norm_sq.sqrt();
    if norm == 0.0 {
        return Ok(z); // already all zeros
    }
    let shrink = 1.0 - t * (1.0 - params.alpha) * params.lambda * params.group_weights[g] / norm;
    if shrink <= 0.0 {
        for zj in &mut z {
            *zj = 0.0;
        }
        return Ok(z);
    }
    for j in 0..d {
        z[j] = (z[j] * shrink).clamp(lower[j], upper[j]);
    }
    Ok(z)
}

/// `||soft_threshold(grad_g, thresh_scale * alpha * omega_g)||_2` — the
/// quantity compared against the group-penalty budget in both the optimality
/// test and the screening rule.
pub fn group_subgrad_norm(grad_g: &[f64], alpha: f64, thresh_scale: f64, omega_g: &[f64]) -> f64 {
    debug_assert_eq!(grad_g.len(), omega_g.len());
    let mut acc = 0.0;
    for (&gj, &wj) in grad_g.iter().zip(omega_g) {
        let s = soft_threshold_scalar(gj, thresh_scale * alpha * wj);
        acc += s * s;
    }
    acc.sqrt()
}

/// The penalty term alone at `beta`.
pub fn penalty_value(beta: &[f64], params: &PenaltyParams, groups: &GroupStructure) -> f64 {
    let mut group_part = 0.0;
    for g in 0..groups.n_groups() {
        let cols = groups.range(g);
        let norm = beta[cols].iter().map(|b| b * b).sum::<f64>().sqrt();
        group_part += params.group_weights[g] * norm;
    }
    let l1_part: f64 = beta
        .iter()
        .zip(&params.feature_weights)
        .map(|(b, w)| w * b.abs())
        .sum();
    (1.0 - params.alpha) * params.lambda * group_part + params.alpha * params.lambda * l1_part
}

/// Full penalized objective at (`beta`, `intercept`).
///
/// Gaussian: `(1/2n)||y - X beta - intercept||^2` plus the penalty.
/// Binomial (labels +-1): `(1/n) sum log(1 + exp(-y_i eta_i))` plus the
/// penalty, where `eta = X beta + intercept`.
pub fn objective(
    x: &DesignMatrix,
    y: &[f64],
    beta: &[f64],
    intercept: f64,
    params: &PenaltyParams,
    groups: &GroupStructure,
    family: Family,
) -> Result<f64, PenaltyError> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(PenaltyError::LengthMismatch {
            op: "objective y",
            expected: n,
            got: y.len(),
        });
    }
    if beta.len() != x.n_cols() {
        return Err(PenaltyError::LengthMismatch {
            op: "objective beta",
            expected: x.n_cols(),
            got: beta.len(),
        });
    }
    let xb = x.matvec(beta)?;
    let loss = match family {
        Family::Gaussian => {
            let mut acc = 0.0;
            for i in 0..n {
                let r = y[i] - xb[i] - intercept;
                acc += r * r;
            }
            acc / (2.0 * n as f64)
        }
        Family::Binomial => {
            let mut acc = 0.0;
            for i in 0..n {
                if y[i] != 1.0 && y[i] != -1.0 {
                    return Err(PenaltyError::BadBinomialLabel(y[i]));
                }
                acc += log1p_exp(-y[i] * (xb[i] + intercept));
            }
            acc / n as f64
        }
    };
    Ok(loss + penalty_value(beta, params, groups))
}

/// Numerically stable `log(1 + exp(x))`.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function `1 / (1 + exp(-x))`.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseColumnMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn one_group_params(alpha: f64, lambda: f64, d: usize) -> (PenaltyParams, GroupStructure) {
        let params = PenaltyParams::new(
            alpha,
            lambda,
            vec![1.0],
            vec![1.0; d],
            vec![f64::NEG_INFINITY; d],
            vec![f64::INFINITY; d],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&vec![0; d]).unwrap();
        (params, groups)
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        assert_eq!(
            soft_threshold(&[3.0, -1.0, 0.5], &[1.0, 1.0, 1.0]).unwrap(),
            vec![2.0, 0.0, 0.0]
        );
        let v = [1.25, -2.5, 0.0];
        assert_eq!(soft_threshold(&v, &[0.0; 3]).unwrap(), v.to_vec());
        assert_eq!(soft_threshold(&[-2.5], &[2.5]).unwrap(), vec![0.0]);
        assert!(soft_threshold(&[1.0], &[-0.1]).is_err());
        assert!(soft_threshold(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn prox_fixed_point_at_zero() {
        let (params, groups) = one_group_params(0.5, 0.2, 2);
        let out = group_prox_update(&[0.0, 0.0], &[0.0, 0.0], 1.0, &params, &groups, 0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    /// Brute-force minimizer of the majorized objective
    /// (1/2t)||b - (beta0 - t grad)||^2 + penalty(b) by two-stage grid search.
    fn grid_minimize_majorizer(
        beta0: &[f64],
        grad: &[f64],
        t: f64,
        params: &PenaltyParams,
        groups: &GroupStructure,
    ) -> Vec<f64> {
        let target: Vec<f64> = beta0.iter().zip(grad).map(|(b, g)| b - t * g).collect();
        let m = |b: &[f64]| -> f64 {
            let quad: f64 = b
                .iter()
                .zip(&target)
                .map(|(bi, ti)| (bi - ti) * (bi - ti))
                .sum();
            quad / (2.0 * t) + penalty_value(b, params, groups)
        };
        assert_eq!(beta0.len(), 2, "grid oracle is 2-D only");
        let mut best = vec![0.0, 0.0];
        let mut best_val = m(&best);
        let mut center = best.clone();
        let mut half_width = 1.5;
        for _stage in 0..4 {
            let steps = 60;
            for a in 0..=steps {
                for b in 0..=steps {
                    let cand = [
                        center[0] - half_width + 2.0 * half_width * a as f64 / steps as f64,
                        center[1] - half_width + 2.0 * half_width * b as f64 / steps as f64,
                    ];
                    let v = m(&cand);
                    if v < best_val {
                        best_val = v;
                        best = cand.to_vec();
                    }
                }
            }
            center = best.clone();
            half_width /= steps as f64 / 4.0;
        }
        best
    }

    #[test]
    fn prox_matches_grid_minimizer_of_majorizer() {
        let (params, groups) = one_group_params(0.5, 0.2, 2);
        let beta0 = [1.0, 0.0];
        let grad = [0.0, 0.0];
        let out = group_prox_update(&beta0, &grad, 1.0, &params, &groups, 0).unwrap();
        // Closed form: z = S((1,0), 0.1) = (0.9, 0), shrink = 1 - 0.1/0.9.
        assert!((out[0] - 0.8).abs() < 1e-12, "got {}", out[0]);
        assert_eq!(out[1], 0.0);
        let oracle = grid_minimize_majorizer(&beta0, &grad, 1.0, &params, &groups);
        assert!((oracle[0] - out[0]).abs() < 1e-4);
        assert!((oracle[1] - out[1]).abs() < 1e-4);
    }

    #[test]
    fn prox_matches_grid_minimizer_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let alpha = rng.random::<f64>();
            let lambda = rng.random::<f64>() * 0.8;
            let (params, groups) = one_group_params(alpha, lambda, 2);
            let beta0 = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let grad = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let t = 0.3 + rng.random::<f64>();
            let out = group_prox_update(&beta0, &grad, t, &params, &groups, 0).unwrap();
            let oracle = grid_minimize_majorizer(&beta0, &grad, t, &params, &groups);
            for (a, b) in out.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-3, "prox {a} vs grid {b}");
            }
        }
    }

    #[test]
    fn prox_kills_group_when_lambda_dominates() {
        let (params, groups) = one_group_params(0.3, 50.0, 2);
        let out = group_prox_update(&[1.0, -2.0], &[0.1, 0.2], 0.5, &params, &groups, 0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn prox_alpha_one_is_coordinatewise_soft_threshold() {
        let (params, groups) = one_group_params(1.0, 0.4, 2);
        let beta0 = [0.9, -0.1];
        let grad = [-0.2, 0.3];
        let t = 0.7;
        let out = group_prox_update(&beta0, &grad, t, &params, &groups, 0).unwrap();
        for j in 0..2 {
            let expect = soft_threshold_scalar(beta0[j] - t * grad[j], t * 0.4);
            assert!((out[j] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn prox_alpha_zero_is_group_shrinkage() {
        let (params, groups) = one_group_params(0.0, 0.4, 2);
        let beta0 = [0.9, -0.1];
        let grad = [-0.2, 0.3];
        let t = 0.7;
        let out = group_prox_update(&beta0, &grad, t, &params, &groups, 0).unwrap();
        let step: Vec<f64> = beta0.iter().zip(&grad).map(|(b, g)| b - t * g).collect();
        let norm = step.iter().map(|x| x * x).sum::<f64>().sqrt();
        let shrink = (1.0 - t * 0.4 / norm).max(0.0);
        for j in 0..2 {
            assert!((out[j] - shrink * step[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn prox_respects_bounds() {
        let params = PenaltyParams::new(
            0.5,
            0.2,
            vec![1.0],
            vec![1.0; 2],
            vec![-0.5; 2],
            vec![0.5; 2],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0]).unwrap();
        let out = group_prox_update(&[1.0, 0.0], &[0.0, 0.0], 1.0, &params, &groups, 0).unwrap();
        assert_eq!(out[0], 0.5); // unconstrained answer 0.8 clamps to the box
        assert_eq!(out[1], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let beta0 = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            let grad = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let out = group_prox_update(&beta0, &grad, 1.0, &params, &groups, 0).unwrap();
            for &b in &out {
                assert!((-0.5..=0.5).contains(&b));
            }
        }
    }

    #[test]
    fn prox_rejects_bad_inputs() {
        let (params, groups) = one_group_params(0.5, 0.2, 2);
        assert!(matches!(
            group_prox_update(&[f64::NAN, 0.0], &[0.0, 0.0], 1.0, &params, &groups, 0),
            Err(PenaltyError::NonFiniteInput { .. })
        ));
        assert!(matches!(
            group_prox_update(&[0.0, 0.0], &[0.0, 0.0], 0.0, &params, &groups, 0),
            Err(PenaltyError::BadStep(_))
        ));
        assert!(matches!(
            group_prox_update(&[0.0], &[0.0, 0.0], 1.0, &params, &groups, 0),
            Err(PenaltyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn prox_never_increases_majorizer() {
        // The update minimizes the majorized objective, so its value there can
        // never exceed the value at the expansion point beta0.
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..200 {
            let d = 2 + (rng.random::<u32>() % 4) as usize;
            let alpha = rng.random::<f64>();
            let lambda = rng.random::<f64>();
            let params = PenaltyParams::new(
                alpha,
                lambda,
                vec![(d as f64).sqrt()],
                (0..d).map(|_| rng.random::<f64>() * 2.0).collect(),
                vec![f64::NEG_INFINITY; d],
                vec![f64::INFINITY; d],
            )
            .unwrap();
            let groups = GroupStructure::from_ids(&vec![0; d]).unwrap();
            let beta0: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let grad: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let t = 0.1 + rng.random::<f64>();
            let out = group_prox_update(&beta0, &grad, t, &params, &groups, 0).unwrap();

            let target: Vec<f64> = beta0.iter().zip(&grad).map(|(b, g)| b - t * g).collect();
            let m = |b: &[f64]| -> f64 {
                let quad: f64 = b
                    .iter()
                    .zip(&target)
                    .map(|(bi, ti)| (bi - ti) * (bi - ti))
                    .sum();
                quad / (2.0 * t) + penalty_value(b, &params, &groups)
            };
            assert!(m(&out) <= m(&beta0) + 1e-12);
        }
    }

    #[test]
    fn subgrad_norm_cases() {
        assert_eq!(group_subgrad_norm(&[0.0, 0.0], 0.5, 1.0, &[1.0, 1.0]), 0.0);
        assert_eq!(group_subgrad_norm(&[2.0, -2.0], 1.0, 2.0, &[1.0, 1.0]), 0.0);
        assert!((group_subgrad_norm(&[3.0, 4.0], 0.0, 7.5, &[1.0, 1.0]) - 5.0).abs() < 1e-15);
    }

    fn small_design() -> DesignMatrix {
        DesignMatrix::Sparse(
            SparseColumnMatrix::from_triplets(
                4,
                4,
                &[
                    (0, 0, 1.0),
                    (1, 0, -0.5),
                    (2, 1, 2.0),
                    (3, 1, 0.25),
                    (0, 2, -1.0),
                    (3, 2, 1.5),
                    (1, 3, 0.75),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn objective_at_zero_is_pure_loss() {
        let x = small_design();
        let y = [1.0, -1.0, 2.0, 0.5];
        let params = PenaltyParams::new(
            0.5,
            0.3,
            vec![2.0_f64.sqrt(); 2],
            vec![1.0; 4],
            vec![f64::NEG_INFINITY; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0, 1, 1]).unwrap();
        let val = objective(&x, &y, &[0.0; 4], 0.0, &params, &groups, Family::Gaussian).unwrap();
        let expect = y.iter().map(|v| v * v).sum::<f64>() / 8.0;
        assert!((val - expect).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_direct_formula() {
        let x = small_design();
        let y = [1.0, -1.0, 2.0, 0.5];
        let beta: [f64; 4] = [0.3, -0.2, 0.1, 0.4];
        let intercept = 0.25;
        let alpha = 0.4;
        let lambda = 0.7;
        let omega = [1.0, 0.5, 2.0, 1.5];
        let sqw = [2.0_f64.sqrt(), 2.0_f64.sqrt()];
        let params = PenaltyParams::new(
            alpha,
            lambda,
            sqw.to_vec(),
            omega.to_vec(),
            vec![f64::NEG_INFINITY; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0, 1, 1]).unwrap();

        // Independent evaluation written directly from the formula, using an
        // explicit dense copy and scalar loops.
        let dense = [
            [1.0, 0.0, -1.0, 0.0],
            [-0.5, 0.0, 0.0, 0.75],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.25, 1.5, 0.0],
        ];
        let mut loss = 0.0;
        for i in 0..4 {
            let mut eta = intercept;
            for j in 0..4 {
                eta += dense[i][j] * beta[j];
            }
            loss += (y[i] - eta) * (y[i] - eta);
        }
        loss /= 8.0;
        let g1 = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
        let g2 = (beta[2] * beta[2] + beta[3] * beta[3]).sqrt();
        let mut expect = loss + (1.0 - alpha) * lambda * (sqw[0] * g1 + sqw[1] * g2);
        for j in 0..4 {
            expect += alpha * lambda * omega[j] * beta[j].abs();
        }

        let val = objective(&x, &y, &beta, intercept, &params, &groups, Family::Gaussian).unwrap();
        assert!((val - expect).abs() < 1e-14);
    }

    #[test]
    fn objective_lambda_zero_is_unpenalized_loss() {
        let x = small_design();
        let y = [1.0, -1.0, 2.0, 0.5];
        let beta = [0.3, -0.2, 0.1, 0.4];
        let params = PenaltyParams::new(
            0.4,
            0.0,
            vec![1.0; 2],
            vec![1.0; 4],
            vec![f64::NEG_INFINITY; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0, 1, 1]).unwrap();
        let val = objective(&x, &y, &beta, 0.0, &params, &groups, Family::Gaussian).unwrap();
        let xb = x.matvec(&beta).unwrap();
        let loss = y
            .iter()
            .zip(&xb)
            .map(|(yi, xi)| (yi - xi) * (yi - xi))
            .sum::<f64>()
            / 8.0;
        assert!((val - loss).abs() < 1e-15);
    }

    #[test]
    fn binomial_objective_matches_direct_formula() {
        let x = small_design();
        let y = [1.0, -1.0, 1.0, -1.0];
        let beta = [0.3, -0.2, 0.1, 0.4];
        let intercept = -0.1;
        let params = PenaltyParams::new(
            0.4,
            0.7,
            vec![2.0_f64.sqrt(); 2],
            vec![1.0; 4],
            vec![f64::NEG_INFINITY; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0, 1, 1]).unwrap();
        let xb = x.matvec(&beta).unwrap();
        let mut loss = 0.0;
        for i in 0..4 {
            loss += (1.0 + (-y[i] * (xb[i] + intercept)).exp()).ln();
        }
        loss /= 4.0;
        let expect = loss + penalty_value(&beta, &params, &groups);
        let val = objective(&x, &y, &beta, intercept, &params, &groups, Family::Binomial).unwrap();
        assert!((val - expect).abs() < 1e-14);

        let bad = objective(&x, &[1.0, 0.0, 1.0, -1.0], &beta, 0.0, &params, &groups, Family::Binomial);
        assert!(matches!(bad, Err(PenaltyError::BadBinomialLabel(_))));
    }

    #[test]
    fn objective_is_convex_along_segments() {
        let x = small_design();
        let y = [1.0, -1.0, 2.0, 0.5];
        let params = PenaltyParams::new(
            0.6,
            0.5,
            vec![2.0_f64.sqrt(); 2],
            vec![1.0; 4],
            vec![f64::NEG_INFINITY; 4],
            vec![f64::INFINITY; 4],
        )
        .unwrap();
        let groups = GroupStructure::from_ids(&[0, 0, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let b1: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let b2: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let theta = rng.random::<f64>();
            let mix: Vec<f64> = b1
                .iter()
                .zip(&b2)
                .map(|(a, b)| theta * a + (1.0 - theta) * b)
                .collect();
            let f = |b: &[f64]| {
                objective(&x, &y, b, 0.0, &params, &groups, Family::Gaussian).unwrap()
            };
            assert!(f(&mix) <= theta * f(&b1) + (1.0 - theta) * f(&b2) + 1e-12);
        }
    }

    #[test]
    fn params_validation_rejects_bad_values() {
        let inf = f64::INFINITY;
        assert!(PenaltyParams::new(1.5, 0.1, vec![1.0], vec![1.0], vec![-inf], vec![inf]).is_err());
        assert!(PenaltyParams::new(0.5, -0.1, vec![1.0], vec![1.0], vec![-inf], vec![inf]).is_err());
        assert!(PenaltyParams::new(0.5, 0.1, vec![0.0], vec![1.0], vec![-inf], vec![inf]).is_err());
        assert!(PenaltyParams::new(0.5, 0.1, vec![1.0], vec![-1.0], vec![-inf], vec![inf]).is_err());
        assert!(PenaltyParams::new(0.5, 0.1, vec![1.0], vec![1.0], vec![0.5], vec![inf]).is_err());
        assert!(PenaltyParams::new(0.5, 0.1, vec![1.0], vec![1.0], vec![-inf], vec![-0.5]).is_err());
    }

    #[test]
    fn stable_logistic_helpers() {
        assert!((log1p_exp(0.0) - 2.0_f64.ln()).abs() < 1e-15);
        assert!((log1p_exp(700.0) - 700.0).abs() < 1e-9);
        assert!(log1p_exp(-700.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(40.0) <= 1.0 && sigmoid(40.0) > 0.999999);
        assert!(sigmoid(-40.0) >= 0.0 && sigmoid(-40.0) < 1e-6);
    }
}
