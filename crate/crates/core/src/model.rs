//! Fitted-path container and consumers: coefficient interpolation at
//! off-grid penalty levels, prediction on new data, and the path summary
//! table.

use thiserror::Error;

use crate::linalg::{DesignMatrix, LinalgError};
use crate::penalty::sigmoid;
use crate::solver::{Family, GroupStructure};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("the path holds no solutions")]
    EmptyPath,
    #[error("design has {got} columns but the path was fitted with {expected} features")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class predictions are only defined for binomial fits")]
    ClassForGaussian,
    #[error("requested lambda must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-level solve diagnostics.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    pub block_visits: usize,
    /// Rounds of fit-then-recheck at this level.
    pub kkt_passes: usize,
    /// Screened-set size after this level.
    pub n_strong: usize,
    /// Working-set size after this level.
    pub n_active_set: usize,
    /// Max coefficient change in the final sweep.
    pub final_change: f64,
    /// Objective after each sweep, empty unless tracking was enabled.
    pub objective_trace: Vec<f64>,
}

/// A fitted regularization path. Coefficients are stored sparsely per level
/// as (feature, value) pairs sorted by feature, on the original column scale.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    /// Decreasing penalty levels actually fitted.
    pub lambdas: Vec<f64>,
    /// Smallest level at which the zero solution is optimal.
    pub lambda_max: f64,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<Vec<(usize, f64)>>,
    pub nnzero: Vec<usize>,
    pub n_active_groups: Vec<usize>,
    pub diagnostics: Vec<FitDiagnostics>,
    /// True when a level failed to converge and the remaining levels were
    /// dropped; the failed level is still recorded with its diagnostics.
    pub truncated: bool,
    pub family: Family,
    pub alpha: f64,
    pub groups: GroupStructure,
    pub group_weights: Vec<f64>,
    pub feature_weights: Vec<f64>,
    pub n_obs: usize,
    pub n_features: usize,
    pub intercept_enabled: bool,
    pub standardized: bool,
    /// Original binomial labels as (negative class, positive class).
    pub class_levels: Option<(f64, f64)>,
}

/// Coefficients at a requested penalty level.
#[derive(Debug, Clone)]
pub struct CoefAt {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// True when the request fell outside the fitted range and was clamped
    /// to the nearest endpoint.
    pub clamped: bool,
}

/// What `predict` should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictKind {
    /// The linear predictor.
    Link,
    /// Fitted means: identity for Gaussian, inverse logit for Binomial.
    Response,
    /// Original class labels (Binomial only).
    Class,
}

/// Predictions plus the interpolation clamp flag.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub values: Vec<f64>,
    pub clamped: bool,
}

pub const QUANTILE_LABELS: [&str; 5] = ["Max.", "3rd Qu.", "Median", "1st Qu.", "Min."];

#[derive(Debug, Clone)]
pub struct SummaryRow {
    /// Position in the fitted sequence (0-based).
    pub index: usize,
    pub lambda: f64,
    pub nnzero: usize,
    pub active_groups: usize,
}

#[derive(Debug, Clone)]
pub struct QuantileRow {
    pub label: &'static str,
    pub row: SummaryRow,
}

/// Full per-level table plus the five-number quantile view over levels.
#[derive(Debug, Clone)]
pub struct PathSummary {
    pub rows: Vec<SummaryRow>,
    pub quantiles: Vec<QuantileRow>,
}

impl SolutionPath {
    pub fn n_levels(&self) -> usize {
        self.lambdas.len()
    }

    /// Rebuilds the dense coefficient vector at stored level `m`.
    pub fn dense_coefficients(&self, m: usize) -> Vec<f64> {
        let mut beta = vec![0.0; self.n_features];
        for &(j, v) in &self.coefficients[m] {
            beta[j] = v;
        }
        beta
    }

    /// Coefficients at an arbitrary level: stored values on exact grid hits,
    /// linear interpolation between neighbouring levels otherwise, clamped
    /// (with a flag) outside the fitted range.
    pub fn coef_at(&self, lambda: f64) -> Result<CoefAt, ModelError> {
        if self.lambdas.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ModelError::BadLambda(lambda));
        }
        let m_last = self.lambdas.len() - 1;
        if lambda >= self.lambdas[0] {
            return Ok(CoefAt {
                coefficients: self.dense_coefficients(0),
                intercept: self.intercepts[0],
                clamped: lambda != self.lambdas[0],
            });
        }
        if lambda <= self.lambdas[m_last] {
            return Ok(CoefAt {
                coefficients: self.dense_coefficients(m_last),
                intercept: self.intercepts[m_last],
                clamped: lambda != self.lambdas[m_last],
            });
        }
        // Strictly inside the (decreasing) grid: find k with
        // lambda_k >= lambda > lambda_{k+1}.
        let k = match self
            .lambdas
            .binary_search_by(|probe| lambda.partial_cmp(probe).unwrap())
        {
            Ok(exact) => {
                return Ok(CoefAt {
                    coefficients: self.dense_coefficients(exact),
                    intercept: self.intercepts[exact],
                    clamped: false,
                });
            }
            Err(insertion) => insertion - 1,
        };
        let (hi, lo) = (self.lambdas[k], self.lambdas[k + 1]);
        let theta = (lambda - lo) / (hi - lo);
        let mut beta = vec![0.0; self.n_features];
        for &(j, v) in &self.coefficients[k] {
            beta[j] += theta * v;
        }
        for &(j, v) in &self.coefficients[k + 1] {
            beta[j] += (1.0 - theta) * v;
        }
        let intercept = theta * self.intercepts[k] + (1.0 - theta) * self.intercepts[k + 1];
        Ok(CoefAt {
            coefficients: beta,
            intercept,
            clamped: false,
        })
    }

    /// Predictions on new rows at the requested penalty level.
    pub fn predict(
        &self,
        x: &DesignMatrix,
        lambda: f64,
        kind: PredictKind,
    ) -> Result<Prediction, ModelError> {
        if x.n_cols() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        if kind == PredictKind::Class && self.family != Family::Binomial {
            return Err(ModelError::ClassForGaussian);
        }
        let at = self.coef_at(lambda)?;
        let mut eta = x.matvec(&at.coefficients)?;
        for v in &mut eta {
            *v += at.intercept;
        }
        let values = match (kind, self.family) {
            (PredictKind::Link, _) | (PredictKind::Response, Family::Gaussian) => eta,
            (PredictKind::Response, Family::Binomial) => {
                eta.into_iter().map(sigmoid).collect()
            }
            (PredictKind::Class, _) => {
                let (neg, pos) = self.class_levels.unwrap_or((-1.0, 1.0));
                eta.into_iter()
                    .map(|e| if e >= 0.0 { pos } else { neg })
                    .collect()
            }
        };
        Ok(Prediction {
            values,
            clamped: at.clamped,
        })
    }

    /// Per-level table (counts recomputed from the stored coefficients) plus
    /// five quantile rows over the fitted levels.
    pub fn path_summary(&self) -> PathSummary {
        let rows: Vec<SummaryRow> = (0..self.lambdas.len())
            .map(|m| self.summary_row(m))
            .collect();
        let quantiles = if rows.is_empty() {
            Vec::new()
        } else {
            let m_last = rows.len() - 1;
            QUANTILE_LABELS
                .iter()
                .zip([0.0, 0.25, 0.5, 0.75, 1.0])
                .map(|(&label, q)| {
                    let idx = quantile_index(q, m_last);
                    QuantileRow {
                        label,
                        row: rows[idx].clone(),
                    }
                })
                .collect()
        };
        PathSummary { rows, quantiles }
    }

    fn summary_row(&self, m: usize) -> SummaryRow {
        let coefs = &self.coefficients[m];
        let nnzero = coefs.iter().filter(|&&(_, v)| v != 0.0).count();
        let mut groups_seen: Vec<usize> = coefs
            .iter()
            .filter(|&&(_, v)| v != 0.0)
            .map(|&(j, _)| self.groups.group_of(j))
            .collect();
        groups_seen.sort_unstable();
        groups_seen.dedup();
        SummaryRow {
            index: m,
            lambda: self.lambdas[m],
            nnzero,
            active_groups: groups_seen.len(),
        }
    }
}

/// Index of the q-quantile position among m_last+1 levels, rounding half
/// down so the canonical five-number rows land on the conventional indices.
fn quantile_index(q: f64, m_last: usize) -> usize {
    let pos = q * m_last as f64 - 0.5;
    (pos.ceil().max(0.0) as usize).min(m_last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn toy_path() -> SolutionPath {
        // Two features in one group plus one singleton; three levels.
        let groups = GroupStructure::from_ids(&[0, 0, 1]).unwrap();
        SolutionPath {
            lambdas: vec![1.0, 0.5, 0.25],
            lambda_max: 1.0,
            intercepts: vec![0.1, 0.2, 0.4],
            coefficients: vec![
                vec![],
                vec![(0, 1.0), (2, -2.0)],
                vec![(0, 2.0), (1, 0.5), (2, -4.0)],
            ],
            nnzero: vec![0, 2, 3],
            n_active_groups: vec![0, 2, 2],
            diagnostics: Vec::new(),
            truncated: false,
            family: Family::Gaussian,
            alpha: 0.5,
            groups,
            group_weights: vec![2f64.sqrt(), 1.0],
            feature_weights: vec![1.0; 3],
            n_obs: 4,
            n_features: 3,
            intercept_enabled: true,
            standardized: false,
            class_levels: None,
        }
    }

    #[test]
    fn exact_grid_hit_returns_stored_column() {
        let path = toy_path();
        let at = path.coef_at(0.5).unwrap();
        assert!(!at.clamped);
        assert_eq!(at.coefficients, vec![1.0, 0.0, -2.0]);
        assert_eq!(at.intercept, 0.2);
        let first = path.coef_at(1.0).unwrap();
        assert!(!first.clamped);
        assert_eq!(first.coefficients, vec![0.0; 3]);
        let last = path.coef_at(0.25).unwrap();
        assert!(!last.clamped);
        assert_eq!(last.coefficients, vec![2.0, 0.5, -4.0]);
    }

    #[test]
    fn interpolation_is_linear_in_lambda() {
        let path = toy_path();
        // Midway between 0.5 and 0.25: theta = 0.5.
        let at = path.coef_at(0.375).unwrap();
        assert!(!at.clamped);
        let expect = [0.5 * 1.0 + 0.5 * 2.0, 0.5 * 0.5, 0.5 * -2.0 + 0.5 * -4.0];
        for (got, want) in at.coefficients.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((at.intercept - 0.3).abs() < 1e-15);
        // Quarter of the way down from 1.0 to 0.5: theta = 0.5 at 0.75.
        let at = path.coef_at(0.75).unwrap();
        assert!((at.coefficients[0] - 0.5).abs() < 1e-15);
        assert!((at.coefficients[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_clamps_with_flag() {
        let path = toy_path();
        let above = path.coef_at(2.0).unwrap();
        assert!(above.clamped);
        assert_eq!(above.coefficients, vec![0.0; 3]);
        let below = path.coef_at(0.01).unwrap();
        assert!(below.clamped);
        assert_eq!(below.coefficients, vec![2.0, 0.5, -4.0]);
        assert!(path.coef_at(f64::NAN).is_err());
        assert!(path.coef_at(-1.0).is_err());
    }

    #[test]
    fn predict_link_and_response() {
        let path = toy_path();
        // Rows: (1, 0, 0), (0, 0, 1).
        let x = DenseMatrix::from_row_major(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let x = DesignMatrix::Dense(x);
        let pred = path.predict(&x, 0.5, PredictKind::Link).unwrap();
        assert!((pred.values[0] - 1.2).abs() < 1e-15);
        assert!((pred.values[1] + 1.8).abs() < 1e-15);
        // Gaussian response = link.
        let resp = path.predict(&x, 0.5, PredictKind::Response).unwrap();
        assert_eq!(pred.values, resp.values);
        assert!(path.predict(&x, 0.5, PredictKind::Class).is_err());
    }

    #[test]
    fn predict_class_maps_to_original_labels() {
        let mut path = toy_path();
        path.family = Family::Binomial;
        path.class_levels = Some((0.0, 1.0));
        let x = DenseMatrix::from_row_major(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let x = DesignMatrix::Dense(x);
        let class = path.predict(&x, 0.5, PredictKind::Class).unwrap();
        assert_eq!(class.values, vec![1.0, 0.0]);
        let resp = path.predict(&x, 0.5, PredictKind::Response).unwrap();
        assert!((resp.values[0] - sigmoid(1.2)).abs() < 1e-15);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let path = toy_path();
        let x = DenseMatrix::from_row_major(1, 2, &[1.0, 2.0]).unwrap();
        assert!(matches!(
            path.predict(&DesignMatrix::Dense(x), 0.5, PredictKind::Link),
            Err(ModelError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn summary_counts_are_recomputed() {
        let path = toy_path();
        let summary = path.path_summary();
        assert_eq!(summary.rows.len(), 3);
        assert_eq!(summary.rows[0].nnzero, 0);
        assert_eq!(summary.rows[0].active_groups, 0);
        assert_eq!(summary.rows[1].nnzero, 2);
        assert_eq!(summary.rows[1].active_groups, 2);
        assert_eq!(summary.rows[2].nnzero, 3);
        assert_eq!(summary.rows[2].active_groups, 2);
        assert_eq!(summary.quantiles.len(), 5);
        assert_eq!(summary.quantiles[0].label, "Max.");
        assert_eq!(summary.quantiles[0].row.index, 0);
        assert_eq!(summary.quantiles[4].label, "Min.");
        assert_eq!(summary.quantiles[4].row.index, 2);
    }

    #[test]
    fn quantile_indices_match_convention() {
        // A 100-level path summarises at positions 1, 26, 50, 75, 100
        // (1-based).
        let m_last = 99;
        let idx: Vec<usize> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&q| quantile_index(q, m_last))
            .collect();
        assert_eq!(idx, vec![0, 25, 49, 74, 99]);
        // Single-level path: every row is the same level.
        for q in [0.0, 0.25, 0.5, 0.75, 1.0] {
            assert_eq!(quantile_index(q, 0), 0);
        }
    }
}
