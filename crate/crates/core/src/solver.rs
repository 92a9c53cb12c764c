//! The path solver: blockwise majorization-minimization at a fixed penalty
//! level, wrapped in pathwise screening, working-set iteration, and
//! optimality verification over a decreasing sequence of penalty levels.
//!
//! At each level the working set is fit by cycling over groups, each visit
//! taking one proximal step with a per-group step size from power iteration.
//! Between levels a sequential screening rule proposes the groups that could
//! become active; after every working-set fit the zero groups are re-checked
//! against the optimality conditions so screening mistakes are always
//! repaired before a solution is recorded.

use std::borrow::Cow;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::linalg::{DesignMatrix, LinalgError, LipschitzEstimate};
use crate::model::{FitDiagnostics, SolutionPath};
use crate::penalty::{
    self, group_prox_update, group_subgrad_norm, log1p_exp, sigmoid, PenaltyError, PenaltyParams,
};

/// Floor for inverse step sizes so all-zero column blocks (zero curvature)
/// still get a finite, enormous step; thresholding then keeps them at zero.
const STEP_INV_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("group ids: {0}")]
    BadGroups(String),
    #[error("response: {0}")]
    BadResponse(String),
    #[error("config: {0}")]
    BadConfig(String),
    #[error(
        "no finite penalty level makes the zero solution optimal: feature {feature} is \
         unpenalized (alpha = 1, feature weight 0) but has nonzero gradient at zero"
    )]
    UnboundedLambdaMax { feature: usize },
    #[error(
        "cannot build an automatic lambda sequence from lambda_max = {0}; the penalized \
         gradient at the zero solution vanishes (supply an explicit sequence if this is intended)"
    )]
    LambdaMaxNotPositive(f64),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Binomial,
}

/// Non-overlapping partition of the features into contiguous groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    group_of: Vec<usize>,          // normalized 0-based id per feature
    ranges: Vec<(usize, usize)>,   // per-group [start, end) column interval
}

impl GroupStructure {
    /// Builds from one id per feature. Ids must be non-decreasing and each
    /// new group's id must follow the previous one without gaps (the ids form
    /// consecutive runs); anything else is rejected rather than reordered.
    pub fn from_ids(ids: &[usize]) -> Result<Self, SolverError> {
        if ids.is_empty() {
            return Err(SolverError::BadGroups("no features".into()));
        }
        let mut group_of = Vec::with_capacity(ids.len());
        let mut ranges: Vec<(usize, usize)> = Vec::new();
        let mut current = ids[0];
        let mut start = 0usize;
        group_of.push(0);
        for (j, &id) in ids.iter().enumerate().skip(1) {
            if id == current {
                group_of.push(ranges.len());
            } else if id == current + 1 {
                ranges.push((start, j));
                start = j;
                current = id;
                group_of.push(ranges.len());
            } else if id < current {
                return Err(SolverError::BadGroups(format!(
                    "group ids must be non-decreasing; id {id} at feature {j} follows {current} \
                     (groups must occupy contiguous column ranges)"
                )));
            } else {
                return Err(SolverError::BadGroups(format!(
                    "group ids must be consecutive; id {id} at feature {j} skips over {}",
                    current + 1
                )));
            }
        }
        ranges.push((start, ids.len()));
        Ok(Self { group_of, ranges })
    }

    /// Consecutive groups of `size` features each; a shorter trailing group
    /// absorbs any remainder.
    pub fn equal_sized(n_features: usize, size: usize) -> Result<Self, SolverError> {
        if size == 0 {
            return Err(SolverError::BadGroups("group size must be positive".into()));
        }
        if n_features == 0 {
            return Err(SolverError::BadGroups("no features".into()));
        }
        let ids: Vec<usize> = (0..n_features).map(|j| j / size).collect();
        Self::from_ids(&ids)
    }

    pub fn n_features(&self) -> usize {
        self.group_of.len()
    }

    pub fn n_groups(&self) -> usize {
        self.ranges.len()
    }

    /// Column interval of group `g`.
    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        let (s, e) = self.ranges[g];
        s..e
    }

    pub fn size(&self, g: usize) -> usize {
        let (s, e) = self.ranges[g];
        e - s
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    /// Normalized (0-based) id per feature.
    pub fn ids(&self) -> &[usize] {
        &self.group_of
    }
}

/// Everything that controls a fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// L1 mixing weight in [0, 1].
    pub alpha: f64,
    pub family: Family,
    /// Length of the automatic lambda sequence.
    pub nlambda: usize,
    /// Smallest lambda as a fraction of lambda_max. Default when `None`:
    /// 1e-2 if n < p, else 1e-4.
    pub lambda_min_ratio: Option<f64>,
    /// Explicit lambda sequence (strictly decreasing, positive); overrides
    /// the automatic grid.
    pub lambdas: Option<Vec<f64>>,
    /// Relative coefficient-change tolerance for sweep convergence.
    pub tol: f64,
    /// Budget of coordinate-block visits for one fixed-lambda fit.
    pub max_block_visits: usize,
    /// Fit an unpenalized intercept.
    pub intercept: bool,
    /// Scale columns to unit variance before fitting (coefficients are
    /// returned on the original scale). Centering never happens explicitly:
    /// with an intercept in the model it cancels exactly, so sparsity is
    /// preserved.
    pub standardize: bool,
    /// Per-group penalty multipliers; default sqrt(group size).
    pub group_weights: Option<Vec<f64>>,
    /// Per-feature L1 multipliers; default all ones.
    pub feature_weights: Option<Vec<f64>>,
    /// Per-feature box constraints containing zero; default unbounded.
    pub lower_bounds: Option<Vec<f64>>,
    pub upper_bounds: Option<Vec<f64>>,
    /// Use the sequential screening rule. When off, every group is in the
    /// working set at every lambda — the slow exact baseline.
    pub screen: bool,
    /// Relative slack for the zero-group optimality test.
    pub kkt_slack: f64,
    /// Cap on refit rounds triggered by optimality violations at one lambda.
    pub max_kkt_passes: usize,
    /// Record the objective after every sweep (diagnostics; costs one
    /// objective evaluation per sweep).
    pub track_objective: bool,
    /// Power-iteration tolerance for per-group step sizes. Kept far below the
    /// sweep tolerance so the estimated curvature bound genuinely dominates.
    pub lipschitz_tol: f64,
    pub lipschitz_max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            family: Family::Gaussian,
            nlambda: 100,
            lambda_min_ratio: None,
            lambdas: None,
            tol: 1e-8,
            max_block_visits: 3_000_000,
            intercept: true,
            standardize: false,
            group_weights: None,
            feature_weights: None,
            lower_bounds: None,
            upper_bounds: None,
            screen: true,
            kkt_slack: 1e-6,
            max_kkt_passes: 100,
            track_objective: false,
            lipschitz_tol: 1e-10,
            lipschitz_max_iter: 10_000,
        }
    }
}

/// Mutable state threaded through one path fit.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Coefficients on the (possibly column-scaled) fitting scale.
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Gaussian: residual y - X beta - intercept, maintained incrementally.
    /// Binomial: linear predictor X beta + intercept.
    pub r: Vec<f64>,
    /// Groups that have ever entered the working set (monotone over the path).
    pub active: BTreeSet<usize>,
    /// Groups admitted by screening (monotone over the path).
    pub strong: BTreeSet<usize>,
    /// Lazily computed inverse step sizes per group.
    pub step_inv: Vec<Option<LipschitzEstimate>>,
}

/// Outcome of one fixed-lambda fit.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub converged: bool,
    pub sweeps: usize,
    pub block_visits: usize,
    /// Last sweep's max elementwise coefficient change.
    pub final_change: f64,
    /// Objective after each sweep, when tracking is enabled.
    pub objective_trace: Vec<f64>,
}

/// Optimality certificate for one solution; all quantities are absolute and
/// meant to be compared against a slack proportional to lambda.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// Max over zero groups of ||S(grad, alpha lambda w)||_2 - (1-alpha) lambda sqrt(w_g),
    /// clamped below at zero.
    pub max_inactive_excess: f64,
    /// Max over active groups of the stationarity residual's infinity norm,
    /// over nonzero coordinates strictly inside their bounds.
    pub max_active_residual: f64,
    pub lambda: f64,
}

impl KktReport {
    /// True when both parts hold within `rel_slack`·lambda.
    pub fn satisfied(&self, rel_slack: f64) -> bool {
        let budget = rel_slack * self.lambda;
        self.max_inactive_excess <= budget && self.max_active_residual <= budget
    }
}

/// A validated, ready-to-fit problem: column-scaled design if requested,
/// recoded labels, resolved weights and bounds.
pub struct PathSolver<'a> {
    x: Cow<'a, DesignMatrix>,
    y: Vec<f64>,
    groups: &'a GroupStructure,
    config: &'a FitConfig,
    /// Column scales when standardizing (unit otherwise -> None).
    scales: Option<Vec<f64>>,
    /// Penalty weights and bounds with lambda left at zero.
    params_template: PenaltyParams,
    /// Original binomial class labels as (negative, positive).
    class_levels: Option<(f64, f64)>,
    n: usize,
    p: usize,
}

impl<'a> PathSolver<'a> {
    pub fn new(
        x: &'a DesignMatrix,
        y: &'a [f64],
        groups: &'a GroupStructure,
        config: &'a FitConfig,
    ) -> Result<Self, SolverError> {
        let n = x.n_rows();
        let p = x.n_cols();
        if n == 0 || p == 0 {
            return Err(SolverError::BadConfig(format!(
                "design matrix must be non-empty, got {n}x{p}"
            )));
        }
        if groups.n_features() != p {
            return Err(SolverError::BadGroups(format!(
                "group structure covers {} features but the design has {p} columns",
                groups.n_features()
            )));
        }
        if y.len() != n {
            return Err(SolverError::BadResponse(format!(
                "response length {} != {n} rows",
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::BadResponse(format!(
                "non-finite response at row {i}"
            )));
        }
        if !config.tol.is_finite() || config.tol <= 0.0 {
            return Err(SolverError::BadConfig(format!(
                "tol must be positive, got {}",
                config.tol
            )));
        }
        if config.nlambda == 0 {
            return Err(SolverError::BadConfig("nlambda must be at least 1".into()));
        }
        if let Some(r) = config.lambda_min_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(SolverError::BadConfig(format!(
                    "lambda_min_ratio must lie in (0, 1], got {r}"
                )));
            }
        }
        if let Some(seq) = &config.lambdas {
            validate_user_lambdas(seq)?;
        }
        if config.max_kkt_passes == 0 {
            return Err(SolverError::BadConfig(
                "max_kkt_passes must be at least 1".into(),
            ));
        }

        // Recode a two-level binomial response to -1/+1.
        let (y, class_levels) = match config.family {
            Family::Gaussian => (y.to_vec(), None),
            Family::Binomial => {
                let mut levels: Vec<f64> = Vec::new();
                for &v in y {
                    if !levels.contains(&v) {
                        levels.push(v);
                    }
                    if levels.len() > 2 {
                        return Err(SolverError::BadResponse(format!(
                            "binomial response must have exactly two distinct values, found at \
                             least three: {levels:?}"
                        )));
                    }
                }
                if levels.len() < 2 {
                    return Err(SolverError::BadResponse(
                        "binomial response must contain both classes".into(),
                    ));
                }
                levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let recoded: Vec<f64> = y
                    .iter()
                    .map(|&v| if v == levels[1] { 1.0 } else { -1.0 })
                    .collect();
                (recoded, Some((levels[0], levels[1])))
            }
        };

        // Resolve penalty weights and bounds.
        let n_groups = groups.n_groups();
        let group_weights = match &config.group_weights {
            Some(w) => {
                if w.len() != n_groups {
                    return Err(SolverError::BadConfig(format!(
                        "{} group weights for {} groups",
                        w.len(),
                        n_groups
                    )));
                }
                w.clone()
            }
            None => (0..n_groups).map(|g| (groups.size(g) as f64).sqrt()).collect(),
        };
        let feature_weights = match &config.feature_weights {
            Some(w) => {
                if w.len() != p {
                    return Err(SolverError::BadConfig(format!(
                        "{} feature weights for {} features",
                        w.len(),
                        p
                    )));
                }
                w.clone()
            }
            None => vec![1.0; p],
        };
        let mut lower = match &config.lower_bounds {
            Some(b) => {
                if b.len() != p {
                    return Err(SolverError::BadConfig(format!(
                        "{} lower bounds for {} features",
                        b.len(),
                        p
                    )));
                }
                b.clone()
            }
            None => vec![f64::NEG_INFINITY; p],
        };
        let mut upper = match &config.upper_bounds {
            Some(b) => {
                if b.len() != p {
                    return Err(SolverError::BadConfig(format!(
                        "{} upper bounds for {} features",
                        b.len(),
                        p
                    )));
                }
                b.clone()
            }
            None => vec![f64::INFINITY; p],
        };

        // Column scaling: fit on X diag(1/s). Centering is left to the
        // intercept, which absorbs it exactly, so sparsity survives. Bounds
        // move to the scaled coordinates (beta_scaled = s * beta).
        let (x, scales) = if config.standardize {
            let means = x.column_means();
            let sq = x.column_squared_norms();
            let nf = n as f64;
            let s: Vec<f64> = means
                .iter()
                .zip(&sq)
                .map(|(m, q)| {
                    let var = (q / nf - m * m).max(0.0);
                    let sd = var.sqrt();
                    if sd > 0.0 {
                        sd
                    } else {
                        1.0 // constant column: leave unscaled
                    }
                })
                .collect();
            let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
            for j in 0..p {
                lower[j] *= s[j];
                upper[j] *= s[j];
            }
            (Cow::Owned(x.scale_columns(&inv)?), Some(s))
        } else {
            (Cow::Borrowed(x), None)
        };

        let params_template = PenaltyParams::new(
            config.alpha,
            0.0,
            group_weights,
            feature_weights,
            lower,
            upper,
        )?;

        Ok(Self {
            x,
            y,
            groups,
            config,
            scales,
            params_template,
            class_levels,
            n,
            p,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    /// Penalty parameters at a given level.
    pub fn params_at(&self, lambda: f64) -> PenaltyParams {
        self.params_template.at_lambda(lambda)
    }

    /// Fresh state: zero coefficients and the intercept-only fit (mean for
    /// Gaussian, log-odds for Binomial) when an intercept is requested.
    pub fn init_state(&self) -> SolverState {
        let nf = self.n as f64;
        let intercept = if self.config.intercept {
            match self.config.family {
                Family::Gaussian => self.y.iter().sum::<f64>() / nf,
                Family::Binomial => {
                    let pos = self.y.iter().filter(|&&v| v == 1.0).count() as f64 / nf;
                    (pos / (1.0 - pos)).ln()
                }
            }
        } else {
            0.0
        };
        let r = match self.config.family {
            Family::Gaussian => self.y.iter().map(|v| v - intercept).collect(),
            Family::Binomial => vec![intercept; self.n],
        };
        SolverState {
            beta: vec![0.0; self.p],
            intercept,
            r,
            active: BTreeSet::new(),
            strong: BTreeSet::new(),
            step_inv: vec![None; self.groups.n_groups()],
        }
    }

    /// The loss-gradient carrier: the vector u with grad = -(1/n) X^T u.
    /// Gaussian: the residual itself. Binomial: y_i * sigma(-y_i eta_i).
    fn gradient_carrier<'s>(&self, state: &'s SolverState) -> Cow<'s, [f64]> {
        match self.config.family {
            Family::Gaussian => Cow::Borrowed(&state.r),
            Family::Binomial => Cow::Owned(
                self.y
                    .iter()
                    .zip(&state.r)
                    .map(|(&yi, &eta)| yi * sigmoid(-yi * eta))
                    .collect(),
            ),
        }
    }

    /// Loss gradient restricted to group `g` at the current state.
    pub fn gradient_group(&self, state: &SolverState, g: usize) -> Vec<f64> {
        let u = self.gradient_carrier(state);
        self.gradient_group_from_carrier(&u, g)
    }

    fn gradient_group_from_carrier(&self, u: &[f64], g: usize) -> Vec<f64> {
        let mut grad = self
            .x
            .block_matvec_transpose(self.groups.range(g), u)
            .expect("group ranges validated at construction");
        let scale = -1.0 / self.n as f64;
        for v in &mut grad {
            *v *= scale;
        }
        grad
    }

    /// Full loss gradient at the current state.
    pub fn full_gradient(&self, state: &SolverState) -> Vec<f64> {
        let u = self.gradient_carrier(state);
        let mut grad = self
            .x
            .matvec_transpose(&u)
            .expect("dimensions validated at construction");
        let scale = -1.0 / self.n as f64;
        for v in &mut grad {
            *v *= scale;
        }
        grad
    }

    /// Inverse step size for group `g`, computed on first use: the largest
    /// eigenvalue of (1/n) of the group's Gram block, quartered curvature
    /// bound for the logistic loss.
    fn step_inv(&self, state: &mut SolverState, g: usize) -> f64 {
        let est = match state.step_inv[g] {
            Some(e) => e,
            None => {
                let e = self
                    .x
                    .block_lipschitz(
                        self.groups.range(g),
                        1.0 / self.n as f64,
                        self.config.lipschitz_tol,
                        self.config.lipschitz_max_iter,
                    )
                    .expect("group ranges validated at construction");
                state.step_inv[g] = Some(e);
                e
            }
        };
        let base = match self.config.family {
            Family::Gaussian => est.value,
            Family::Binomial => est.value / 4.0,
        };
        base.max(STEP_INV_FLOOR)
    }

    /// Objective at the current state, trusting the maintained residual /
    /// linear predictor.
    pub fn objective_at(&self, state: &SolverState, params: &PenaltyParams) -> f64 {
        let nf = self.n as f64;
        let loss = match self.config.family {
            Family::Gaussian => state.r.iter().map(|v| v * v).sum::<f64>() / (2.0 * nf),
            Family::Binomial => {
                self.y
                    .iter()
                    .zip(&state.r)
                    .map(|(&yi, &eta)| log1p_exp(-yi * eta))
                    .sum::<f64>()
                    / nf
            }
        };
        loss + penalty::penalty_value(&state.beta, params, self.groups)
    }

    /// Recomputes the residual (Gaussian) or linear predictor (Binomial) from
    /// scratch over the nonzero support, clearing incremental round-off.
    /// Recomputes the carrier (`r` = residual for Gaussian, linear predictor
    /// for Binomial) from scratch after direct edits to `state.beta`,
    /// `state.intercept`, or `state.active`. Only groups listed in
    /// `state.active` contribute, matching the incremental updates.
    pub fn refresh_carrier(&self, state: &mut SolverState) {
        let mut xb = vec![0.0; self.n];
        for &g in &state.active {
            let cols = self.groups.range(g);
            let slice = &state.beta[cols.clone()];
            if slice.iter().any(|&v| v != 0.0) {
                self.x.accumulate_block_matvec(cols, slice, 1.0, &mut xb);
            }
        }
        match self.config.family {
            Family::Gaussian => {
                for i in 0..self.n {
                    state.r[i] = self.y[i] - xb[i] - state.intercept;
                }
            }
            Family::Binomial => {
                for i in 0..self.n {
                    state.r[i] = xb[i] + state.intercept;
                }
            }
        }
    }

    /// Blockwise proximal descent over `visit` at the given penalty level
    /// until the largest coefficient change in a sweep falls below
    /// tol·max(1, ||beta||_inf) or the visit budget runs out.
    pub fn fit_fixed_lambda(
        &self,
        state: &mut SolverState,
        params: &PenaltyParams,
        visit: &BTreeSet<usize>,
    ) -> Result<SweepReport, SolverError> {
        let mut report = SweepReport {
            converged: true,
            sweeps: 0,
            block_visits: 0,
            final_change: 0.0,
            objective_trace: Vec::new(),
        };
        if visit.is_empty() {
            return Ok(report);
        }
        let mut scratch = vec![0.0; self.n];
        loop {
            let mut max_change = 0.0f64;
            for &g in visit {
                if report.block_visits >= self.config.max_block_visits {
                    report.converged = false;
                    report.final_change = max_change;
                    return Ok(report);
                }
                report.block_visits += 1;
                let cols = self.groups.range(g);
                let t = 1.0 / self.step_inv(state, g);
                let grad = self.gradient_group(state, g);
                let beta0 = state.beta[cols.clone()].to_vec();
                let updated = group_prox_update(&beta0, &grad, t, params, self.groups, g)?;
                let mut changed = false;
                let mut delta = vec![0.0; updated.len()];
                for (k, (&new, &old)) in updated.iter().zip(&beta0).enumerate() {
                    let d = new - old;
                    if d != 0.0 {
                        changed = true;
                    }
                    delta[k] = d;
                    max_change = max_change.max(d.abs());
                }
                if changed {
                    // Gaussian residual shrinks by the fitted change; the
                    // binomial linear predictor grows by it.
                    let sign = match self.config.family {
                        Family::Gaussian => -1.0,
                        Family::Binomial => 1.0,
                    };
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    self.x
                        .accumulate_block_matvec(cols.clone(), &delta, 1.0, &mut scratch);
                    for (ri, si) in state.r.iter_mut().zip(&scratch) {
                        *ri += sign * si;
                    }
                    state.beta[cols].copy_from_slice(&updated);
                }
            }
            if self.config.intercept {
                self.update_intercept(state);
            }
            report.sweeps += 1;
            report.final_change = max_change;
            if self.config.track_objective {
                report.objective_trace.push(self.objective_at(state, params));
            }
            let beta_inf = state.beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_change <= self.config.tol * beta_inf.max(1.0) {
                return Ok(report);
            }
        }
    }

    /// Unpenalized intercept refresh. Gaussian: shift by the residual mean
    /// (the exact minimizer). Binomial: one Newton step, capped and halved
    /// until the loss does not increase.
    fn update_intercept(&self, state: &mut SolverState) {
        let nf = self.n as f64;
        match self.config.family {
            Family::Gaussian => {
                let mu = state.r.iter().sum::<f64>() / nf;
                if mu != 0.0 {
                    state.intercept += mu;
                    for ri in &mut state.r {
                        *ri -= mu;
                    }
                }
            }
            Family::Binomial => {
                let mut grad = 0.0;
                let mut hess = 0.0;
                for (&yi, &eta) in self.y.iter().zip(&state.r) {
                    let p = sigmoid(eta);
                    grad += -yi * sigmoid(-yi * eta);
                    hess += p * (1.0 - p);
                }
                grad /= nf;
                hess = (hess / nf).max(1e-12);
                if grad == 0.0 {
                    return;
                }
                let mut delta = (-grad / hess).clamp(-10.0, 10.0);
                let loss = |shift: f64, y: &[f64], eta: &[f64]| -> f64 {
                    y.iter()
                        .zip(eta)
                        .map(|(&yi, &e)| log1p_exp(-yi * (e + shift)))
                        .sum::<f64>()
                };
                let base = loss(0.0, &self.y, &state.r);
                let mut halvings = 0;
                while loss(delta, &self.y, &state.r) > base && halvings < 60 {
                    delta *= 0.5;
                    halvings += 1;
                }
                if halvings == 60 {
                    return; // no improving step in this direction; skip
                }
                state.intercept += delta;
                for eta in &mut state.r {
                    *eta += delta;
                }
            }
        }
    }

    /// Groups outside the current screened set whose gradient at the
    /// previous-level solution fails the sequential discard test and must be
    /// admitted before fitting at `lambda_curr`.
    pub fn strong_screen(
        &self,
        state: &SolverState,
        lambda_prev: f64,
        lambda_curr: f64,
    ) -> Vec<usize> {
        let params = &self.params_template;
        let u = self.gradient_carrier(state);
        let two_step = 2.0 * lambda_curr - lambda_prev;
        let mut admitted = Vec::new();
        for g in 0..self.groups.n_groups() {
            if state.strong.contains(&g) {
                continue;
            }
            let grad = self.gradient_group_from_carrier(&u, g);
            let cols = self.groups.range(g);
            let omega = &params.feature_weights[cols];
            let enters = if params.alpha == 1.0 {
                // Pure-lasso limit: the groupwise test degenerates, so apply
                // the coordinatewise sequential rule instead.
                grad.iter()
                    .zip(omega)
                    .any(|(gj, wj)| gj.abs() > wj * two_step)
            } else {
                let lhs = group_subgrad_norm(&grad, params.alpha, lambda_prev, omega);
                lhs > (1.0 - params.alpha) * params.group_weights[g] * two_step
            };
            if enters {
                admitted.push(g);
            }
        }
        admitted
    }

    /// Zero groups among `candidates` that violate the optimality condition
    /// at `lambda` (with relative slack); groups carrying nonzero
    /// coefficients are never flagged here.
    pub fn kkt_check<I>(&self, state: &SolverState, lambda: f64, candidates: I) -> Vec<usize>
    where
        I: IntoIterator<Item = usize>,
    {
        let params = &self.params_template;
        let u = self.gradient_carrier(state);
        // Testing at an inflated level keeps floating-point ties from cycling
        // and gives the alpha = 1 case (zero right side) a meaningful slack.
        let lam = lambda * (1.0 + self.config.kkt_slack);
        let mut violators = Vec::new();
        for g in candidates {
            let cols = self.groups.range(g);
            if state.beta[cols.clone()].iter().any(|&b| b != 0.0) {
                continue;
            }
            let grad = self.gradient_group_from_carrier(&u, g);
            let omega = &params.feature_weights[cols];
            let lhs = group_subgrad_norm(&grad, params.alpha, lam, omega);
            if lhs > (1.0 - params.alpha) * lam * params.group_weights[g] {
                violators.push(g);
            }
        }
        violators
    }

    /// Full optimality audit of the current state at `lambda`: zero groups
    /// against the subgradient bound, active groups against the stationarity
    /// equation on nonzero coordinates strictly inside their bounds.
    pub fn kkt_certify(&self, state: &SolverState, lambda: f64) -> KktReport {
        let params = self.params_at(lambda);
        let u = self.gradient_carrier(state);
        let mut max_inactive = 0.0f64;
        let mut max_active = 0.0f64;
        for g in 0..self.groups.n_groups() {
            let cols = self.groups.range(g);
            let beta_g = &state.beta[cols.clone()];
            let grad = self.gradient_group_from_carrier(&u, g);
            let omega = &params.feature_weights[cols.clone()];
            let norm = beta_g.iter().map(|b| b * b).sum::<f64>().sqrt();
            if norm == 0.0 {
                let lhs = group_subgrad_norm(&grad, params.alpha, lambda, omega);
                let excess = lhs - (1.0 - params.alpha) * lambda * params.group_weights[g];
                max_inactive = max_inactive.max(excess);
            } else {
                let group_scale = (1.0 - params.alpha) * lambda * params.group_weights[g];
                for (k, &b) in beta_g.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let j = cols.start + k;
                    if b <= params.lower_bounds[j] || b >= params.upper_bounds[j] {
                        continue; // pinned at a bound; stationarity does not apply
                    }
                    let resid = grad[k]
                        + group_scale * b / norm
                        + params.alpha * lambda * omega[k] * b.signum();
                    max_active = max_active.max(resid.abs());
                }
            }
        }
        KktReport {
            max_inactive_excess: max_inactive.max(0.0),
            max_active_residual: max_active,
            lambda,
        }
    }

    /// Audits an externally supplied solution (e.g. a recorded path column)
    /// at `lambda`. Coefficients must be on the fitting scale, which equals
    /// the original scale whenever standardization is off.
    pub fn certify_solution(&self, beta: &[f64], intercept: f64, lambda: f64) -> KktReport {
        debug_assert_eq!(beta.len(), self.p);
        let mut state = self.init_state();
        state.beta = beta.to_vec();
        state.intercept = intercept;
        state.active = (0..self.groups.n_groups()).collect();
        self.refresh_carrier(&mut state);
        self.kkt_certify(&state, lambda)
    }

    /// Smallest penalty level at which the zero solution (with fitted
    /// intercept) is optimal.
    pub fn lambda_max(&self) -> Result<f64, SolverError> {
        let state = self.init_state();
        let c = self.full_gradient(&state);
        let params = &self.params_template;
        let mut lam_max = 0.0f64;
        for g in 0..self.groups.n_groups() {
            let cols = self.groups.range(g);
            let c_g = &c[cols.clone()];
            let omega = &params.feature_weights[cols.clone()];
            let sqw = params.group_weights[g];
            let lam_g = if params.alpha == 1.0 {
                let mut lam = 0.0f64;
                for (k, (&cj, &wj)) in c_g.iter().zip(omega).enumerate() {
                    if wj == 0.0 {
                        if cj != 0.0 {
                            return Err(SolverError::UnboundedLambdaMax {
                                feature: cols.start + k,
                            });
                        }
                    } else {
                        lam = lam.max(cj.abs() / wj);
                    }
                }
                lam
            } else {
                let norm = c_g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    0.0
                } else if params.alpha == 0.0 {
                    norm / sqw
                } else {
                    // The thresholded norm decreases in lambda while the group
                    // budget grows linearly, so the crossing is unique;
                    // bracket it and bisect.
                    let mut lo = 0.0f64;
                    let mut hi = norm / ((1.0 - params.alpha) * sqw);
                    let h = |lam: f64| -> f64 {
                        group_subgrad_norm(c_g, params.alpha, lam, omega)
                            - (1.0 - params.alpha) * sqw * lam
                    };
                    debug_assert!(h(hi) <= 0.0);
                    while hi - lo > 1e-10 * hi {
                        let mid = 0.5 * (lo + hi);
                        if h(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    hi
                }
            };
            lam_max = lam_max.max(lam_g);
        }
        Ok(lam_max)
    }

    /// The lambda grid this fit will use: the user's sequence if given,
    /// otherwise log-spaced from lambda_max down by the configured ratio.
    pub fn lambda_grid(&self, lambda_max: f64) -> Result<Vec<f64>, SolverError> {
        if let Some(seq) = &self.config.lambdas {
            return Ok(seq.clone());
        }
        let ratio = self
            .config
            .lambda_min_ratio
            .unwrap_or(if self.n < self.p { 1e-2 } else { 1e-4 });
        lambda_sequence(lambda_max, self.config.nlambda, ratio)
    }

    /// Fits the full path.
    pub fn fit(&self) -> Result<SolutionPath, SolverError> {
        let lambda_max = self.lambda_max()?;
        let grid = self.lambda_grid(lambda_max)?;
        let n_groups = self.groups.n_groups();

        let mut state = self.init_state();
        if !self.config.screen {
            // Exact baseline: every group is visited at every level.
            state.strong = (0..n_groups).collect();
            state.active = (0..n_groups).collect();
        }

        let mut path = SolutionPath {
            lambdas: Vec::with_capacity(grid.len()),
            lambda_max,
            intercepts: Vec::with_capacity(grid.len()),
            coefficients: Vec::with_capacity(grid.len()),
            nnzero: Vec::with_capacity(grid.len()),
            n_active_groups: Vec::with_capacity(grid.len()),
            diagnostics: Vec::with_capacity(grid.len()),
            truncated: false,
            family: self.config.family,
            alpha: self.config.alpha,
            groups: self.groups.clone(),
            group_weights: self.params_template.group_weights.clone(),
            feature_weights: self.params_template.feature_weights.clone(),
            n_obs: self.n,
            n_features: self.p,
            intercept_enabled: self.config.intercept,
            standardized: self.config.standardize,
            class_levels: self.class_levels,
        };

        for (m, &lambda) in grid.iter().enumerate() {
            let lambda_prev = if m == 0 { lambda_max } else { grid[m - 1] };
            if self.config.screen {
                for g in self.strong_screen(&state, lambda_prev, lambda) {
                    state.strong.insert(g);
                }
            }
            let params = self.params_at(lambda);

            let mut diag = FitDiagnostics {
                converged: true,
                sweeps: 0,
                block_visits: 0,
                kkt_passes: 0,
                n_strong: 0,
                n_active_set: 0,
                final_change: 0.0,
                objective_trace: Vec::new(),
            };
            let mut certified = false;
            for _pass in 0..self.config.max_kkt_passes {
                diag.kkt_passes += 1;
                let visit = state.active.clone();
                let report = self.fit_fixed_lambda(&mut state, &params, &visit)?;
                diag.sweeps += report.sweeps;
                diag.block_visits += report.block_visits;
                diag.final_change = report.final_change;
                diag.objective_trace.extend(report.objective_trace);
                if !report.converged {
                    diag.converged = false;
                    break;
                }
                self.refresh_carrier(&mut state);

                // First repair pass: screened-in groups we chose not to fit.
                let in_strong_not_active: Vec<usize> = state
                    .strong
                    .difference(&state.active)
                    .copied()
                    .collect();
                let v1 = self.kkt_check(&state, lambda, in_strong_not_active);
                if !v1.is_empty() {
                    state.active.extend(v1);
                    continue;
                }
                // Second repair pass: everything the screen discarded.
                let outside: Vec<usize> = (0..n_groups)
                    .filter(|g| !state.strong.contains(g) && !state.active.contains(g))
                    .collect();
                let v2 = self.kkt_check(&state, lambda, outside);
                if !v2.is_empty() {
                    state.active.extend(v2);
                    continue;
                }
                certified = true;
                break;
            }
            if diag.converged && !certified {
                // Optimality-violation loop hit its cap; treat like
                // non-convergence at this level.
                diag.converged = false;
            }

            state.strong = state.strong.union(&state.active).copied().collect();
            diag.n_strong = state.strong.len();
            diag.n_active_set = state.active.len();

            // Record on the original column scale.
            let mut coefs: Vec<(usize, f64)> = Vec::new();
            for (j, &b) in state.beta.iter().enumerate() {
                if b != 0.0 {
                    let unscaled = match &self.scales {
                        Some(s) => b / s[j],
                        None => b,
                    };
                    if unscaled != 0.0 {
                        coefs.push((j, unscaled));
                    }
                }
            }
            let mut active_groups: BTreeSet<usize> = BTreeSet::new();
            for &(j, _) in &coefs {
                active_groups.insert(self.groups.group_of(j));
            }
            path.lambdas.push(lambda);
            path.intercepts.push(state.intercept);
            path.nnzero.push(coefs.len());
            path.n_active_groups.push(active_groups.len());
            path.coefficients.push(coefs);
            let failed = !diag.converged;
            path.diagnostics.push(diag);
            if failed {
                // Later levels would warm-start from an uncertified point;
                // stop here and say so instead.
                path.truncated = true;
                break;
            }
        }
        Ok(path)
    }
}

/// Log-spaced decreasing sequence from `lambda_max` to
/// `lambda_max * min_ratio`.
pub fn lambda_sequence(
    lambda_max: f64,
    nlambda: usize,
    min_ratio: f64,
) -> Result<Vec<f64>, SolverError> {
    if !lambda_max.is_finite() || lambda_max <= 0.0 {
        return Err(SolverError::LambdaMaxNotPositive(lambda_max));
    }
    if nlambda == 0 {
        return Err(SolverError::BadConfig("nlambda must be at least 1".into()));
    }
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(SolverError::BadConfig(format!(
            "lambda_min_ratio must lie in (0, 1], got {min_ratio}"
        )));
    }
    if nlambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let m = (nlambda - 1) as f64;
    Ok((0..nlambda)
        .map(|i| lambda_max * min_ratio.powf(i as f64 / m))
        .collect())
}

fn validate_user_lambdas(seq: &[f64]) -> Result<(), SolverError> {
    if seq.is_empty() {
        return Err(SolverError::BadConfig("lambda sequence is empty".into()));
    }
    for (i, &v) in seq.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(SolverError::BadConfig(format!(
                "lambda sequence entry {i} must be positive and finite, got {v}"
            )));
        }
        if i > 0 && v >= seq[i - 1] {
            return Err(SolverError::BadConfig(format!(
                "lambda sequence must be strictly decreasing; entry {i} ({v}) >= entry {} ({})",
                i - 1,
                seq[i - 1]
            )));
        }
    }
    Ok(())
}

/// Convenience wrapper: validate, then fit the whole path.
pub fn fit_path(
    x: &DesignMatrix,
    y: &[f64],
    groups: &GroupStructure,
    config: &FitConfig,
) -> Result<SolutionPath, SolverError> {
    PathSolver::new(x, y, groups, config)?.fit()
}
