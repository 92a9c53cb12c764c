//! On-disk result schema and lossless reload.
//!
//! `path.json` carries everything needed to rebuild a fitted path in memory:
//! the penalty grid, intercepts, sparse coefficient triplets, per-level
//! diagnostics, and a run manifest (resolved configuration, input digests,
//! tool version, input timestamps). JSON floats are written in shortest
//! round-trip form, so reloading reproduces the in-memory values bit for
//! bit. The manifest records input *modification times* rather than a
//! wall-clock run stamp: re-running on untouched inputs must produce
//! byte-identical outputs.

use std::path::Path;
use std::time::UNIX_EPOCH;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sgl_core::{Family, FitDiagnostics, GroupStructure, SolutionPath};

use crate::error::{file_err, CliError};

pub const SCHEMA_VERSION: u32 = 1;

pub const PATH_FILE: &str = "path.json";
pub const COEFS_FILE: &str = "coefs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const COEF_TRACE_FILE: &str = "coef_trace.csv";
pub const GROUP_NORMS_FILE: &str = "group_norms.csv";
pub const RESPONSE_COPY_FILE: &str = "y.csv";
pub const CV_FILE: &str = "cv.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const RISK_FILE: &str = "risk.csv";
pub const MINIMA_FILE: &str = "minima.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// The whole fitted path plus its provenance, as stored in `path.json`.
#[derive(Serialize, Deserialize)]
pub struct StoredPath {
    pub schema: u32,
    pub family: String,
    pub alpha: f64,
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Per level: (feature, value) for every nonzero coefficient.
    pub coefficients: Vec<Vec<(usize, f64)>>,
    pub nnzero: Vec<usize>,
    pub n_active_groups: Vec<usize>,
    pub truncated: bool,
    /// 0-based group id per feature.
    pub group_ids: Vec<usize>,
    pub group_weights: Vec<f64>,
    pub feature_weights: Vec<f64>,
    pub n_obs: usize,
    pub n_features: usize,
    pub intercept: bool,
    pub standardize: bool,
    /// Binomial fits: the original labels coded as (negative, positive).
    pub class_levels: Option<(f64, f64)>,
    pub diagnostics: Vec<StoredDiagnostics>,
    pub manifest: RunManifest,
}

#[derive(Serialize, Deserialize)]
pub struct StoredDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    pub block_visits: usize,
    pub kkt_passes: usize,
    pub n_strong: usize,
    pub n_active_groups: usize,
    pub final_change: f64,
    pub objective_trace: Vec<f64>,
}

/// Enough to reproduce the run byte for byte given the same inputs.
#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub config: ResolvedConfig,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
    /// The input file's mtime in nanoseconds since the epoch, if available.
    pub modified_unix_ns: Option<u128>,
}

/// Every knob after defaults were applied.
#[derive(Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub family: String,
    pub alpha: f64,
    pub nlambda: usize,
    pub lambda_min_ratio: Option<f64>,
    pub tol: f64,
    pub max_block_visits: usize,
    pub intercept: bool,
    pub standardize: bool,
    pub screen: bool,
    pub kkt_slack: f64,
    pub max_kkt_passes: usize,
    pub groups: String,
    pub strict: bool,
    pub out: String,
    pub nfolds: Option<usize>,
    pub loss: Option<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
pub struct StoredSelection {
    pub lambda_min: f64,
    pub lambda_min_index: usize,
    pub lambda_1se: f64,
    pub lambda_1se_index: usize,
    pub loss: String,
    pub n_folds: usize,
    pub seed: u64,
    /// (fold, lambda_index) pairs that failed to converge and were skipped.
    pub dropped: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
pub struct Minimum {
    pub lambda: f64,
    pub index: usize,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
pub struct StoredMinima {
    pub aic: Minimum,
    pub bic: Minimum,
    pub gcv: Minimum,
}

pub fn family_name(family: Family) -> &'static str {
    match family {
        Family::Gaussian => "gaussian",
        Family::Binomial => "binomial",
    }
}

fn parse_family(name: &str) -> Option<Family> {
    match name {
        "gaussian" => Some(Family::Gaussian),
        "binomial" => Some(Family::Binomial),
        _ => None,
    }
}

/// Digest and timestamp for one input file.
pub fn input_record(role: &str, path: &Path) -> Result<InputRecord, CliError> {
    let bytes = std::fs::read(path).map_err(|e| file_err(path, format!("cannot read: {e}")))?;
    let digest = Sha256::digest(&bytes);
    let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let modified_unix_ns = std::fs::metadata(path)
        .ok()
        .and_then(|m| m.modified().ok())
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map(|d| d.as_nanos());
    Ok(InputRecord {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256,
        modified_unix_ns,
    })
}

pub fn stored_from_path(path: &SolutionPath, manifest: RunManifest) -> StoredPath {
    StoredPath {
        schema: SCHEMA_VERSION,
        family: family_name(path.family).to_string(),
        alpha: path.alpha,
        lambda_max: path.lambda_max,
        lambdas: path.lambdas.clone(),
        intercepts: path.intercepts.clone(),
        coefficients: path.coefficients.clone(),
        nnzero: path.nnzero.clone(),
        n_active_groups: path.n_active_groups.clone(),
        truncated: path.truncated,
        group_ids: path.groups.ids().to_vec(),
        group_weights: path.group_weights.clone(),
        feature_weights: path.feature_weights.clone(),
        n_obs: path.n_obs,
        n_features: path.n_features,
        intercept: path.intercept_enabled,
        standardize: path.standardized,
        class_levels: path.class_levels,
        diagnostics: path
            .diagnostics
            .iter()
            .map(|d| StoredDiagnostics {
                converged: d.converged,
                sweeps: d.sweeps,
                block_visits: d.block_visits,
                kkt_passes: d.kkt_passes,
                n_strong: d.n_strong,
                n_active_groups: d.n_active_set,
                final_change: d.final_change,
                objective_trace: d.objective_trace.clone(),
            })
            .collect(),
        manifest,
    }
}

/// Rebuilds the in-memory path, validating the schema enough that a
/// hand-edited file fails loudly instead of panicking later.
pub fn solution_from_stored(stored: &StoredPath, origin: &Path) -> Result<SolutionPath, CliError> {
    let bad = |msg: String| file_err(origin, msg);
    if stored.schema != SCHEMA_VERSION {
        return Err(bad(format!(
            "unsupported schema version {} (this tool reads {SCHEMA_VERSION})",
            stored.schema
        )));
    }
    let family = parse_family(&stored.family)
        .ok_or_else(|| bad(format!("unknown family {:?}", stored.family)))?;
    let m = stored.lambdas.len();
    for (what, len) in [
        ("intercepts", stored.intercepts.len()),
        ("coefficients", stored.coefficients.len()),
        ("nnzero", stored.nnzero.len()),
        ("n_active_groups", stored.n_active_groups.len()),
        ("diagnostics", stored.diagnostics.len()),
    ] {
        if len != m {
            return Err(bad(format!("{what} holds {len} entries but the grid has {m}")));
        }
    }
    if stored.group_ids.len() != stored.n_features {
        return Err(bad(format!(
            "group_ids holds {} entries but n_features is {}",
            stored.group_ids.len(),
            stored.n_features
        )));
    }
    for level in &stored.coefficients {
        for &(j, _) in level {
            if j >= stored.n_features {
                return Err(bad(format!(
                    "coefficient feature index {j} out of range for {} features",
                    stored.n_features
                )));
            }
        }
    }
    let groups =
        GroupStructure::from_ids(&stored.group_ids).map_err(|e| bad(e.to_string()))?;
    Ok(SolutionPath {
        lambdas: stored.lambdas.clone(),
        lambda_max: stored.lambda_max,
        intercepts: stored.intercepts.clone(),
        coefficients: stored.coefficients.clone(),
        nnzero: stored.nnzero.clone(),
        n_active_groups: stored.n_active_groups.clone(),
        diagnostics: stored
            .diagnostics
            .iter()
            .map(|d| FitDiagnostics {
                converged: d.converged,
                sweeps: d.sweeps,
                block_visits: d.block_visits,
                kkt_passes: d.kkt_passes,
                n_strong: d.n_strong,
                n_active_set: d.n_active_groups,
                final_change: d.final_change,
                objective_trace: d.objective_trace.clone(),
            })
            .collect(),
        truncated: stored.truncated,
        family,
        alpha: stored.alpha,
        groups,
        group_weights: stored.group_weights.clone(),
        feature_weights: stored.feature_weights.clone(),
        n_obs: stored.n_obs,
        n_features: stored.n_features,
        intercept_enabled: stored.intercept,
        standardized: stored.standardize,
        class_levels: stored.class_levels,
    })
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| file_err(path, format!("cannot serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| file_err(path, format!("cannot write: {e}")))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            file_err(path, "not found".to_string())
        } else {
            file_err(path, format!("cannot read: {e}"))
        }
    })?;
    serde_json::from_str(&text).map_err(|e| file_err(path, format!("cannot parse: {e}")))
}

/// Reloads a fit directory written by `fit` or `cv`.
pub fn load_fit_dir(dir: &Path) -> Result<(SolutionPath, StoredPath), CliError> {
    let path_file = dir.join(PATH_FILE);
    if !path_file.is_file() {
        return Err(file_err(
            &path_file,
            "not found; expected a directory previously written by `sgl fit` or `sgl cv`",
        ));
    }
    let stored: StoredPath = load_json(&path_file)?;
    let solution = solution_from_stored(&stored, &path_file)?;
    Ok((solution, stored))
}
