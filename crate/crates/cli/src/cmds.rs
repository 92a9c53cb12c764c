//! The four commands: fit, cv, risk, predict.
//!
//! Each command reads its inputs, delegates the numerics to `sgl_core`, and
//! writes a directory of small focused files so plot tooling and tests can
//! consume them independently. Only `cv` is allowed to use worker threads
//! (for fold fitting); everything else runs single-threaded end to end.

use std::collections::BTreeSet;
use std::path::Path;

use sgl_core::cv::{cross_validate, CvConfig, CvLoss, CvResult};
use sgl_core::risk::{estimate_risk, estimate_risk_capped, RiskEstimates};
use sgl_core::{fit_path, DesignMatrix, Family, FitConfig, GroupStructure, SolutionPath};

use crate::args::{CvArgs, FitArgs, LossArg, PredictArgs, RiskArgs};
use crate::error::CliError;
use crate::io::{self, fmt};
use crate::store::{
    self, InputRecord, Minimum, ResolvedConfig, RunManifest, StoredMinima, StoredSelection,
};

/// Everything read and cross-checked for a fit or cv run.
struct Problem {
    x: DesignMatrix,
    y: Vec<f64>,
    groups: GroupStructure,
    lambdas: Option<Vec<f64>>,
    group_weights: Option<Vec<f64>>,
    feature_weights: Option<Vec<f64>>,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    records: Vec<InputRecord>,
}

fn load_problem(args: &FitArgs) -> Result<Problem, CliError> {
    let x = io::read_design(&args.design)?;
    let y = io::read_column(&args.response, "response")?;
    if y.len() != x.n_rows() {
        return Err(CliError::File {
            path: args.response.display().to_string(),
            msg: format!("holds {} rows but the design has {}", y.len(), x.n_rows()),
        });
    }
    let groups = io::read_groups(&args.groups, x.n_cols())?;

    let mut records = vec![
        store::input_record("design", &args.design)?,
        store::input_record("response", &args.response)?,
    ];
    if !args.groups.starts_with("size:") {
        records.push(store::input_record("groups", Path::new(&args.groups))?);
    }

    let group_weights = match &args.group_weights {
        Some(path) => {
            records.push(store::input_record("group-weights", path)?);
            Some(io::read_weights(path, groups.n_groups(), "group")?)
        }
        None => None,
    };
    let feature_weights = match &args.feature_weights {
        Some(path) => {
            records.push(store::input_record("feature-weights", path)?);
            Some(io::read_weights(path, x.n_cols(), "feature")?)
        }
        None => None,
    };
    let bounds = match &args.bounds_file {
        Some(path) => {
            records.push(store::input_record("bounds", path)?);
            Some(io::read_bounds(path, x.n_cols())?)
        }
        None => None,
    };
    let lambdas = match &args.lambda_file {
        Some(path) => {
            records.push(store::input_record("lambda-file", path)?);
            Some(io::read_lambdas(path)?)
        }
        None => None,
    };

    Ok(Problem {
        x,
        y,
        groups,
        lambdas,
        group_weights,
        feature_weights,
        bounds,
        records,
    })
}

fn build_config(args: &FitArgs, problem: &Problem) -> FitConfig {
    let mut config = FitConfig::default();
    config.alpha = args.alpha;
    config.family = args.family.to_family();
    config.nlambda = args.nlambda;
    config.lambda_min_ratio = args.lambda_min_ratio;
    config.lambdas = problem.lambdas.clone();
    config.tol = args.tol;
    if let Some(budget) = args.max_block_visits {
        config.max_block_visits = budget;
    }
    config.intercept = !args.no_intercept;
    config.standardize = args.standardize;
    config.group_weights = problem.group_weights.clone();
    config.feature_weights = problem.feature_weights.clone();
    if let Some((lower, upper)) = &problem.bounds {
        config.lower_bounds = Some(lower.clone());
        config.upper_bounds = Some(upper.clone());
    }
    config
}

/// Manifest snapshot of every knob after defaults were applied.
fn resolved_config(
    args: &FitArgs,
    config: &FitConfig,
    cv: Option<(&CvArgs, CvLoss, Option<usize>)>,
) -> ResolvedConfig {
    ResolvedConfig {
        family: store::family_name(config.family).to_string(),
        alpha: config.alpha,
        nlambda: config.nlambda,
        lambda_min_ratio: config.lambda_min_ratio,
        tol: config.tol,
        max_block_visits: config.max_block_visits,
        intercept: config.intercept,
        standardize: config.standardize,
        screen: config.screen,
        kkt_slack: config.kkt_slack,
        max_kkt_passes: config.max_kkt_passes,
        groups: args.groups.clone(),
        strict: args.strict,
        out: args.out.display().to_string(),
        nfolds: cv.map(|(c, _, _)| c.nfolds),
        loss: cv.map(|(_, l, _)| loss_name(l).to_string()),
        seed: cv.map(|(c, _, _)| c.seed),
        jobs: cv.and_then(|(_, _, j)| j),
    }
}

fn manifest(command: &str, records: Vec<InputRecord>, config: ResolvedConfig) -> RunManifest {
    RunManifest {
        tool: "sgl".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        inputs: records,
        config,
    }
}

fn loss_name(loss: CvLoss) -> &'static str {
    match loss {
        CvLoss::SquaredError => "mse",
        CvLoss::AbsoluteError => "mae",
        CvLoss::Deviance => "deviance",
        CvLoss::Misclass => "misclass",
    }
}

/// Writes path.json plus the CSV companions into `dir`.
fn write_fit_outputs(
    dir: &Path,
    solution: &SolutionPath,
    y: &[f64],
    stored: &store::StoredPath,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::File {
        path: dir.display().to_string(),
        msg: format!("cannot create: {e}"),
    })?;
    store::save_json(&dir.join(store::PATH_FILE), stored)?;

    // Sparse triplets, one row per nonzero coefficient per level.
    let mut coefs = String::from("lambda_index,feature,value\n");
    for (m, level) in solution.coefficients.iter().enumerate() {
        for &(j, v) in level {
            coefs.push_str(&format!("{m},{j},{}\n", fmt(v)));
        }
    }
    io::write_text(&dir.join(store::COEFS_FILE), &coefs)?;

    // Per-level table plus the five quantile rows over the fitted levels.
    let summary = solution.path_summary();
    let mut text = String::from("quantile,lambda_index,lambda,nnzero,active_groups\n");
    for row in &summary.rows {
        text.push_str(&format!(
            ",{},{},{},{}\n",
            row.index,
            fmt(row.lambda),
            row.nnzero,
            row.active_groups
        ));
    }
    for q in &summary.quantiles {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            q.label,
            q.row.index,
            fmt(q.row.lambda),
            q.row.nnzero,
            q.row.active_groups
        ));
    }
    io::write_text(&dir.join(store::SUMMARY_FILE), &text)?;

    // Plot-ready long format: every feature (group) that is ever nonzero,
    // traced across the whole grid so trajectories touch zero where they
    // enter and leave.
    let ever_features: BTreeSet<usize> = solution
        .coefficients
        .iter()
        .flatten()
        .map(|&(j, _)| j)
        .collect();
    let ever_groups: BTreeSet<usize> = ever_features
        .iter()
        .map(|&j| solution.groups.group_of(j))
        .collect();

    let mut trace = String::from("lambda_index,lambda,feature,group,value\n");
    let mut norms = String::from("lambda_index,lambda,group,norm\n");
    for m in 0..solution.lambdas.len() {
        let dense = solution.dense_coefficients(m);
        let lambda = fmt(solution.lambdas[m]);
        for &j in &ever_features {
            trace.push_str(&format!(
                "{m},{lambda},{j},{},{}\n",
                solution.groups.group_of(j),
                fmt(dense[j])
            ));
        }
        for &g in &ever_groups {
            let norm = solution.groups.range(g).map(|j| dense[j] * dense[j]).sum::<f64>().sqrt();
            norms.push_str(&format!("{m},{lambda},{g},{}\n", fmt(norm)));
        }
    }
    io::write_text(&dir.join(store::COEF_TRACE_FILE), &trace)?;
    io::write_text(&dir.join(store::GROUP_NORMS_FILE), &norms)?;

    // The response travels with the fit so `risk` needs only the design.
    let mut response = String::from("y\n");
    for &v in y {
        response.push_str(&fmt(v));
        response.push('\n');
    }
    io::write_text(&dir.join(store::RESPONSE_COPY_FILE), &response)
}

/// Under --strict, a level that gave up turns into exit code 3.
fn strict_gate(strict: bool, solution: &SolutionPath) -> Result<(), CliError> {
    if !strict {
        return Ok(());
    }
    match solution.diagnostics.iter().position(|d| !d.converged) {
        Some(m) => Err(CliError::NotConverged {
            index: m,
            lambda: solution.lambdas[m],
        }),
        None => Ok(()),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let problem = load_problem(args)?;
    let config = build_config(args, &problem);
    let solution = fit_path(&problem.x, &problem.y, &problem.groups, &config)?;

    let run = manifest(
        "fit",
        problem.records.clone(),
        resolved_config(args, &config, None),
    );
    let stored = store::stored_from_path(&solution, run);
    write_fit_outputs(&args.out, &solution, &problem.y, &stored)?;

    println!(
        "fit: {} levels on a {}x{} design -> {}",
        solution.lambdas.len(),
        problem.x.n_rows(),
        problem.x.n_cols(),
        args.out.display()
    );
    strict_gate(args.strict, &solution)
}

/// --jobs, then SGL_PATH_JOBS, then the rayon default (available cores).
fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let jobs = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SGL_PATH_JOBS") {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| {
                CliError::Invalid(format!(
                    "SGL_PATH_JOBS must be a positive integer, got {raw:?}"
                ))
            })?),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(CliError::Invalid(format!("SGL_PATH_JOBS: {e}"))),
        },
    };
    if jobs == Some(0) {
        return Err(CliError::Invalid(
            "worker count must be at least 1 (omit the flag for the default)".to_string(),
        ));
    }
    Ok(jobs)
}

pub fn cmd_cv(args: &CvArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.fit)?;
    let config = build_config(&args.fit, &problem);
    let jobs = resolve_jobs(args.jobs)?;
    let cv_config = CvConfig {
        n_folds: args.nfolds,
        loss: args.loss.map(LossArg::to_loss),
        seed: args.seed,
        jobs,
    };
    let result = cross_validate(&problem.x, &problem.y, &problem.groups, &config, &cv_config)?;

    let run = manifest(
        "cv",
        problem.records.clone(),
        resolved_config(&args.fit, &config, Some((args, result.loss, jobs))),
    );
    let stored = store::stored_from_path(&result.full_path, run);
    write_fit_outputs(&args.fit.out, &result.full_path, &problem.y, &stored)?;
    write_cv_outputs(&args.fit.out, &result, args)?;

    println!(
        "cv: {} folds over {} levels -> {} (lambda_min = {:e}, lambda_1se = {:e})",
        args.nfolds,
        result.lambdas.len(),
        args.fit.out.display(),
        result.lambda_min,
        result.lambda_1se
    );
    strict_gate(args.fit.strict, &result.full_path)
}

fn write_cv_outputs(dir: &Path, result: &CvResult, args: &CvArgs) -> Result<(), CliError> {
    let mut curve = String::from("lambda,mean,se\n");
    for m in 0..result.lambdas.len() {
        curve.push_str(&format!(
            "{},{},{}\n",
            fmt(result.lambdas[m]),
            fmt(result.mean_loss[m]),
            fmt(result.se_loss[m])
        ));
    }
    io::write_text(&dir.join(store::CV_FILE), &curve)?;

    let selection = StoredSelection {
        lambda_min: result.lambda_min,
        lambda_min_index: result.lambda_min_index,
        lambda_1se: result.lambda_1se,
        lambda_1se_index: result.lambda_1se_index,
        loss: loss_name(result.loss).to_string(),
        n_folds: args.nfolds,
        seed: args.seed,
        dropped: result.dropped.clone(),
    };
    store::save_json(&dir.join(store::SELECTION_FILE), &selection)
}

pub fn cmd_risk(args: &RiskArgs) -> Result<(), CliError> {
    let (solution, _) = store::load_fit_dir(&args.fit_dir)?;
    if solution.family == Family::Binomial {
        return Err(CliError::Invalid(
            "information criteria here are gaussian only; this fit used the binomial family"
                .to_string(),
        ));
    }
    let x = io::read_design(&args.design)?;
    let y = io::read_column(&args.fit_dir.join(store::RESPONSE_COPY_FILE), "response")?;

    let estimates = if args.approx_df {
        // Cap 0 forces the nonzero-coefficient count everywhere.
        estimate_risk_capped(&solution, &x, &y, 0)?
    } else {
        estimate_risk(&solution, &x, &y)?
    };

    let out = args.out.clone().unwrap_or_else(|| args.fit_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| CliError::File {
        path: out.display().to_string(),
        msg: format!("cannot create: {e}"),
    })?;
    write_risk_outputs(&out, &estimates)?;

    println!(
        "risk: {} levels ({}) -> {}",
        estimates.lambdas.len(),
        if args.approx_df { "approximate df" } else { "exact df" },
        out.display()
    );
    Ok(())
}

fn write_risk_outputs(dir: &Path, estimates: &RiskEstimates) -> Result<(), CliError> {
    let mut table = String::from("lambda,df,aic,bic,gcv\n");
    for m in 0..estimates.lambdas.len() {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(estimates.lambdas[m]),
            fmt(estimates.df[m]),
            fmt(estimates.aic[m]),
            fmt(estimates.bic[m]),
            fmt(estimates.gcv[m])
        ));
    }
    io::write_text(&dir.join(store::RISK_FILE), &table)?;

    let minima = StoredMinima {
        aic: minimum_of(&estimates.lambdas, &estimates.aic, "aic")?,
        bic: minimum_of(&estimates.lambdas, &estimates.bic, "bic")?,
        gcv: minimum_of(&estimates.lambdas, &estimates.gcv, "gcv")?,
    };
    store::save_json(&dir.join(store::MINIMA_FILE), &minima)
}

/// First (largest-lambda) finite minimizer along the grid.
fn minimum_of(lambdas: &[f64], values: &[f64], name: &str) -> Result<Minimum, CliError> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(index, &value)| Minimum {
            lambda: lambdas[index],
            index,
            value,
        })
        .ok_or_else(|| CliError::Invalid(format!("no finite {name} values along the path")))
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let (solution, _) = store::load_fit_dir(&args.fit_dir)?;
    let x = io::read_design(&args.design)?;
    let kind = args.kind.to_kind();

    // lambda.min / lambda.1se come from a cv run's selection.json.
    let selection_dir = args.cv_dir.as_ref().unwrap_or(&args.fit_dir);
    let mut selection: Option<StoredSelection> = None;
    let mut levels: Vec<(String, f64)> = Vec::new();
    for token in &args.s {
        let token = token.trim();
        let value = match token {
            "lambda.min" | "lambda.1se" => {
                if selection.is_none() {
                    let file = selection_dir.join(store::SELECTION_FILE);
                    if !file.is_file() {
                        return Err(CliError::Invalid(format!(
                            "--s {token} needs a cross-validation output directory \
                             (no selection.json in {}; point --cv-dir at one)",
                            selection_dir.display()
                        )));
                    }
                    selection = Some(store::load_json(&file)?);
                }
                let sel = selection.as_ref().unwrap();
                if token == "lambda.min" {
                    sel.lambda_min
                } else {
                    sel.lambda_1se
                }
            }
            _ => token.parse::<f64>().map_err(|_| {
                CliError::Invalid(format!(
                    "--s entries must be numbers or lambda.min/lambda.1se, got {token:?}"
                ))
            })?,
        };
        levels.push((token.to_string(), value));
    }

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(levels.len());
    for (_, lambda) in &levels {
        columns.push(solution.predict(&x, *lambda, kind)?.values);
    }

    let mut text = String::from("row");
    for (label, _) in &levels {
        text.push(',');
        text.push_str(label);
    }
    text.push('\n');
    let class_output = kind == sgl_core::PredictKind::Class;
    for i in 0..x.n_rows() {
        text.push_str(&i.to_string());
        for column in &columns {
            text.push(',');
            if class_output {
                // Class labels are discrete values; print them bare.
                text.push_str(&format!("{}", column[i]));
            } else {
                text.push_str(&fmt(column[i]));
            }
        }
        text.push('\n');
    }

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::File {
        path: args.out.display().to_string(),
        msg: format!("cannot create: {e}"),
    })?;
    io::write_text(&args.out.join(store::PREDICTIONS_FILE), &text)?;

    println!(
        "predict: {} rows at {} level(s) -> {}",
        x.n_rows(),
        levels.len(),
        args.out.display()
    );
    Ok(())
}
