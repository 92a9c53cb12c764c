//! Problem ingestion and text emission.
//!
//! Two design formats are accepted: dense CSV with a header row, and
//! MatrixMarket coordinate (sniffed by its `%%MatrixMarket` banner). The
//! small side files — response, group ids, weights, bounds, explicit
//! lambdas — are single-purpose column files whose first line may be a
//! header. Read failures name the file and 1-based line. All emitted floats
//! carry 17 significant digits, so downstream consumers can compare results
//! at full double precision.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sgl_core::{DenseMatrix, DesignMatrix, GroupStructure, SparseColumnMatrix};

use crate::error::{file_err, parse_err, CliError};

/// Full-precision float formatting for every CSV cell we write.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| file_err(path, format!("cannot write: {e}")))
}

/// The file's lines with 1-based numbers, CR stripped so CRLF input works.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let file = File::open(path).map_err(|e| file_err(path, format!("cannot open: {e}")))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| file_err(path, format!("cannot read: {e}")))?;
        lines.push((i + 1, line.trim_end_matches('\r').to_string()));
    }
    Ok(lines)
}

fn parse_float(path: &Path, line: usize, raw: &str) -> Result<f64, CliError> {
    let t = raw.trim();
    t.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("expected a number, got {t:?}")))
}

/// Reads either design format, dispatching on the first line.
pub fn read_design(path: &Path) -> Result<DesignMatrix, CliError> {
    let lines = read_lines(path)?;
    let is_matrix_market = lines
        .first()
        .map(|(_, l)| l.trim_start().to_ascii_lowercase().starts_with("%%matrixmarket"))
        .unwrap_or(false);
    if is_matrix_market {
        read_matrix_market(path, &lines)
    } else {
        read_dense_csv(path, &lines)
    }
}

/// Dense CSV: a header row, then one row of numbers per observation.
fn read_dense_csv(path: &Path, lines: &[(usize, String)]) -> Result<DesignMatrix, CliError> {
    let mut rows = lines.iter().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = rows
        .next()
        .ok_or_else(|| file_err(path, "empty file; expected a CSV header row"))?;
    let n_cols = header.split(',').count();

    let mut row_major: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (lineno, line) in rows {
        let mut fields = 0usize;
        for raw in line.split(',') {
            let v = parse_float(path, *lineno, raw)?;
            if !v.is_finite() {
                return Err(parse_err(path, *lineno, format!("non-finite value {v}")));
            }
            row_major.push(v);
            fields += 1;
        }
        if fields != n_cols {
            return Err(parse_err(
                path,
                *lineno,
                format!("expected {n_cols} fields, found {fields}"),
            ));
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(file_err(path, "no data rows after the header"));
    }
    let dense = DenseMatrix::from_row_major(n_rows, n_cols, &row_major)
        .map_err(|e| file_err(path, e.to_string()))?;
    Ok(DesignMatrix::Dense(dense))
}

/// MatrixMarket coordinate: banner, optional % comments, a size line
/// "rows cols nnz", then nnz 1-based "i j value" entries.
fn read_matrix_market(path: &Path, lines: &[(usize, String)]) -> Result<DesignMatrix, CliError> {
    let (banner_line, banner) = &lines[0];
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    let expect = |i: usize, allowed: &[&str], what: &str| -> Result<(), CliError> {
        match tokens.get(i) {
            Some(t) if allowed.contains(&t.as_str()) => Ok(()),
            other => Err(parse_err(
                path,
                *banner_line,
                format!(
                    "unsupported MatrixMarket {what} {:?}; expected one of {allowed:?}",
                    other.map(String::as_str).unwrap_or("<missing>")
                ),
            )),
        }
    };
    expect(1, &["matrix"], "object")?;
    expect(2, &["coordinate"], "format")?;
    expect(3, &["real", "integer"], "field")?;
    expect(4, &["general"], "symmetry")?;

    let mut body = lines[1..]
        .iter()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));

    let (size_line, size) = body
        .next()
        .ok_or_else(|| file_err(path, "missing MatrixMarket size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(path, *size_line, "expected \"rows cols nnz\""));
    }
    let parse_dim = |raw: &str| -> Result<usize, CliError> {
        raw.parse::<usize>()
            .map_err(|_| parse_err(path, *size_line, format!("bad extent {raw:?}")))
    };
    let n_rows = parse_dim(dims[0])?;
    let n_cols = parse_dim(dims[1])?;
    let nnz = parse_dim(dims[2])?;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(nnz);
    for (lineno, line) in body {
        if triplets.len() == nnz {
            return Err(parse_err(
                path,
                *lineno,
                format!("more than the declared {nnz} entries"),
            ));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, *lineno, "expected \"i j value\""));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, *lineno, format!("bad row index {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(path, *lineno, format!("bad column index {:?}", fields[1])))?;
        if i < 1 || i > n_rows {
            return Err(parse_err(
                path,
                *lineno,
                format!("row index {i} out of range 1..={n_rows}"),
            ));
        }
        if j < 1 || j > n_cols {
            return Err(parse_err(
                path,
                *lineno,
                format!("column index {j} out of range 1..={n_cols}"),
            ));
        }
        let v = parse_float(path, *lineno, fields[2])?;
        if !v.is_finite() {
            return Err(parse_err(path, *lineno, format!("non-finite value {v}")));
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != nnz {
        return Err(file_err(
            path,
            format!("declared {nnz} entries but found {}", triplets.len()),
        ));
    }
    let sparse = SparseColumnMatrix::from_triplets(n_rows, n_cols, &triplets)
        .map_err(|e| file_err(path, e.to_string()))?;
    Ok(DesignMatrix::Sparse(sparse))
}

/// Single-column numeric file; a non-numeric first line is taken as a header.
/// Every value must be finite.
pub fn read_column(path: &Path, what: &str) -> Result<Vec<f64>, CliError> {
    let lines = read_lines(path)?;
    let mut values = Vec::new();
    for (pos, (lineno, line)) in lines
        .iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .enumerate()
    {
        if line.contains(',') {
            return Err(parse_err(
                path,
                *lineno,
                format!("expected a single {what} column, found multiple fields"),
            ));
        }
        match parse_float(path, *lineno, line) {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(parse_err(path, *lineno, format!("non-finite value {v}"))),
            // Only the very first line may fail to parse (as a header).
            Err(_) if pos == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(file_err(path, format!("no {what} values")));
    }
    Ok(values)
}

/// A weight file must supply exactly one value per group or feature.
pub fn read_weights(path: &Path, expected: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let values = read_column(path, what)?;
    if values.len() != expected {
        return Err(file_err(
            path,
            format!("expected {expected} values (one per {what}), found {}", values.len()),
        ));
    }
    Ok(values)
}

/// The group map: "size:K" shorthand, or a file with one id per feature.
pub fn read_groups(spec: &str, n_features: usize) -> Result<GroupStructure, CliError> {
    if let Some(raw) = spec.strip_prefix("size:") {
        let size: usize = raw.parse().map_err(|_| {
            CliError::Invalid(format!("group size in {spec:?} must be a positive integer"))
        })?;
        return GroupStructure::equal_sized(n_features, size)
            .map_err(|e| CliError::Invalid(format!("--groups {spec}: {e}")));
    }
    let path = Path::new(spec);
    let lines = read_lines(path)?;
    let mut ids = Vec::new();
    for (pos, (lineno, line)) in lines
        .iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .enumerate()
    {
        match line.trim().parse::<usize>() {
            Ok(id) => ids.push(id),
            Err(_) if pos == 0 => continue, // header
            Err(_) => {
                return Err(parse_err(
                    path,
                    *lineno,
                    format!("expected a non-negative integer group id, got {:?}", line.trim()),
                ))
            }
        }
    }
    if ids.len() != n_features {
        return Err(file_err(
            path,
            format!(
                "expected {n_features} group ids (one per design column), found {}",
                ids.len()
            ),
        ));
    }
    GroupStructure::from_ids(&ids).map_err(|e| file_err(path, e.to_string()))
}

/// Box constraints: "lower,upper" per feature. NaN is rejected; infinities
/// disable a side.
pub fn read_bounds(path: &Path, n_features: usize) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let lines = read_lines(path)?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (pos, (lineno, line)) in lines
        .iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .enumerate()
    {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                *lineno,
                format!("expected \"lower,upper\", found {} fields", fields.len()),
            ));
        }
        let parsed = (
            parse_float(path, *lineno, fields[0]),
            parse_float(path, *lineno, fields[1]),
        );
        match parsed {
            (Ok(lo), Ok(hi)) => {
                if lo.is_nan() || hi.is_nan() {
                    return Err(parse_err(path, *lineno, "bounds must not be NaN"));
                }
                lower.push(lo);
                upper.push(hi);
            }
            (Err(_), _) | (_, Err(_)) if pos == 0 => continue, // header
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    if lower.len() != n_features {
        return Err(file_err(
            path,
            format!(
                "expected {n_features} bound rows (one per design column), found {}",
                lower.len()
            ),
        ));
    }
    Ok((lower, upper))
}

/// Explicit penalty levels, sorted into decreasing order with exact
/// duplicates dropped.
pub fn read_lambdas(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut values = read_column(path, "lambda")?;
    if let Some(&bad) = values.iter().find(|&&v| v <= 0.0) {
        return Err(file_err(path, format!("lambda values must be positive, got {bad}")));
    }
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values.dedup();
    Ok(values)
}
