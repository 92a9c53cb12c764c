//! Helpers shared by the integration test targets: running the binary in a
//! scratch directory, writing the small CSV/MatrixMarket inputs it consumes,
//! and generating seeded synthetic problems.
#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Command handle for the compiled `sgl` binary.
pub fn sgl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgl"))
}

/// Runs `sgl` with `args` inside `dir` and returns the raw output. The
/// thread-count environment override is stripped so tests that exercise it
/// explicitly are the only ones affected by the ambient environment.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    sgl()
        .current_dir(dir)
        .env_remove("SGL_PATH_JOBS")
        .args(args)
        .output()
        .expect("failed to launch the sgl binary")
}

/// Runs `sgl` and asserts it exits successfully.
pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

/// Runs `sgl` and asserts the exact failure exit code; returns stderr.
pub fn run_fail(dir: &Path, args: &[&str], code: i32) -> String {
    let out = run(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit code {code} for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_file(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).expect("failed to write test input");
}

pub fn read_to_string(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read_to_string(path))
        .unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

/// Parses a CSV file into rows of string fields; the header row is kept.
pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    read_to_string(path)
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

/// The 17-significant-digit float format used in every CSV the tool writes.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a dense design as CSV with an `x1..xp` header. Values use Rust's
/// shortest round-trip float formatting, so reading them back is lossless.
pub fn dense_csv(rows: &[Vec<f64>]) -> String {
    let p = rows[0].len();
    let mut s = (1..=p).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in rows {
        assert_eq!(row.len(), p, "ragged test fixture");
        s.push_str(
            &row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","),
        );
        s.push('\n');
    }
    s
}

/// Renders the same matrix in MatrixMarket coordinate form, zeros omitted.
pub fn matrix_market(rows: &[Vec<f64>]) -> String {
    let n = rows.len();
    let p = rows[0].len();
    let mut entries = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                entries.push(format!("{} {} {v}", i + 1, j + 1));
            }
        }
    }
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    s.push_str(&format!("{n} {p} {}\n", entries.len()));
    s.push_str(&entries.join("\n"));
    s.push('\n');
    s
}

/// Renders a single-column CSV with the given header.
pub fn column_csv(header: &str, values: &[f64]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

pub struct TestProblem {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Seeded Gaussian regression problem: X ~ N(0,1), a strong signal on the
/// leading coordinates, and mild observation noise.
pub fn gaussian_problem(seed: u64, n: usize, p: usize) -> TestProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut beta = vec![0.0; p];
    for (j, b) in beta.iter_mut().enumerate().take(4.min(p)) {
        *b = if j % 2 == 0 { 1.5 } else { -2.0 };
    }
    let y: Vec<f64> = rows
        .iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            eta + 0.1 * noise
        })
        .collect();
    TestProblem { rows, y }
}

/// Seeded binomial problem with 0/1 labels; both classes are guaranteed.
pub fn binomial_problem(seed: u64, n: usize, p: usize) -> TestProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut beta = vec![0.0; p];
    for (j, b) in beta.iter_mut().enumerate().take(3.min(p)) {
        *b = if j % 2 == 0 { 2.0 } else { -1.5 };
    }
    let mut y: Vec<f64> = rows
        .iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let prob = 1.0 / (1.0 + (-eta).exp());
            if rng.random::<f64>() < prob {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if y.iter().all(|&v| v == y[0]) {
        y[0] = 1.0 - y[0];
    }
    TestProblem { rows, y }
}

/// Pulls the lambda grid out of a written `path.json`.
pub fn grid_of(path_json: &serde_json::Value) -> Vec<f64> {
    path_json["lambdas"]
        .as_array()
        .expect("lambdas array")
        .iter()
        .map(|v| v.as_f64().expect("lambda value"))
        .collect()
}

/// Dense coefficient vector at one level of a written `path.json`.
pub fn dense_level(path_json: &serde_json::Value, m: usize, p: usize) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    for trip in path_json["coefficients"][m].as_array().expect("level array") {
        let j = trip[0].as_u64().expect("feature index") as usize;
        beta[j] = trip[1].as_f64().expect("coefficient");
    }
    beta
}
