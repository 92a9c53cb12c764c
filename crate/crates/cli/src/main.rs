//! `sgl`: batch front end for sparse group lasso modeling.
//!
//! Four subcommands cover the workflow: `fit` writes a regularization path
//! with plot-ready companions, `cv` tunes the penalty level by k-fold
//! cross-validation, `risk` attaches information criteria to a stored
//! Gaussian fit, and `predict` scores new rows from a stored fit. Exit
//! codes: 0 on success, 2 for invalid inputs or flags, 3 when --strict is
//! set and the solver failed to converge somewhere along the path.

mod args;
mod cmds;
mod error;
mod io;
mod store;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmds::cmd_fit(a),
        Command::Cv(a) => cmds::cmd_cv(a),
        Command::Risk(a) => cmds::cmd_risk(a),
        Command::Predict(a) => cmds::cmd_predict(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
