//! `qfnet`: reproduce published tables, optimize photon budgets, run Monte Carlo campaigns.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 infeasible.

mod config;
mod error;
mod optimize;
mod output;
mod reproduce;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qfnet_core::decision::decision_table;
use qfnet_core::CodeLength;

use crate::error::CliError;
use crate::optimize::OptTarget;
use crate::output::{emit, sig6, Csv};
use crate::reproduce::TableId;

#[derive(Parser)]
#[command(name = "qfnet", version, about = "Multi-party coherent-state fingerprinting networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodeLengthArg {
    /// m = round(c n)
    Expansion,
    /// m = round(n / c)
    Rate,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a published table and re-optimize the same instance (CSV).
    Reproduce {
        #[arg(value_enum)]
        table: TableId,
        #[arg(long, value_enum, default_value = "expansion")]
        code_length: CodeLengthArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the photon budget for a configuration (JSON).
    Optimize {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "r")]
        target: OptTarget,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo campaign for one relationship (JSON).
    Simulate {
        config: PathBuf,
        #[arg(long)]
        relationship: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the referee's decision table (CSV).
    DecisionTable {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Digest for commands without a config file: the canonical argument string.
fn args_digest(canonical: &str) -> String {
    config::sha256_hex(canonical.as_bytes())
}

fn decision_csv(n: usize) -> Result<String, CliError> {
    if n != 3 && n != 4 {
        return Err(CliError::Usage(format!("decision tables exist for --n 3 or 4, got {n}")));
    }
    let mut csv = Csv::new(&args_digest(&format!("decision-table --n {n}")), &["relationship", "R1", "R2", "R3", "f_r"]);
    for row in decision_table(n)? {
        let mut cells = vec![row.label.clone()];
        for i in 0..3 {
            cells.push(row.signature.get(i).map(ToString::to_string).unwrap_or_default());
        }
        cells.push(row.f_r.to_string());
        csv.row(&cells);
    }
    Ok(csv.finish())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reproduce { table, code_length, out } => {
            let (cl, cl_name) = match code_length {
                CodeLengthArg::Expansion => (CodeLength::Expansion, "expansion"),
                CodeLengthArg::Rate => (CodeLength::Rate, "rate"),
            };
            let sha = args_digest(&format!("reproduce {} --code-length {cl_name}", table.name()));
            emit(out.as_deref(), &reproduce::reproduce(table, cl, &sha)?)
        }
        Command::Optimize { config, target, out } => {
            let cfg = config::load(&config)?;
            let (text, feasible) = optimize::run(&cfg, target)?;
            emit(out.as_deref(), &text)?;
            if feasible {
                Ok(())
            } else {
                Err(CliError::Infeasible("no amplitudes within the bounds meet the error budget; minimal error reported".into()))
            }
        }
        Command::Simulate { config, relationship, out } => {
            let cfg = config::load(&config)?;
            let (text, report) = simulate::run(&cfg, &relationship)?;
            emit(out.as_deref(), &text)?;
            let (lo, hi) = report.wilson_interval;
            eprintln!(
                "{}: correct rate {} over {} trials, 95% Wilson interval [{}, {}]",
                report.relationship,
                sig6(report.correct_rate),
                report.trials,
                sig6(lo),
                sig6(hi)
            );
            Ok(())
        }
        Command::DecisionTable { n, out } => emit(out.as_deref(), &decision_csv(n)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfnet: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_party_table_rows() {
        let csv = decision_csv(4).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "relationship,R1,R2,R3,f_r");
        assert_eq!(lines.len(), 2 + 18);
        assert!(lines.contains(&"AABA,011,110,,12"));
        assert!(lines.contains(&"ABCD,111,111,101,0"));
        assert_eq!(decision_csv(3).unwrap().lines().count(), 2 + 5);
        assert!(matches!(decision_csv(5), Err(CliError::Usage(_))));
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
