//! The `optimize` command.

use clap::ValueEnum;
use qfnet_core::complexity::{q_total, ComplexityReport};
use qfnet_core::optimizer::{combine, optimize_run, OptimizationProblem, OptimizationResult};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::json_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptTarget {
    /// All-equal: a single run.
    Ae,
    /// Full relationship: every run of the schedule.
    R,
}

/// Optimizes every run on the rayon pool. Runs are independent, so the result matches
/// the serial optimizer exactly.
pub fn optimize_parallel(problem: &OptimizationProblem) -> qfnet_core::Result<OptimizationResult> {
    let runs = (1..=problem.runs).into_par_iter().map(|s| optimize_run(problem, s)).collect::<qfnet_core::Result<Vec<_>>>()?;
    combine(problem, runs)
}

pub fn build_problem(cfg: &LoadedConfig, target: OptTarget) -> Result<OptimizationProblem, CliError> {
    let doc = &cfg.doc;
    let pp = doc.protocol()?;
    let runs = match (target, pp.parties()) {
        (OptTarget::R, 4) => 3,
        _ => 1,
    };
    let problem = OptimizationProblem::new(pp, doc.channel()?, doc.encoding.variant, runs)
        .and_then(|p| p.with_grid(doc.optimizer.amplitude_grid()))
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(problem.symmetric(doc.optimizer.symmetric_only))
}

/// Returns the JSON report and whether the result is feasible.
pub fn run(cfg: &LoadedConfig, target: OptTarget) -> Result<(String, bool), CliError> {
    let problem = build_problem(cfg, target)?;
    let result = optimize_parallel(&problem)?;
    let eps = problem.pp.epsilon();
    let complexity = if eps < 1.0 {
        let q_ae = q_total(&result.per_run[..1], problem.pp.n())?;
        let report = ComplexityReport::new(q_ae, result.q_r, problem.pp.n(), problem.pp.parties(), eps)?;
        serde_json::to_value(report).expect("report serializes")
    } else {
        Value::Null
    };
    let target_name = match target {
        OptTarget::Ae => "ae",
        OptTarget::R => "r",
    };
    let text = json_report(
        &cfg.sha256,
        vec![
            ("target", Value::from(target_name)),
            ("codeword_length", Value::from(problem.pp.m())),
            ("warnings", Value::from(problem.pp.warnings())),
            ("result", serde_json::to_value(&result).expect("result serializes")),
            ("complexity", complexity),
        ],
    );
    Ok((text, result.feasible))
}
