//! The `simulate` command.

use qfnet_core::montecarlo::{Simulator, Tally, TrialReport, TrialSpec};
use qfnet_core::optimizer::{evaluate_fixed, OptimizationProblem};
use qfnet_core::{Pairing, Relationship, RunConfig};
use rayon::prelude::*;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::optimize::optimize_parallel;
use crate::output::json_report;

/// Trials per parallel work item. Tallies merge exactly, so this does not affect output.
const CHUNK: u64 = 1_000;

fn build_spec(cfg: &LoadedConfig, rel: Relationship) -> Result<TrialSpec, CliError> {
    let doc = &cfg.doc;
    let mc = doc.montecarlo()?;
    let pp = doc.protocol()?.with_codeword_length(mc.m).map_err(|e| CliError::Config(format!("montecarlo.m: {e}")))?;
    let ch = doc.channel()?;
    let parties = pp.parties();
    if rel.parties() != parties {
        return Err(CliError::Usage(format!("relationship {rel} has {} senders, config has {parties}", rel.parties())));
    }
    let n_runs = if parties == 4 { 3 } else { 1 };
    let problem = OptimizationProblem::new(pp.clone(), ch.clone(), doc.encoding.variant, n_runs)
        .and_then(|p| p.with_grid(doc.optimizer.amplitude_grid()))
        .map_err(|e| CliError::Config(e.to_string()))?
        .symmetric(doc.optimizer.symmetric_only);
    let runs = match &mc.runs {
        Some(rows) => {
            if rows.len() != n_runs {
                return Err(CliError::Config(format!("montecarlo.runs: {parties} senders need {n_runs} runs, got {}", rows.len())));
            }
            let configs = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let pairing = if parties == 2 { Pairing::identity(2) } else { Pairing::for_run(i + 1)? };
                    RunConfig::new(r.alphas.clone(), pairing, r.thresholds.clone(), doc.encoding.variant)
                })
                .collect::<qfnet_core::Result<Vec<_>>>()
                .and_then(|c| evaluate_fixed(&c, &problem))
                .map_err(|e| CliError::Config(format!("montecarlo.runs: {e}")))?;
            configs.per_run
        }
        None => optimize_parallel(&problem)?.per_run,
    };
    Ok(TrialSpec { rel, pp, ch, runs, trials: mc.trials, seed: mc.seed, sampling: mc.sampling })
}

pub fn run_spec(spec: TrialSpec) -> Result<TrialReport, CliError> {
    let sim = Simulator::new(spec).map_err(|e| CliError::Config(e.to_string()))?;
    let trials = sim.spec().trials;
    let starts: Vec<u64> = (0..trials).step_by(CHUNK as usize).collect();
    let tallies = starts
        .par_iter()
        .map(|&s| sim.run_trials(s..(s + CHUNK).min(trials)))
        .collect::<qfnet_core::Result<Vec<_>>>()?;
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    Ok(sim.report(&total))
}

/// Returns the JSON report and the report itself.
pub fn run(cfg: &LoadedConfig, label: &str) -> Result<(String, TrialReport), CliError> {
    let rel: Relationship = label.parse().map_err(|e| CliError::Usage(format!("relationship {label:?}: {e}")))?;
    let spec = build_spec(cfg, rel)?;
    let spec_json = serde_json::to_value(&spec).expect("spec serializes");
    let report = run_spec(spec)?;
    let text = json_report(
        &cfg.sha256,
        vec![("spec", spec_json), ("report", serde_json::to_value(&report).expect("report serializes"))],
    );
    Ok((text, report))
}
