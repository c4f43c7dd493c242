//! Seeded pulse-level simulation of the whole protocol at desk scale.
//!
//! Codewords are built by exact position budgeting: each worst-case pattern class gets
//! `ceil(weight * m)` positions, so every pair of distinct groups differs on at least
//! `delta * m` positions. Clicks are independent per detector and pulse. Since the counts
//! only depend on how many positions fall in each class, the default sampler draws one
//! binomial per (run, detector, class); [`Sampling::PerPulse`] walks the synthesized
//! codeword pulse by pulse and gives the same distribution.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(trial, run, detector, class)`,
//! so any partition of the trials into chunks, in any order, reproduces the same report.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution};

use crate::decision::{outcome_bits, resolve_f_r, resolve_two_party, Resolution, RunOutcome};
use crate::error::{ensure, Error, Result};
use crate::optics::{click_probability, tree_transfer, Phase, PulsePattern};
use crate::params::{ChannelModel, Encoding, Pairing, ProtocolParams, RunConfig};
use crate::relationship::{GroupPattern, Relationship};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Positions per pattern class: `ceil(weight * m)` for every class that differs somewhere,
/// the rest for the all-agree class.
fn budget(patterns: &[GroupPattern], m: u64) -> Result<Vec<u64>> {
    let mf = m as f64;
    let mut counts = vec![0u64; patterns.len()];
    let mut used = 0u64;
    for (i, p) in patterns.iter().enumerate() {
        if p.flips == 0 {
            continue;
        }
        let x = p.weight * mf;
        let r = libm::round(x);
        // weights like 0.22 * 1000 land a hair above the integer
        let c = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { libm::ceil(x) };
        counts[i] = c as u64;
        used += c as u64;
    }
    ensure!(used <= m, "pattern budget {used} exceeds the codeword length {m}");
    if let Some(i) = patterns.iter().position(|p| p.flips == 0) {
        counts[i] = m - used;
    }
    Ok(counts)
}

/// Joint codewords: the pattern class (group flip mask) of every position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codewords {
    rel: Relationship,
    flips: Vec<u32>,
}

impl Codewords {
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    /// Group flip mask of each position.
    pub fn flips(&self) -> &[u32] {
        &self.flips
    }

    /// Codeword bit of sender `k` at every position.
    pub fn sender_bits(&self, k: usize) -> Vec<u8> {
        let g = self.rel.group_of(k);
        self.flips.iter().map(|f| ((f >> g) & 1) as u8).collect()
    }

    /// Hamming distance between the codewords of senders `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> u64 {
        let (ga, gb) = (self.rel.group_of(a), self.rel.group_of(b));
        self.flips.iter().filter(|f| ((*f >> ga) ^ (*f >> gb)) & 1 == 1).count() as u64
    }
}

/// Codewords for `rel` with worst-case distances, positions shuffled by `rng`.
pub fn synthesize_codewords<R: RngCore + ?Sized>(
    rel: &Relationship,
    pp: &ProtocolParams,
    rng: &mut R,
) -> Result<Codewords> {
    ensure!(pp.m() >= 10, "simulation needs m >= 10, got {}", pp.m());
    ensure!(pp.m() <= 100_000_000, "codeword length {} too large to materialize", pp.m());
    let patterns = rel.pattern_weights(pp.delta())?;
    let counts = budget(&patterns, pp.m())?;
    let mut flips = Vec::with_capacity(pp.m() as usize);
    for (p, &c) in patterns.iter().zip(&counts) {
        flips.extend(core::iter::repeat_n(p.flips, c as usize));
    }
    flips.shuffle(rng);
    Ok(Codewords { rel: rel.clone(), flips })
}

/// How clicks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sampling {
    /// One binomial draw per pattern class.
    #[default]
    Aggregated,
    /// One Bernoulli draw per pulse over a synthesized codeword.
    PerPulse,
}

/// A Monte Carlo campaign for one relationship.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrialSpec {
    pub rel: Relationship,
    pub pp: ProtocolParams,
    pub ch: ChannelModel,
    /// Run 1, 2, 3 configurations (one for two senders), each with thresholds.
    pub runs: Vec<RunConfig>,
    pub trials: u64,
    pub seed: u64,
    pub sampling: Sampling,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.pp.parties();
        ensure!(n == 2 || n == 4, "simulation covers two or four senders, got {n}");
        ensure!(self.rel.parties() == n, "relationship has {} senders, protocol {n}", self.rel.parties());
        self.ch.check_parties(n)?;
        ensure!(self.trials >= 1, "need at least one trial");
        ensure!(self.pp.m() >= 10, "simulation needs m >= 10, got {}", self.pp.m());
        let want = if n == 2 { 1 } else { 3 };
        ensure!(self.runs.len() == want, "{n} senders need {want} run configurations, got {}", self.runs.len());
        for (i, rc) in self.runs.iter().enumerate() {
            rc.validate(&self.pp)?;
            ensure!(rc.encoding() == Encoding::SingleBit, "simulation models single-bit encoding");
            ensure!(!rc.thresholds().is_empty(), "run {} has no thresholds", i + 1);
            let expected = if n == 2 { Pairing::identity(2) } else { Pairing::for_run(i + 1)? };
            ensure!(rc.pairing() == &expected, "run {} must use pairing {expected}", i + 1);
        }
        Ok(())
    }
}

/// Count statistics of one detector in one run, over the trials that executed the run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DetectorStats {
    /// One-based run number.
    pub run: usize,
    /// One-based detector number.
    pub detector: usize,
    pub samples: u64,
    pub mean: f64,
    pub variance: f64,
    /// Expected count under the budgeted codewords.
    pub expected_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrialReport {
    pub relationship: Relationship,
    pub trials: u64,
    pub correct_rate: f64,
    pub incorrect_rate: f64,
    pub inconsistent_rate: f64,
    pub mean_runs_used: f64,
    /// Wilson 95% interval on the correct rate.
    pub wilson_interval: (f64, f64),
    pub detector_stats: Vec<DetectorStats>,
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf));
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Per-class click probabilities of one run: `probs[detector][class]` for D2..DN.
struct RunModel {
    probs: Vec<Vec<f64>>,
    thresholds: Vec<u64>,
}

/// Order-independent running totals; merge chunks in any order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tally {
    trials: u64,
    correct: u64,
    inconsistent: u64,
    runs_used: u64,
    /// `[run][detector] -> (samples, sum, sum of squares)`
    moments: Vec<Vec<(u64, u128, u128)>>,
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        self.correct += other.correct;
        self.inconsistent += other.inconsistent;
        self.runs_used += other.runs_used;
        if self.moments.is_empty() {
            self.moments = other.moments.clone();
            return;
        }
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
                x.2 += y.2;
            }
        }
    }
}

/// Prepared simulation: pattern classes, their budgets and per-class probabilities.
pub struct Simulator {
    spec: TrialSpec,
    patterns: Vec<GroupPattern>,
    counts: Vec<u64>,
    runs: Vec<RunModel>,
    key: [u8; 32],
}

/// Stream slot outside any detector or class index.
const SHARED: usize = (1 << 20) - 1;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl Simulator {
    pub fn new(spec: TrialSpec) -> Result<Self> {
        spec.validate()?;
        let patterns = spec.rel.pattern_weights(spec.pp.delta())?;
        let counts = budget(&patterns, spec.pp.m())?;
        let n = spec.pp.parties();
        let m = spec.pp.m() as f64;
        let mut runs = Vec::with_capacity(spec.runs.len());
        for rc in &spec.runs {
            let amp: Vec<f64> = (0..n).map(|k| spec.ch.sqrt_eta(k) * rc.alphas()[k] / libm::sqrt(m)).collect();
            let mut probs = vec![Vec::with_capacity(patterns.len()); n - 1];
            for p in &patterns {
                let bits = p.sender_bits(&spec.rel);
                let phases: Vec<Phase> = rc.pairing().apply(&bits).into_iter().map(Phase::from_bit).collect();
                let di = tree_transfer(&PulsePattern::new(phases, rc.pairing().apply(&amp))?)?;
                for (d, row) in probs.iter_mut().enumerate() {
                    row.push(click_probability(
                        di.intensities[d + 1],
                        spec.ch.dark_count(),
                        spec.ch.visibility(),
                        di.complements[d + 1],
                    )?);
                }
            }
            runs.push(RunModel { probs, thresholds: rc.thresholds().to_vec() });
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix(spec.seed ^ (i as u64).wrapping_mul(0x5851_f42d_4c95_7f2d)).to_le_bytes());
        }
        Ok(Simulator { spec, patterns, counts, runs, key })
    }

    pub fn spec(&self) -> &TrialSpec {
        &self.spec
    }

    fn stream(&self, trial: u64, run: usize, detector: usize, class: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        let id = splitmix(trial ^ splitmix(((run as u64) << 40) ^ ((detector as u64) << 20) ^ class as u64));
        rng.set_stream(id);
        rng
    }

    fn sample_count(&self, trial: u64, run: usize, detector: usize) -> Result<u64> {
        let probs = &self.runs[run].probs[detector];
        match self.spec.sampling {
            Sampling::Aggregated => {
                let mut total = 0;
                for (c, (&n, &p)) in self.counts.iter().zip(probs).enumerate() {
                    if n == 0 || p == 0.0 {
                        continue;
                    }
                    let dist = Binomial::new(n, p).map_err(|e| Error::domain(format!("binomial({n}, {p}): {e}")))?;
                    total += dist.sample(&mut self.stream(trial, run, detector, c));
                }
                Ok(total)
            }
            Sampling::PerPulse => {
                // the codeword is drawn from its own stream, shared by all detectors of the run
                let words = synthesize_codewords(&self.spec.rel, &self.spec.pp, &mut self.stream(trial, run, SHARED, 0))?;
                let class_of = |f: u32| self.patterns.iter().position(|p| p.flips == f).unwrap_or(0);
                let mut rng = self.stream(trial, run, detector, SHARED);
                Ok(words.flips().iter().filter(|&&f| rng.random_bool(probs[class_of(f)])).count() as u64)
            }
        }
    }

    /// Simulates trials `range` (zero-based) and returns their totals.
    pub fn run_trials(&self, range: Range<u64>) -> Result<Tally> {
        let n = self.spec.pp.parties();
        let mut tally = Tally {
            moments: vec![vec![(0, 0, 0); n - 1]; self.runs.len()],
            ..Tally::default()
        };
        for trial in range {
            tally.trials += 1;
            let mut seen: Vec<RunOutcome> = Vec::new();
            let mut verdict = None;
            for (r, model) in self.runs.iter().enumerate() {
                let counts = (0..n - 1).map(|d| self.sample_count(trial, r, d)).collect::<Result<Vec<u64>>>()?;
                for (slot, &c) in tally.moments[r].iter_mut().zip(&counts) {
                    slot.0 += 1;
                    slot.1 += c as u128;
                    slot.2 += (c as u128) * (c as u128);
                }
                seen.push(outcome_bits(&counts, &model.thresholds)?);
                let step = if n == 2 {
                    resolve_two_party(&seen[0]).map(Resolution::Resolved)
                } else {
                    resolve_f_r(&seen)
                };
                match step {
                    Ok(Resolution::Resolved(d)) => {
                        verdict = Some(Ok(d));
                        break;
                    }
                    Ok(Resolution::NeedMoreRuns { .. }) => {}
                    Err(Error::InconsistentOutcome(_)) => {
                        verdict = Some(Err(()));
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            tally.runs_used += seen.len() as u64;
            match verdict {
                Some(Ok(d)) if d.relationship == self.spec.rel => tally.correct += 1,
                Some(Ok(_)) => {}
                _ => tally.inconsistent += 1,
            }
        }
        Ok(tally)
    }

    /// Turns totals into the report.
    pub fn report(&self, tally: &Tally) -> TrialReport {
        let t = tally.trials.max(1) as f64;
        let mut detector_stats = Vec::new();
        for (r, row) in tally.moments.iter().enumerate() {
            for (d, &(k, s, s2)) in row.iter().enumerate() {
                let kf = k as f64;
                let mean = if k > 0 { s as f64 / kf } else { 0.0 };
                let variance = if k > 1 { (s2 as f64 - kf * mean * mean) / (kf - 1.0) } else { 0.0 };
                let expected_mean = self.counts.iter().zip(&self.runs[r].probs[d]).map(|(&n, &p)| n as f64 * p).sum();
                detector_stats.push(DetectorStats { run: r + 1, detector: d + 2, samples: k, mean, variance, expected_mean });
            }
        }
        let incorrect = tally.trials - tally.correct - tally.inconsistent;
        TrialReport {
            relationship: self.spec.rel.clone(),
            trials: tally.trials,
            correct_rate: tally.correct as f64 / t,
            incorrect_rate: incorrect as f64 / t,
            inconsistent_rate: tally.inconsistent as f64 / t,
            mean_runs_used: tally.runs_used as f64 / t,
            wilson_interval: wilson_interval(tally.correct, tally.trials, WILSON_Z),
            detector_stats,
        }
    }
}

/// Runs every trial of `spec` serially.
pub fn simulate(spec: &TrialSpec) -> Result<TrialReport> {
    let sim = Simulator::new(spec.clone())?;
    let tally = sim.run_trials(0..spec.trials)?;
    Ok(sim.report(&tally))
}
