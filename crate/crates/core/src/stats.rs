//! Count distributions, tails, thresholds and the protocol error probability.
//!
//! A detector's click count over `m'` pulses is binomial. Tails are summed term by term
//! from the threshold outward, always on the side that is the small probability, so that
//! values like `1e-300` are resolved rather than lost to `1 - (1 - x)`.

use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::numeric::{binomial_pmf, poisson_pmf, Neumaier};
use crate::probmodel::ProfilePair;

/// Above this many pulses, and with `p` at most [`POISSON_MAX_P`], [`CountModel::auto`]
/// picks the Poisson law.
pub const POISSON_MIN_PULSES: u64 = 1_000_000;
pub const POISSON_MAX_P: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Law {
    BinomialExact,
    PoissonApprox,
    GaussianApprox,
}

/// Click count over `pulses` independent pulses with click probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CountModel {
    pulses: u64,
    p: f64,
    law: Law,
}

impl CountModel {
    pub fn new(pulses: u64, p: f64, law: Law) -> Result<Self> {
        ensure!((0.0..=1.0).contains(&p), "click probability {p} outside [0, 1]");
        ensure!(pulses < (1u64 << 53), "pulse count {pulses} too large");
        Ok(CountModel { pulses, p, law })
    }

    /// Poisson for long, sparse trains, exact binomial otherwise.
    pub fn auto(pulses: u64, p: f64) -> Result<Self> {
        let law = if pulses > POISSON_MIN_PULSES && p <= POISSON_MAX_P {
            Law::PoissonApprox
        } else {
            Law::BinomialExact
        };
        Self::new(pulses, p, law)
    }

    pub fn pulses(&self) -> u64 {
        self.pulses
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn law(&self) -> Law {
        self.law
    }

    pub fn mean(&self) -> f64 {
        self.pulses as f64 * self.p
    }

    pub fn variance(&self) -> f64 {
        match self.law {
            Law::PoissonApprox => self.mean(),
            _ => self.pulses as f64 * self.p * (1.0 - self.p),
        }
    }

    /// `P(C = k)`. The Gaussian law reports the continuity-corrected interval mass.
    pub fn pmf(&self, k: u64) -> f64 {
        let n = self.pulses as f64;
        let x = k as f64;
        match self.law {
            Law::BinomialExact => binomial_pmf(x, n, self.p, 1.0 - self.p),
            Law::PoissonApprox => poisson_pmf(x, self.mean()),
            Law::GaussianApprox => gauss_upper(self, x - 0.5) - gauss_upper(self, x + 0.5),
        }
    }

    fn mode(&self) -> u64 {
        match self.law {
            Law::BinomialExact => {
                let m = libm::floor((self.pulses as f64 + 1.0) * self.p) as u64;
                m.min(self.pulses)
            }
            _ => libm::floor(self.mean()) as u64,
        }
    }

    fn upper_bound(&self) -> u64 {
        match self.law {
            Law::BinomialExact => self.pulses,
            _ => u64::MAX,
        }
    }

    /// `pmf(j + 1) / pmf(j)`.
    fn ratio_up(&self, j: u64) -> f64 {
        match self.law {
            Law::BinomialExact => {
                (self.pulses - j) as f64 / (j + 1) as f64 * (self.p / (1.0 - self.p))
            }
            _ => self.mean() / (j + 1) as f64,
        }
    }

    /// `pmf(j - 1) / pmf(j)`.
    fn ratio_down(&self, j: u64) -> f64 {
        match self.law {
            Law::BinomialExact => {
                j as f64 / (self.pulses - j + 1) as f64 * ((1.0 - self.p) / self.p)
            }
            _ => j as f64 / self.mean(),
        }
    }
}

/// Gaussian `P(X > x)` with the binomial mean and variance.
fn gauss_upper(model: &CountModel, x: f64) -> f64 {
    let mu = model.mean();
    let sd = libm::sqrt(model.variance());
    if sd == 0.0 {
        return if x < mu { 1.0 } else { 0.0 };
    }
    0.5 * libm::erfc((x - mu) / (sd * core::f64::consts::SQRT_2))
}

/// Gaussian `P(X < x)`.
fn gauss_lower(model: &CountModel, x: f64) -> f64 {
    let mu = model.mean();
    let sd = libm::sqrt(model.variance());
    if sd == 0.0 {
        return if x > mu { 1.0 } else { 0.0 };
    }
    0.5 * libm::erfc((mu - x) / (sd * core::f64::consts::SQRT_2))
}

/// Sum of a run of pmf terms that decrease away from `start`.
fn sum_outward(model: &CountModel, start: u64, upward: bool) -> f64 {
    let mut term = model.pmf(start);
    let mut acc = Neumaier::default();
    let mut j = start;
    let stop = model.upper_bound();
    let mut steps = 0u32;
    loop {
        if term == 0.0 {
            break;
        }
        acc.add(term);
        if term < acc.value() * 1e-18 {
            break;
        }
        if upward {
            if j >= stop {
                break;
            }
            term *= model.ratio_up(j);
            j += 1;
        } else {
            if j == 0 {
                break;
            }
            term *= model.ratio_down(j);
            j -= 1;
        }
        steps += 1;
        // Re-anchor on the saddle-point value to keep recurrence error bounded.
        if steps.is_multiple_of(512) {
            term = model.pmf(j);
        }
    }
    acc.value()
}

/// `(P(C <= k), P(C > k))`, with the smaller side summed directly.
fn split(model: &CountModel, k: u64) -> (f64, f64) {
    if model.law == Law::GaussianApprox {
        let x = k as f64 + 0.5;
        return (gauss_lower(model, x), gauss_upper(model, x));
    }
    if k >= model.upper_bound() {
        return (1.0, 0.0);
    }
    if k >= model.mode() {
        let up = sum_outward(model, k + 1, true).min(1.0);
        (1.0 - up, up)
    } else {
        let low = sum_outward(model, k, false).min(1.0);
        (low, 1.0 - low)
    }
}

fn check_threshold(model: &CountModel, t: u64) -> Result<()> {
    ensure!(t <= model.pulses, "threshold {t} exceeds {} pulses", model.pulses);
    Ok(())
}

/// `P(C > t)`.
pub fn tail_above(model: &CountModel, t: u64) -> Result<f64> {
    check_threshold(model, t)?;
    Ok(split(model, t).1)
}

/// `P(C < t)`.
pub fn tail_below(model: &CountModel, t: u64) -> Result<f64> {
    check_threshold(model, t)?;
    if t == 0 {
        return Ok(0.0);
    }
    Ok(split(model, t - 1).0)
}

/// Chernoff upper bound on `P(C > t)`; a diagnostic, not used for decisions.
pub fn chernoff_above(model: &CountModel, t: u64) -> f64 {
    let n = model.pulses as f64;
    let a = (t as f64 + 1.0) / n;
    let p = model.p;
    if a <= p {
        return 1.0;
    }
    if a >= 1.0 {
        return libm::pow(p, n);
    }
    let kl = a * libm::log(a / p) + (1.0 - a) * libm::log((1.0 - a) / (1.0 - p));
    libm::exp(-n * kl)
}

/// A threshold and the two wrong-side tails it leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ThresholdChoice {
    pub threshold: u64,
    /// `max(tail_equal, tail_different)`.
    pub error: f64,
    /// `P(C_equal > t)`.
    pub tail_equal: f64,
    /// `P(C_different < t)`.
    pub tail_different: f64,
    /// Set when the Different mean does not exceed the Equal mean.
    pub degenerate: bool,
}

fn evaluate(equal: &CountModel, diff: &CountModel, t: u64) -> Result<ThresholdChoice> {
    let a = tail_above(equal, t)?;
    let b = tail_below(diff, t)?;
    Ok(ThresholdChoice {
        threshold: t,
        error: a.max(b),
        tail_equal: a,
        tail_different: b,
        degenerate: diff.mean() <= equal.mean(),
    })
}

/// Threshold `t >= 1` minimizing `max(P(C_equal > t), P(C_different < t))`, ties toward
/// the smaller `t`.
///
/// The first tail falls and the second rises with `t`, so the optimum sits next to their
/// crossing, which is found by bisection.
pub fn best_threshold(equal: &CountModel, diff: &CountModel) -> Result<ThresholdChoice> {
    let top = equal.pulses.min(diff.pulses);
    ensure!(top >= 1, "need at least one pulse to place a threshold");
    let crosses = |t: u64| -> Result<bool> { Ok(tail_below(diff, t)? >= tail_above(equal, t)?) };
    let (mut lo, mut hi) = (1u64, top);
    if !crosses(top)? {
        lo = top;
    } else {
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if crosses(mid)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }
    let at = evaluate(equal, diff, lo)?;
    if lo == 1 {
        return Ok(at);
    }
    let before = evaluate(equal, diff, lo - 1)?;
    if at.error < before.error {
        return Ok(at);
    }
    // Below the crossing the objective is the falling Equal tail; walk back over a plateau.
    let target = before.error;
    let (mut a, mut b) = (1u64, lo - 1);
    while a < b {
        let mid = a + (b - a) / 2;
        if tail_above(equal, mid)?.max(tail_below(diff, mid)?) <= target {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    evaluate(equal, diff, a)
}

/// Which wrong-side tail produced an error value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Side {
    /// Equal inputs counted above the threshold.
    FalseDifferent,
    /// Different inputs counted below the threshold.
    FalseEqual,
}

/// The protocol error probability and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ErrorReport {
    pub value: f64,
    /// Zero-based run index.
    pub run: usize,
    /// One-based detector number.
    pub detector: usize,
    pub side: Side,
}

/// Largest wrong-side tail over all runs and observed detectors.
///
/// `thresholds[r]` lists one threshold per detector of run `r`, in the profile's order.
pub fn error_probability(pairs: &[ProfilePair], thresholds: &[Vec<u64>]) -> Result<ErrorReport> {
    ensure!(!pairs.is_empty(), "no runs to evaluate");
    ensure!(
        pairs.len() == thresholds.len(),
        "{} runs but {} threshold lists",
        pairs.len(),
        thresholds.len()
    );
    let mut worst: Option<ErrorReport> = None;
    for (r, (pair, th)) in pairs.iter().zip(thresholds).enumerate() {
        ensure!(
            pair.equal.detectors() == pair.different.detectors(),
            "run {r}: Equal and Different profiles cover different detectors"
        );
        ensure!(
            th.len() == pair.equal.detectors().len(),
            "run {r}: {} thresholds for {} detectors",
            th.len(),
            pair.equal.detectors().len()
        );
        for (i, &t) in th.iter().enumerate() {
            let e = CountModel::auto(pair.equal.pulses(), pair.equal.probabilities()[i])?;
            let d = CountModel::auto(pair.different.pulses(), pair.different.probabilities()[i])?;
            let detector = pair.equal.detectors()[i];
            for (value, side) in
                [(tail_above(&e, t)?, Side::FalseDifferent), (tail_below(&d, t)?, Side::FalseEqual)]
            {
                if worst.is_none_or(|w| value > w.value) {
                    worst = Some(ErrorReport { value, run: r, detector, side });
                }
            }
        }
    }
    Ok(worst.unwrap())
}

/// Best threshold per detector of one run, and the run's error probability.
pub fn run_thresholds(pair: &ProfilePair) -> Result<(Vec<u64>, f64)> {
    let mut th = Vec::with_capacity(pair.equal.detectors().len());
    let mut worst: f64 = 0.0;
    for i in 0..pair.equal.detectors().len() {
        let e = CountModel::auto(pair.equal.pulses(), pair.equal.probabilities()[i])?;
        let d = CountModel::auto(pair.different.pulses(), pair.different.probabilities()[i])?;
        let c = best_threshold(&e, &d)?;
        th.push(c.threshold);
        worst = worst.max(c.error);
    }
    Ok((th, worst))
}
