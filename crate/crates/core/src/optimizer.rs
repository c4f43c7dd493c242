//! Photon-budget minimization subject to the error constraint `P_e <= epsilon`.
//!
//! Runs are independent: each run gets its own amplitudes and thresholds, and the protocol
//! error is the worst run. So each run is minimized separately. Within a run the amplitude
//! vector is written `alpha = r * u` with `|u| = 1`; since the cost is `r^2 log2 n`, the
//! inner problem is the smallest feasible radius along a direction, found by a safeguarded
//! secant search (the error falls as the radius grows). The direction is searched by
//! coordinate descent over log-multipliers with a coarse grid and golden-section refinement.

use alloc::vec;
use alloc::vec::Vec;

use crate::complexity::q_total;
use crate::error::{ensure, Result};
use crate::params::{ChannelModel, Encoding, Pairing, ProtocolParams, RunConfig};
use crate::probmodel::run_profiles;
use crate::stats::{error_probability, run_thresholds};

/// Search bounds for every amplitude, and the coarse-grid resolution per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AmplitudeGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for AmplitudeGrid {
    fn default() -> Self {
        AmplitudeGrid { min: 0.1, max: 2000.0, points: 9 }
    }
}

/// An instance to optimize.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OptimizationProblem {
    pub pp: ProtocolParams,
    pub ch: ChannelModel,
    pub encoding: Encoding,
    /// Runs to budget: 1 for two senders; 1 (all-equal) up to 3 (full relationship) for four.
    pub runs: usize,
    pub grid: AmplitudeGrid,
    /// Restrict to a common amplitude for all senders.
    pub symmetric_only: bool,
}

impl OptimizationProblem {
    pub fn new(pp: ProtocolParams, ch: ChannelModel, encoding: Encoding, runs: usize) -> Result<Self> {
        let p = OptimizationProblem {
            pp,
            ch,
            encoding,
            runs,
            grid: AmplitudeGrid::default(),
            symmetric_only: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_grid(mut self, grid: AmplitudeGrid) -> Result<Self> {
        self.grid = grid;
        self.validate()?;
        Ok(self)
    }

    pub fn symmetric(mut self, on: bool) -> Self {
        self.symmetric_only = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        ensure!(
            g.min.is_finite() && g.max.is_finite() && g.min > 0.0 && g.min <= g.max,
            "amplitude bounds [{}, {}] must be positive, finite and ordered",
            g.min,
            g.max
        );
        ensure!(g.points >= 3, "grid needs at least 3 points, got {}", g.points);
        self.ch.check_parties(self.pp.parties())?;
        match self.pp.parties() {
            2 => ensure!(self.runs == 1, "two senders need exactly one run, got {}", self.runs),
            4 => {
                ensure!((1..=3).contains(&self.runs), "four senders budget 1 to 3 runs, got {}", self.runs);
                ensure!(self.encoding == Encoding::SingleBit, "two-bit encoding is modelled for two senders only");
            }
            n => ensure!(false, "optimizer covers two or four senders, got {n}"),
        }
        self.encoding.pulses(self.pp.m())?;
        Ok(())
    }

    /// Port assignment of run `run` (1-based).
    pub fn pairing(&self, run: usize) -> Result<Pairing> {
        if self.pp.parties() == 2 {
            ensure!(run == 1, "two senders have a single run");
            Ok(Pairing::identity(2))
        } else {
            Pairing::for_run(run)
        }
    }
}

/// Best configuration found for one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RunResult {
    pub run: usize,
    pub config: RunConfig,
    pub p_e: f64,
    pub feasible: bool,
    /// Error evaluations spent on this run.
    pub evaluations: u64,
    pub sweeps: usize,
}

/// Search diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OptimizationTrace {
    pub evaluations: u64,
    pub sweeps: Vec<usize>,
    pub run_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OptimizationResult {
    pub per_run: Vec<RunConfig>,
    pub q_r: f64,
    pub p_e: f64,
    pub feasible: bool,
    pub trace: OptimizationTrace,
}

const RADIUS_TOL: f64 = 1e-7;
const WEIGHT_TOL: f64 = 2e-3;
const MIN_GAIN: f64 = 1e-6;
const MAX_SWEEPS: usize = 8;
const INITIAL_SPAN: f64 = 0.7;
const MIN_SPAN: f64 = 0.05;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct RunSearch<'a> {
    problem: &'a OptimizationProblem,
    pairing: Pairing,
    base: Vec<f64>,
    log_eps: f64,
    evaluations: u64,
    /// Lowest error seen at the upper radius of any direction that never became feasible.
    fallback: Option<(f64, Vec<f64>)>,
}

#[derive(Clone)]
struct Point {
    radius: f64,
    alphas: Vec<f64>,
}

impl<'a> RunSearch<'a> {
    fn new(problem: &'a OptimizationProblem, run: usize) -> Result<Self> {
        let pairing = problem.pairing(run)?;
        let eta = problem.ch.eta();
        let base = if eta.iter().all(|&e| e > 0.0) && !problem.symmetric_only {
            eta.iter().map(|e| 1.0 / libm::sqrt(*e)).collect()
        } else {
            vec![1.0; eta.len()]
        };
        Ok(RunSearch {
            problem,
            pairing,
            base,
            log_eps: libm::log(problem.pp.epsilon()),
            evaluations: 0,
            fallback: None,
        })
    }

    fn config(&self, alphas: Vec<f64>) -> Result<RunConfig> {
        RunConfig::new(alphas, self.pairing.clone(), vec![], self.problem.encoding)
    }

    /// Thresholds and error of the run at the given amplitudes.
    fn error(&mut self, alphas: &[f64]) -> Result<(Vec<u64>, f64)> {
        self.evaluations += 1;
        let rc = self.config(alphas.to_vec())?;
        run_thresholds(&run_profiles(&rc, &self.problem.ch, &self.problem.pp)?)
    }

    fn direction(&self, w: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = self.base.iter().zip(w).map(|(b, x)| b * libm::exp(*x)).collect();
        let norm = libm::sqrt(u.iter().map(|x| x * x).sum::<f64>());
        u.iter_mut().for_each(|x| *x /= norm);
        u
    }

    fn scale(&self, u: &[f64], r: f64) -> Vec<f64> {
        let g = &self.problem.grid;
        u.iter().map(|x| (x * r).clamp(g.min, g.max)).collect()
    }

    /// `ln P_e - ln epsilon`; nonpositive means feasible.
    fn gap(&mut self, u: &[f64], r: f64) -> Result<f64> {
        let a = self.scale(u, r);
        let (_, pe) = self.error(&a)?;
        Ok(libm::log(pe.max(1e-300)) - self.log_eps)
    }

    /// Smallest feasible radius along `u` within the bounds.
    fn min_radius(&mut self, u: &[f64], hint: f64) -> Result<Option<Point>> {
        let g = self.problem.grid;
        let r_min = u.iter().map(|x| g.min / x).fold(0.0, f64::max);
        let r_max = u.iter().map(|x| g.max / x).fold(f64::INFINITY, f64::min);
        if !(r_min <= r_max) {
            return Ok(None);
        }
        let found = |s: &Self, r: f64| Some(Point { radius: r, alphas: s.scale(u, r) });
        let g_min = self.gap(u, r_min)?;
        if g_min <= 0.0 {
            return Ok(found(self, r_min));
        }
        // bracket [lo infeasible, hi feasible], starting from the hint
        let (mut lo, mut g_lo) = (r_min, g_min);
        let mut hi = hint.clamp(r_min, r_max);
        let mut g_hi = self.gap(u, hi)?;
        let mut step = 1.05;
        while g_hi > 0.0 {
            if hi >= r_max {
                let pe = libm::exp(g_hi + self.log_eps);
                if self.fallback.as_ref().is_none_or(|(best, _)| pe < *best) {
                    self.fallback = Some((pe, self.scale(u, r_max)));
                }
                return Ok(None);
            }
            lo = hi;
            g_lo = g_hi;
            hi = (hi * step).min(r_max);
            step *= step;
            g_hi = self.gap(u, hi)?;
        }
        if lo == r_min && hi > r_min * 1.05 {
            let mut probe = hi / 1.05;
            let mut step = 1.05;
            while probe > lo {
                let gp = self.gap(u, probe)?;
                if gp > 0.0 {
                    lo = probe;
                    g_lo = gp;
                    break;
                }
                hi = probe;
                g_hi = gp;
                step *= step;
                probe = (hi / step).max(lo);
                if probe == lo {
                    break;
                }
            }
        }
        let mut last_side = 0i8;
        while hi / lo - 1.0 > RADIUS_TOL {
            let width = hi - lo;
            let mut r = if last_side.abs() >= 2 || !g_lo.is_finite() || !g_hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                lo + width * g_lo / (g_lo - g_hi)
            };
            r = r.clamp(lo + 0.02 * width, hi - 0.02 * width);
            let gr = self.gap(u, r)?;
            if gr <= 0.0 {
                hi = r;
                g_hi = gr;
                last_side = if last_side > 0 { last_side + 1 } else { 1 };
            } else {
                lo = r;
                g_lo = gr;
                last_side = if last_side < 0 { last_side - 1 } else { -1 };
            }
            if last_side.abs() > 2 {
                last_side = 0;
            }
        }
        Ok(found(self, hi))
    }

    fn cost(&mut self, w: &[f64], hint: f64) -> Result<(f64, Option<Point>)> {
        let u = self.direction(w);
        let p = self.min_radius(&u, hint)?;
        let c = p.as_ref().map_or(f64::INFINITY, |p| p.radius * p.radius);
        Ok((c, p))
    }

    fn run(mut self, run: usize) -> Result<RunResult> {
        let n = self.base.len();
        let g = self.problem.grid;
        let pp = &self.problem.pp;
        if pp.epsilon() >= 1.0 {
            let alphas = vec![g.min; n];
            return self.finish(run, alphas, 0);
        }
        let mut w = vec![0.0; n];
        let start_hint = libm::sqrt(g.min * g.max) * libm::sqrt(n as f64);
        let (mut best, mut best_point) = self.cost(&w, start_hint)?;
        let mut sweeps = 0;
        if !self.problem.symmetric_only && n > 1 {
            let mut span = INITIAL_SPAN;
            while sweeps < MAX_SWEEPS {
                sweeps += 1;
                let before = best;
                for k in 1..n {
                    let hint = best_point.as_ref().map_or(start_hint, |p| p.radius);
                    let centre = w[k];
                    let h = 2.0 * span / (g.points - 1) as f64;
                    let mut grid_best = (best, centre);
                    for i in 0..g.points {
                        let x = centre - span + h * i as f64;
                        if x == centre {
                            continue;
                        }
                        w[k] = x;
                        let (c, p) = self.cost(&w, hint)?;
                        if c < grid_best.0 {
                            grid_best = (c, x);
                            best_point = p;
                        }
                    }
                    best = grid_best.0;
                    w[k] = grid_best.1;
                    if best.is_finite() {
                        let (c, x, p) = self.golden(&mut w, k, grid_best.1 - h, grid_best.1 + h)?;
                        if c < best {
                            best = c;
                            w[k] = x;
                            best_point = p;
                        }
                    }
                }
                let gain = if before.is_finite() { (before - best) / before } else { f64::INFINITY };
                if sweeps >= 2 && gain.is_finite() && gain < MIN_GAIN {
                    break;
                }
                span = (span * 0.5).max(MIN_SPAN);
            }
        }
        let alphas = match best_point {
            Some(p) => p.alphas,
            None => match self.fallback.take() {
                Some((_, a)) => a,
                None => vec![g.max; n],
            },
        };
        self.finish(run, alphas, sweeps)
    }

    /// Golden-section minimum of the cost along coordinate `k` over `[a, b]`.
    fn golden(&mut self, w: &mut [f64], k: usize, mut a: f64, mut b: f64) -> Result<(f64, f64, Option<Point>)> {
        let mut best: (f64, f64, Option<Point>) = (f64::INFINITY, w[k], None);
        let eval = |s: &mut Self, w: &mut [f64], x: f64, best: &mut (f64, f64, Option<Point>)| -> Result<f64> {
            let hint = best.2.as_ref().map(|p| p.radius);
            w[k] = x;
            let (c, p) = s.cost(w, hint.unwrap_or(1.0))?;
            if c < best.0 {
                *best = (c, x, p);
            }
            Ok(c)
        };
        let saved = w[k];
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = eval(self, w, x1, &mut best)?;
        let mut f2 = eval(self, w, x2, &mut best)?;
        while b - a > WEIGHT_TOL {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = eval(self, w, x1, &mut best)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = eval(self, w, x2, &mut best)?;
            }
        }
        w[k] = saved;
        Ok(best)
    }

    fn finish(mut self, run: usize, alphas: Vec<f64>, sweeps: usize) -> Result<RunResult> {
        let (thresholds, p_e) = self.error(&alphas)?;
        let config = self.config(alphas)?.with_thresholds(thresholds)?;
        Ok(RunResult {
            run,
            config,
            p_e,
            feasible: p_e <= self.problem.pp.epsilon(),
            evaluations: self.evaluations,
            sweeps,
        })
    }
}

/// Minimizes the photon budget of run `run` (1-based). Independent of the other runs, so
/// callers may evaluate runs in parallel and pass the results to [`combine`].
pub fn optimize_run(problem: &OptimizationProblem, run: usize) -> Result<RunResult> {
    problem.validate()?;
    ensure!((1..=problem.runs).contains(&run), "run {run} outside 1..={}", problem.runs);
    RunSearch::new(problem, run)?.run(run)
}

/// Assembles per-run results (in any order) into the protocol result.
pub fn combine(problem: &OptimizationProblem, mut runs: Vec<RunResult>) -> Result<OptimizationResult> {
    runs.sort_by_key(|r| r.run);
    ensure!(
        runs.len() == problem.runs && runs.iter().enumerate().all(|(i, r)| r.run == i + 1),
        "expected one result for each of runs 1..={}",
        problem.runs
    );
    let trace = OptimizationTrace {
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        sweeps: runs.iter().map(|r| r.sweeps).collect(),
        run_errors: runs.iter().map(|r| r.p_e).collect(),
    };
    let configs: Vec<RunConfig> = runs.into_iter().map(|r| r.config).collect();
    let mut out = evaluate_fixed(&configs, problem)?;
    out.trace = trace;
    Ok(out)
}

/// Searches amplitudes and thresholds for every run.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let runs = (1..=problem.runs).map(|s| optimize_run(problem, s)).collect::<Result<Vec<_>>>()?;
    combine(problem, runs)
}

/// Cost and error of given run configurations without searching. Runs without thresholds
/// get the best threshold per detector.
pub fn evaluate_fixed(configs: &[RunConfig], problem: &OptimizationProblem) -> Result<OptimizationResult> {
    ensure!(!configs.is_empty(), "no runs given");
    let mut per_run = Vec::with_capacity(configs.len());
    let mut pairs = Vec::with_capacity(configs.len());
    for rc in configs {
        rc.validate(&problem.pp)?;
        let pair = run_profiles(rc, &problem.ch, &problem.pp)?;
        let rc = if rc.thresholds().is_empty() {
            rc.clone().with_thresholds(run_thresholds(&pair)?.0)?
        } else {
            rc.clone()
        };
        pairs.push(pair);
        per_run.push(rc);
    }
    let th: Vec<Vec<u64>> = per_run.iter().map(|r| r.thresholds().to_vec()).collect();
    let p_e = error_probability(&pairs, &th)?.value;
    Ok(OptimizationResult {
        q_r: q_total(&per_run, problem.pp.n())?,
        p_e,
        feasible: p_e <= problem.pp.epsilon(),
        per_run,
        trace: OptimizationTrace::default(),
    })
}
