//! Protocol, channel and per-run parameters.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{ensure, Error, Result};

/// How the codeword length `m` is derived from `n` and the expansion factor `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CodeLength {
    /// `m = round(c * n)`.
    #[default]
    Expansion,
    /// `m = round(n / c)`, treating `c` as a code rate.
    Rate,
}

/// Message length, code parameters, error budget and party count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProtocolParams {
    n: u64,
    c: f64,
    m: u64,
    delta: f64,
    epsilon: f64,
    parties: usize,
    code_length: CodeLength,
}

impl ProtocolParams {
    /// Builds parameters with `m = round(c * n)`.
    pub fn new(n: u64, c: f64, delta: f64, epsilon: f64, parties: usize) -> Result<Self> {
        Self::with_code_length(n, c, delta, epsilon, parties, CodeLength::Expansion)
    }

    pub fn with_code_length(
        n: u64,
        c: f64,
        delta: f64,
        epsilon: f64,
        parties: usize,
        code_length: CodeLength,
    ) -> Result<Self> {
        ensure!(n >= 1, "message length n must be positive");
        ensure!(c.is_finite() && c > 0.0, "expansion factor c must be positive, got {c}");
        ensure!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1), got {delta}");
        ensure!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1), got {epsilon}");
        ensure!(parties >= 2, "need at least two senders, got {parties}");
        let raw = match code_length {
            CodeLength::Expansion => c * n as f64,
            CodeLength::Rate => n as f64 / c,
        };
        let m = libm::round(raw);
        ensure!((1.0..9.0e15).contains(&m), "codeword length {raw} out of range");
        Ok(ProtocolParams { n, c, m: m as u64, delta, epsilon, parties, code_length })
    }

    /// Replaces the codeword length, e.g. for desk-scale simulation.
    pub fn with_codeword_length(mut self, m: u64) -> Result<Self> {
        ensure!(m >= 1, "codeword length must be positive");
        self.m = m;
        Ok(self)
    }

    /// Returns a copy with a different error budget. `epsilon = 1` is allowed here and
    /// means the constraint is vacuous.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        ensure!(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1], got {epsilon}");
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn code_length(&self) -> CodeLength {
        self.code_length
    }

    /// Non-fatal observations about the parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.c <= 1.0 && self.code_length == CodeLength::Expansion {
            w.push(format!(
                "expansion factor c = {} is not above 1; the code is shorter than the message",
                self.c
            ));
        }
        w
    }
}

/// Per-sender transmissivities, dark counts and interference visibility.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChannelModel {
    eta: Vec<f64>,
    dark_count: f64,
    visibility: f64,
}

impl ChannelModel {
    pub fn new(eta: Vec<f64>, dark_count: f64, visibility: f64) -> Result<Self> {
        ensure!(eta.len() >= 2, "need at least two transmissivities");
        for (k, &e) in eta.iter().enumerate() {
            ensure!((0.0..=1.0).contains(&e), "eta[{k}] = {e} outside [0, 1]");
        }
        ensure!((0.0..1.0).contains(&dark_count), "dark count {dark_count} outside [0, 1)");
        ensure!(
            visibility > 0.0 && visibility <= 1.0,
            "visibility {visibility} outside (0, 1]"
        );
        Ok(ChannelModel { eta, dark_count, visibility })
    }

    /// Builds a channel from amplitude transmissions `sqrt(eta_k)`.
    pub fn from_sqrt_eta(sqrt_eta: &[f64], dark_count: f64, visibility: f64) -> Result<Self> {
        ensure!(
            sqrt_eta.iter().all(|s| (0.0..=1.0).contains(s)),
            "amplitude transmissions must lie in [0, 1]"
        );
        Self::new(sqrt_eta.iter().map(|s| s * s).collect(), dark_count, visibility)
    }

    pub fn symmetric(parties: usize, eta: f64, dark_count: f64, visibility: f64) -> Result<Self> {
        Self::new(alloc::vec![eta; parties], dark_count, visibility)
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn sqrt_eta(&self, k: usize) -> f64 {
        libm::sqrt(self.eta[k])
    }

    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn parties(&self) -> usize {
        self.eta.len()
    }

    /// True iff every sender sees the same transmissivity.
    pub fn is_symmetric(&self) -> bool {
        self.eta.iter().all(|&e| e == self.eta[0])
    }

    /// Errors unless there is one transmissivity per sender.
    pub fn check_parties(&self, parties: usize) -> Result<()> {
        ensure!(
            self.eta.len() == parties,
            "channel has {} transmissivities but the protocol has {parties} senders",
            self.eta.len()
        );
        Ok(())
    }
}

/// Phase encoding of codeword bits onto pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Encoding {
    /// One bit per pulse, phase `(-1)^bit`.
    #[default]
    SingleBit,
    /// Two bits per pulse, phase `i^(b1 xor b2) * (-1)^b1`.
    TwoBit,
}

impl Encoding {
    /// Number of pulses that carry an `m`-bit codeword.
    pub fn pulses(self, m: u64) -> Result<u64> {
        match self {
            Encoding::SingleBit => Ok(m),
            Encoding::TwoBit => {
                ensure!(m.is_multiple_of(2), "two-bit encoding needs an even codeword length, got {m}");
                Ok(m / 2)
            }
        }
    }

    pub fn bits_per_pulse(self) -> u32 {
        match self {
            Encoding::SingleBit => 1,
            Encoding::TwoBit => 2,
        }
    }
}

/// Assignment of senders to splitter input ports. `ports()[p]` is the sender at port `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Pairing {
    ports: Vec<usize>,
}

impl Pairing {
    /// `ports[p]` is the zero-based sender placed at port `p`.
    pub fn new(ports: Vec<usize>) -> Result<Self> {
        let n = ports.len();
        ensure!(n >= 2, "pairing needs at least two ports");
        let mut seen = alloc::vec![false; n];
        for &s in &ports {
            ensure!(s < n && !seen[s], "pairing {ports:?} is not a bijection on 0..{n}");
            seen[s] = true;
        }
        Ok(Pairing { ports })
    }

    pub fn identity(n: usize) -> Self {
        Pairing { ports: (0..n).collect() }
    }

    /// The four-party run schedule: run 1 is the identity, run 2 swaps senders 2 and 3,
    /// run 3 additionally swaps the senders now at ports 3 and 4.
    pub fn for_run(run: usize) -> Result<Self> {
        let ports = match run {
            1 => alloc::vec![0, 1, 2, 3],
            2 => alloc::vec![0, 2, 1, 3],
            3 => alloc::vec![0, 3, 1, 2],
            _ => return Err(Error::domain(format!("run index {run} not in 1..=3"))),
        };
        Ok(Pairing { ports })
    }

    pub fn ports(&self) -> &[usize] {
        &self.ports
    }

    pub fn len(&self) -> usize {
        self.ports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    /// Reorders per-sender values into per-port order.
    pub fn apply<T: Clone>(&self, per_sender: &[T]) -> Vec<T> {
        self.ports.iter().map(|&s| per_sender[s].clone()).collect()
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pair in self.ports.chunks(2) {
            match pair {
                [a, b] => write!(f, "({},{})", a + 1, b + 1)?,
                [a] => write!(f, "({})", a + 1)?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }
}

/// Amplitudes, port assignment and thresholds for one run of the protocol.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RunConfig {
    alphas: Vec<f64>,
    pairing: Pairing,
    thresholds: Vec<u64>,
    encoding: Encoding,
}

impl RunConfig {
    /// `alphas` are indexed by sender. `thresholds` cover detectors D2..DN.
    pub fn new(
        alphas: Vec<f64>,
        pairing: Pairing,
        thresholds: Vec<u64>,
        encoding: Encoding,
    ) -> Result<Self> {
        ensure!(
            alphas.len() == pairing.len(),
            "{} amplitudes for {} ports",
            alphas.len(),
            pairing.len()
        );
        for (k, &a) in alphas.iter().enumerate() {
            ensure!(a.is_finite() && a >= 0.0, "alpha[{k}] = {a} must be finite and >= 0");
        }
        ensure!(
            thresholds.is_empty() || thresholds.len() == alphas.len() - 1,
            "expected {} thresholds (detectors D2..D{}), got {}",
            alphas.len() - 1,
            alphas.len(),
            thresholds.len()
        );
        Ok(RunConfig { alphas, pairing, thresholds, encoding })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Total mean photon numbers `alpha_k^2`.
    pub fn mean_photons(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a * a).collect()
    }

    pub fn pairing(&self) -> &Pairing {
        &self.pairing
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn with_thresholds(mut self, thresholds: Vec<u64>) -> Result<Self> {
        ensure!(
            thresholds.is_empty() || thresholds.len() == self.alphas.len() - 1,
            "expected {} thresholds, got {}",
            self.alphas.len() - 1,
            thresholds.len()
        );
        self.thresholds = thresholds;
        Ok(self)
    }

    /// Checks this run against the protocol: party count and threshold range.
    pub fn validate(&self, pp: &ProtocolParams) -> Result<()> {
        ensure!(
            self.alphas.len() == pp.parties(),
            "run has {} senders, protocol has {}",
            self.alphas.len(),
            pp.parties()
        );
        let pulses = self.encoding.pulses(pp.m())?;
        for &t in &self.thresholds {
            ensure!(t <= pulses, "threshold {t} exceeds the {pulses} pulses per codeword");
        }
        Ok(())
    }
}
