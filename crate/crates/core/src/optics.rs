//! Field transfer of the balanced beam-splitter tree.
//!
//! Inputs are combined pairwise, level by level. Each splitter takes a left field `L` and a
//! right field `R` and emits `(L + R)/sqrt(2)` upward and `(L - R)/sqrt(2)` to a detector.
//! The root's sum port is D1. The splitter whose left subtree ends at input `b` (one-based)
//! feeds detector `D(b+1)`, so for four inputs D2 compares inputs 1 and 2, D4 compares
//! 3 and 4, and D3 compares the pair sums.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{ensure, Result};
use crate::numeric::one_minus_exp_neg;
use crate::params::{ChannelModel, Encoding, ProtocolParams, RunConfig};
use crate::probmodel::{ClickProfile, Condition};
use crate::relationship::Relationship;

/// Per-pulse phase factor of one sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Phase {
    pub fn value(self) -> Complex64 {
        match self {
            Phase::Plus => Complex64::new(1.0, 0.0),
            Phase::Minus => Complex64::new(-1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    /// `(-1)^bit`.
    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            Phase::Plus
        } else {
            Phase::Minus
        }
    }

    /// `i^(b1 xor b2) * (-1)^b1`.
    pub fn from_bit_pair(b1: u8, b2: u8) -> Self {
        match (b1 & 1, b2 & 1) {
            (0, 0) => Phase::Plus,
            (0, 1) => Phase::PlusI,
            (1, 0) => Phase::MinusI,
            _ => Phase::Minus,
        }
    }
}

/// Phases and per-pulse field amplitudes at the tree inputs, in port order.
#[derive(Debug, Clone, PartialEq)]
pub struct PulsePattern {
    phases: Vec<Phase>,
    amplitudes: Vec<f64>,
}

impl PulsePattern {
    pub fn new(phases: Vec<Phase>, amplitudes: Vec<f64>) -> Result<Self> {
        ensure!(phases.len() == amplitudes.len(), "phase and amplitude counts differ");
        ensure!(
            amplitudes.iter().all(|a| a.is_finite() && *a >= 0.0),
            "amplitudes must be finite and nonnegative"
        );
        Ok(PulsePattern { phases, amplitudes })
    }

    pub fn fields(&self) -> Vec<Complex64> {
        self.phases.iter().zip(&self.amplitudes).map(|(p, &a)| p.value() * a).collect()
    }
}

/// Output fields per detector, plus each detector's field with the second operand of its
/// splitter negated (what it would see with the interfering phase flipped).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFields {
    pub field: Vec<Complex64>,
    pub complement: Vec<Complex64>,
}

/// Mean photon number per pulse at each detector; index 0 is D1.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorIntensities {
    pub intensities: Vec<f64>,
    pub complements: Vec<f64>,
}

fn check_power_of_two(n: usize) -> Result<()> {
    ensure!(n >= 2 && n.is_power_of_two(), "input count {n} is not a power of two >= 2");
    Ok(())
}

/// Propagates input fields (port order) through the tree.
pub fn tree_fields(inputs: &[Complex64]) -> Result<DetectorFields> {
    check_power_of_two(inputs.len())?;
    let n = inputs.len();
    let mut field = vec![Complex64::new(0.0, 0.0); n];
    let mut complement = field.clone();

    fn node(
        x: &[Complex64],
        offset: usize,
        field: &mut [Complex64],
        complement: &mut [Complex64],
    ) -> Complex64 {
        if x.len() == 1 {
            return x[0];
        }
        let half = x.len() / 2;
        let l = node(&x[..half], offset, field, complement);
        let r = node(&x[half..], offset + half, field, complement);
        let b = offset + half;
        field[b] = (l - r) * FRAC_1_SQRT_2;
        complement[b] = (l + r) * FRAC_1_SQRT_2;
        (l + r) * FRAC_1_SQRT_2
    }

    let root = node(inputs, 0, &mut field, &mut complement);
    let half = n / 2;
    complement[0] = field[half];
    field[0] = root;
    Ok(DetectorFields { field, complement })
}

/// Detector intensities for one pulse.
pub fn tree_transfer(pattern: &PulsePattern) -> Result<DetectorIntensities> {
    let f = tree_fields(&pattern.fields())?;
    Ok(DetectorIntensities {
        intensities: f.field.iter().map(|z| z.norm_sqr()).collect(),
        complements: f.complement.iter().map(|z| z.norm_sqr()).collect(),
    })
}

/// Real orthogonal matrix `T` with `fields = T * inputs`; row 0 is D1.
pub fn transfer_matrix(n: usize) -> Result<Vec<Vec<f64>>> {
    check_power_of_two(n)?;
    let mut t = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let f = tree_fields(&e)?;
        for (i, z) in f.field.iter().enumerate() {
            t[i][j] = z.re;
        }
    }
    Ok(t)
}

/// Per-pulse click probability: `nu (1 - e^-I) + (1 - nu)(1 - e^-Ic) + P_d`, clamped to [0, 1].
pub fn click_probability(
    intensity: f64,
    dark: f64,
    visibility: f64,
    complement_intensity: f64,
) -> Result<f64> {
    ensure!(
        intensity >= 0.0 && complement_intensity >= 0.0,
        "intensities must be nonnegative, got {intensity} and {complement_intensity}"
    );
    ensure!((0.0..1.0).contains(&dark), "dark count {dark} outside [0, 1)");
    ensure!(visibility > 0.0 && visibility <= 1.0, "visibility {visibility} outside (0, 1]");
    Ok((mixture(intensity, complement_intensity, visibility) + dark).clamp(0.0, 1.0))
}

pub(crate) fn mixture(intensity: f64, complement: f64, visibility: f64) -> f64 {
    let main = one_minus_exp_neg(intensity);
    if visibility == 1.0 {
        main
    } else {
        visibility * main + (1.0 - visibility) * one_minus_exp_neg(complement)
    }
}

/// Click profile by explicit enumeration of codeword position classes.
///
/// Single-bit encoding: every worst-case group pattern of `rel` is pushed through the
/// tree. Two-bit encoding (two senders only): every pair of two-bit symbols is enumerated,
/// each symbol bit differing independently with probability `delta` when the senders'
/// messages differ. Detectors D1..DN are reported.
pub fn oracle_click_profile(
    rel: &Relationship,
    rc: &RunConfig,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<ClickProfile> {
    let n = rel.parties();
    check_power_of_two(n)?;
    ensure!(pp.parties() == n, "protocol has {} senders, relationship {n}", pp.parties());
    ch.check_parties(n)?;
    rc.validate(pp)?;
    let pulses = rc.encoding().pulses(pp.m())?;
    let amp: Vec<f64> = (0..n)
        .map(|k| ch.sqrt_eta(k) * rc.alphas()[k] / libm::sqrt(pulses as f64))
        .collect();
    let port_amp = rc.pairing().apply(&amp);

    // (weight, per-sender phases)
    let mut classes: Vec<(f64, Vec<Phase>)> = Vec::new();
    match rc.encoding() {
        Encoding::SingleBit => {
            for pat in rel.pattern_weights(pp.delta())? {
                let phases = pat.sender_bits(rel).into_iter().map(Phase::from_bit).collect();
                classes.push((pat.weight, phases));
            }
        }
        Encoding::TwoBit => {
            ensure!(n == 2, "two-bit encoding is modelled for two senders only");
            let d = pp.delta();
            for reference in 0u8..4 {
                for diff in 0u8..4 {
                    let w = if rel.same(0, 1) {
                        if diff == 0 { 1.0 } else { 0.0 }
                    } else {
                        let bit = |b: u8| if b == 1 { d } else { 1.0 - d };
                        bit(diff >> 1) * bit(diff & 1)
                    };
                    let other = reference ^ diff;
                    let phases = vec![
                        Phase::from_bit_pair(reference >> 1, reference & 1),
                        Phase::from_bit_pair(other >> 1, other & 1),
                    ];
                    classes.push((w / 4.0, phases));
                }
            }
        }
    }

    let mut probs = vec![0.0; n];
    for (w, phases) in classes {
        if w == 0.0 {
            continue;
        }
        let pattern = PulsePattern::new(rc.pairing().apply(&phases), port_amp.clone())?;
        let out = tree_transfer(&pattern)?;
        for (k, p) in probs.iter_mut().enumerate() {
            *p += w * mixture(out.intensities[k], out.complements[k], ch.visibility());
        }
    }
    let probs = probs.into_iter().map(|p| (p + ch.dark_count()).clamp(0.0, 1.0)).collect();
    ClickProfile::new((1..=n).collect(), probs, Condition::Relationship(rel.clone()), pulses)
}
