//! Closed-form per-pulse click probabilities.
//!
//! Every closed form here is a list of exposure terms per detector: a fraction of codeword
//! positions together with the mean photon number the detector sees on those positions
//! (and the photon number it would see with the interfering phase flipped, which matters
//! only at finite visibility). [`apply_visibility`] turns terms into probabilities.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::optics::mixture;
use crate::params::{ChannelModel, Encoding, Pairing, ProtocolParams, RunConfig};
use crate::relationship::{relationship_profile, Relationship};

/// What a profile describes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Condition {
    /// The compared inputs carry equal messages.
    Equal,
    /// The compared inputs differ in the worst-case (minimum-separation) way.
    Different,
    /// A specific relationship among all senders.
    Relationship(Relationship),
}

/// Per-pulse click probabilities for a set of detectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClickProfile {
    detectors: Vec<usize>,
    probabilities: Vec<f64>,
    condition: Condition,
    pulses: u64,
}

impl ClickProfile {
    /// `detectors` holds one-based detector numbers matching `probabilities`.
    pub fn new(
        detectors: Vec<usize>,
        probabilities: Vec<f64>,
        condition: Condition,
        pulses: u64,
    ) -> Result<Self> {
        ensure!(detectors.len() == probabilities.len(), "detector/probability count mismatch");
        ensure!(
            probabilities.iter().all(|p| (0.0..=1.0).contains(p)),
            "probabilities must lie in [0, 1]"
        );
        Ok(ClickProfile { detectors, probabilities, condition, pulses })
    }

    pub fn detectors(&self) -> &[usize] {
        &self.detectors
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Probability at a one-based detector number.
    pub fn probability(&self, detector: usize) -> Option<f64> {
        self.detectors.iter().position(|&d| d == detector).map(|i| self.probabilities[i])
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }

    pub fn pulses(&self) -> u64 {
        self.pulses
    }
}

/// Equal- and Different-condition profiles over the same detectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProfilePair {
    pub equal: ClickProfile,
    pub different: ClickProfile,
}

/// A fraction of positions and the photon numbers a detector sees there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub weight: f64,
    pub intensity: f64,
    pub complement: f64,
}

const fn exp(weight: f64, intensity: f64, complement: f64) -> Exposure {
    Exposure { weight, intensity, complement }
}

/// Exposure terms for one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorTerms {
    pub detector: usize,
    pub terms: Vec<Exposure>,
}

/// Probability per detector: `sum w [nu (1 - e^-I) + (1 - nu)(1 - e^-Ic)] + P_d`.
pub fn apply_visibility(
    terms: &[DetectorTerms],
    dark: f64,
    visibility: f64,
    condition: Condition,
    pulses: u64,
) -> Result<ClickProfile> {
    ensure!(visibility > 0.0 && visibility <= 1.0, "visibility {visibility} outside (0, 1]");
    ensure!((0.0..1.0).contains(&dark), "dark count {dark} outside [0, 1)");
    let mut detectors = Vec::with_capacity(terms.len());
    let mut probs = Vec::with_capacity(terms.len());
    for d in terms {
        let mut p = 0.0;
        for t in &d.terms {
            ensure!(t.intensity >= 0.0 && t.complement >= 0.0, "negative intensity");
            if t.weight != 0.0 {
                p += t.weight * mixture(t.intensity, t.complement, visibility);
            }
        }
        detectors.push(d.detector);
        probs.push((p + dark).clamp(0.0, 1.0));
    }
    ClickProfile::new(detectors, probs, condition, pulses)
}

fn symmetric_exposure(mu: f64, ch: &ChannelModel, pp: &ProtocolParams) -> Result<f64> {
    ensure!(pp.parties() == 4, "four-party model needs N = 4, got {}", pp.parties());
    ch.check_parties(4)?;
    ensure!(ch.is_symmetric(), "channel is asymmetric; use the asymmetric model");
    ensure!(mu.is_finite() && mu >= 0.0, "mean photon number {mu} must be >= 0");
    Ok(ch.eta()[0] * mu / pp.m() as f64)
}

/// Exposure terms for D1..D4 of a four-party relationship on a symmetric channel.
pub fn four_party_symmetric_terms(
    rel: &Relationship,
    pairing: &Pairing,
    mu: f64,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<Vec<DetectorTerms>> {
    let a2 = symmetric_exposure(mu, ch, pp)?;
    let f = relationship_profile(rel, pairing, pp.delta())?;
    let same = 1.0 - f.total;
    let pair = |d: f64| vec![exp(d, 2.0 * a2, 0.0), exp(1.0 - d, 0.0, 2.0 * a2)];
    Ok(vec![
        DetectorTerms {
            detector: 1,
            terms: vec![
                exp(same, 4.0 * a2, 0.0),
                exp(f.one_vs_three, a2, a2),
                exp(f.pair_vs_pair, 0.0, 4.0 * a2),
                exp(f.crossed, 0.0, 0.0),
            ],
        },
        DetectorTerms { detector: 2, terms: pair(f.d12) },
        DetectorTerms {
            detector: 3,
            terms: vec![
                exp(same, 0.0, 4.0 * a2),
                exp(f.one_vs_three, a2, a2),
                exp(f.pair_vs_pair, 4.0 * a2, 0.0),
                exp(f.crossed, 0.0, 0.0),
            ],
        },
        DetectorTerms { detector: 4, terms: pair(f.d34) },
    ])
}

/// Click probabilities on D1..D4 for a relationship, identity pairing, symmetric channel.
/// `mu` is each sender's total mean photon number.
pub fn four_party_symmetric(
    rel: &Relationship,
    mu: f64,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<ClickProfile> {
    four_party_symmetric_paired(rel, &Pairing::identity(4), mu, ch, pp)
}

/// As [`four_party_symmetric`] with an explicit port assignment.
pub fn four_party_symmetric_paired(
    rel: &Relationship,
    pairing: &Pairing,
    mu: f64,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<ClickProfile> {
    let terms = four_party_symmetric_terms(rel, pairing, mu, ch, pp)?;
    apply_visibility(
        &terms,
        ch.dark_count(),
        ch.visibility(),
        Condition::Relationship(rel.clone()),
        pp.m(),
    )
}

/// Equal/Different probabilities on D2, D3, D4 for a symmetric four-party channel.
///
/// Different is the worst case per detector: D2 and D4 see their two inputs differ on a
/// `delta` fraction; D3 sees a single input disagree with the other three on `delta`.
pub fn four_party_equal_diff(
    mu: f64,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<ProfilePair> {
    let a2 = symmetric_exposure(mu, ch, pp)?;
    let d = pp.delta();
    let eq_pair = vec![exp(1.0, 0.0, 2.0 * a2)];
    let diff_pair = vec![exp(d, 2.0 * a2, 0.0), exp(1.0 - d, 0.0, 2.0 * a2)];
    let equal = [
        DetectorTerms { detector: 2, terms: eq_pair.clone() },
        DetectorTerms { detector: 3, terms: vec![exp(1.0, 0.0, 4.0 * a2)] },
        DetectorTerms { detector: 4, terms: eq_pair },
    ];
    let different = [
        DetectorTerms { detector: 2, terms: diff_pair.clone() },
        DetectorTerms { detector: 3, terms: vec![exp(d, a2, a2), exp(1.0 - d, 0.0, 4.0 * a2)] },
        DetectorTerms { detector: 4, terms: diff_pair },
    ];
    Ok(ProfilePair {
        equal: apply_visibility(&equal, ch.dark_count(), ch.visibility(), Condition::Equal, pp.m())?,
        different: apply_visibility(
            &different,
            ch.dark_count(),
            ch.visibility(),
            Condition::Different,
            pp.m(),
        )?,
    })
}

/// Exposure terms on D2 for two senders with amplitudes `alphas`.
pub fn two_party_terms(
    alphas: &[f64],
    ch: &ChannelModel,
    pp: &ProtocolParams,
    encoding: Encoding,
) -> Result<(DetectorTerms, DetectorTerms)> {
    ensure!(alphas.len() == 2 && pp.parties() == 2, "two-party model needs N = 2");
    ch.check_parties(2)?;
    ensure!(alphas.iter().all(|a| a.is_finite() && *a >= 0.0), "amplitudes must be >= 0");
    encoding.pulses(pp.m())?;
    let a = ch.sqrt_eta(0) * alphas[0];
    let b = ch.sqrt_eta(1) * alphas[1];
    let m = pp.m() as f64;
    let d = pp.delta();
    let (equal, different) = match encoding {
        Encoding::SingleBit => {
            let lo = (a - b) * (a - b) / (2.0 * m);
            let hi = (a + b) * (a + b) / (2.0 * m);
            (vec![exp(1.0, lo, hi)], vec![exp(1.0 - d, lo, hi), exp(d, hi, lo)])
        }
        Encoding::TwoBit => {
            let lo = (a - b) * (a - b) / m;
            let mid = (a * a + b * b) / m;
            let hi = (a + b) * (a + b) / m;
            (
                vec![exp(1.0, lo, hi)],
                vec![
                    exp((1.0 - d) * (1.0 - d), lo, hi),
                    exp(2.0 * d * (1.0 - d), mid, mid),
                    exp(d * d, hi, lo),
                ],
            )
        }
    };
    Ok((
        DetectorTerms { detector: 2, terms: equal },
        DetectorTerms { detector: 2, terms: different },
    ))
}

/// Equal/Different probabilities on D2 for two senders over asymmetric channels.
pub fn two_party_asymmetric(
    alphas: &[f64],
    ch: &ChannelModel,
    pp: &ProtocolParams,
    encoding: Encoding,
) -> Result<ProfilePair> {
    let (e, d) = two_party_terms(alphas, ch, pp, encoding)?;
    let pulses = encoding.pulses(pp.m())?;
    Ok(ProfilePair {
        equal: apply_visibility(&[e], ch.dark_count(), ch.visibility(), Condition::Equal, pulses)?,
        different: apply_visibility(
            &[d],
            ch.dark_count(),
            ch.visibility(),
            Condition::Different,
            pulses,
        )?,
    })
}

/// The single-input sign flip that minimizes the D3 field, given received amplitudes in
/// port order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinFlip {
    /// Zero-based port whose sign is flipped.
    pub port: usize,
    /// `s . x` where `s` is `(+,+,-,-)` with the flipped port negated.
    pub field: f64,
    /// `s' . x` where `s'` is `(+,+,+,+)` with the flipped port negated.
    pub complement: f64,
}

/// Minimizes `|s . x|` over the four single-port flips of `(+,+,-,-)`; ties go to the
/// lowest port.
pub fn min_flip(x: [f64; 4]) -> MinFlip {
    let mut best: Option<MinFlip> = None;
    for port in 0..4 {
        let mut s = [1.0, 1.0, -1.0, -1.0];
        let mut c = [1.0; 4];
        s[port] = -s[port];
        c[port] = -1.0;
        let field: f64 = (0..4).map(|k| s[k] * x[k]).sum();
        let complement: f64 = (0..4).map(|k| c[k] * x[k]).sum();
        if best.is_none_or(|b| field.abs() < b.field.abs()) {
            best = Some(MinFlip { port, field, complement });
        }
    }
    best.unwrap()
}

/// Exposure terms on D2, D3, D4 for one run of the four-party asymmetric protocol.
pub fn four_party_asymmetric_terms(
    rc: &RunConfig,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<(Vec<DetectorTerms>, Vec<DetectorTerms>)> {
    ensure!(pp.parties() == 4, "four-party model needs N = 4");
    ch.check_parties(4)?;
    rc.validate(pp)?;
    ensure!(
        rc.encoding() == Encoding::SingleBit,
        "two-bit encoding is modelled for two senders only"
    );
    let m = pp.m() as f64;
    let d = pp.delta();
    let received: Vec<f64> = (0..4).map(|k| ch.sqrt_eta(k) * rc.alphas()[k]).collect();
    let x = rc.pairing().apply(&received);

    let pair = |p: f64, q: f64| {
        let lo = (p - q) * (p - q) / (2.0 * m);
        let hi = (p + q) * (p + q) / (2.0 * m);
        (vec![exp(1.0, lo, hi)], vec![exp(1.0 - d, lo, hi), exp(d, hi, lo)])
    };
    let (e2, d2) = pair(x[0], x[1]);
    let (e4, d4) = pair(x[2], x[3]);
    let sq = |v: f64| v * v / (4.0 * m);
    let e3_i = sq(x[0] + x[1] - x[2] - x[3]);
    let e3_c = sq(x[0] + x[1] + x[2] + x[3]);
    let flip = min_flip([x[0], x[1], x[2], x[3]]);
    let e3 = vec![exp(1.0, e3_i, e3_c)];
    let d3 = vec![exp(1.0 - d, e3_i, e3_c), exp(d, sq(flip.field), sq(flip.complement))];
    let equal = vec![
        DetectorTerms { detector: 2, terms: e2 },
        DetectorTerms { detector: 3, terms: e3 },
        DetectorTerms { detector: 4, terms: e4 },
    ];
    let different = vec![
        DetectorTerms { detector: 2, terms: d2 },
        DetectorTerms { detector: 3, terms: d3 },
        DetectorTerms { detector: 4, terms: d4 },
    ];
    Ok((equal, different))
}

/// Equal/Different probabilities on D2, D3, D4 for run `run` (1, 2 or 3), whose port
/// assignment must follow [`Pairing::for_run`].
pub fn four_party_asymmetric(
    run: usize,
    rc: &RunConfig,
    ch: &ChannelModel,
    pp: &ProtocolParams,
) -> Result<ProfilePair> {
    let expected = Pairing::for_run(run)?;
    ensure!(
        rc.pairing() == &expected,
        "run {run} uses pairing {expected}, got {}",
        rc.pairing()
    );
    let (e, d) = four_party_asymmetric_terms(rc, ch, pp)?;
    Ok(ProfilePair {
        equal: apply_visibility(&e, ch.dark_count(), ch.visibility(), Condition::Equal, pp.m())?,
        different: apply_visibility(
            &d,
            ch.dark_count(),
            ch.visibility(),
            Condition::Different,
            pp.m(),
        )?,
    })
}

/// Equal/Different profiles for one run, for two or four senders.
pub fn run_profiles(rc: &RunConfig, ch: &ChannelModel, pp: &ProtocolParams) -> Result<ProfilePair> {
    match pp.parties() {
        2 => two_party_asymmetric(rc.alphas(), ch, pp, rc.encoding()),
        4 => {
            let (e, d) = four_party_asymmetric_terms(rc, ch, pp)?;
            Ok(ProfilePair {
                equal: apply_visibility(&e, ch.dark_count(), ch.visibility(), Condition::Equal, pp.m())?,
                different: apply_visibility(
                    &d,
                    ch.dark_count(),
                    ch.visibility(),
                    Condition::Different,
                    pp.m(),
                )?,
            })
        }
        n => Err(crate::Error::domain(alloc::format!(
            "closed-form run profiles cover two or four senders, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::oracle_click_profile;
    use crate::relationship::enumerate;
    use proptest::prelude::*;

    fn rel(s: &str) -> Relationship {
        s.parse().unwrap()
    }

    fn table_params() -> (ProtocolParams, ChannelModel) {
        (
            ProtocolParams::new(10_000_000_000_000, 0.2, 0.22, 0.01, 4).unwrap(),
            ChannelModel::symmetric(4, 0.1, 1e-11, 1.0).unwrap(),
        )
    }

    fn close(a: f64, b: f64, rel_tol: f64) -> bool {
        (a - b).abs() <= rel_tol * a.abs().max(b.abs())
    }

    #[test]
    fn aaaa_profile() {
        let (pp, ch) = table_params();
        let p = four_party_symmetric(&rel("AAAA"), 4961.0, &ch, &pp).unwrap();
        let x = 4.0 * 0.1 * 4961.0 / pp.m() as f64;
        assert!(close(p.probabilities()[0], -(-x).exp_m1() + 1e-11, 1e-12));
        assert_eq!(&p.probabilities()[1..], &[1e-11; 3]);
    }

    #[test]
    fn aabc_profile() {
        let (pp, ch) = table_params();
        let mu = 4961.0;
        let p = four_party_symmetric(&rel("AABC"), mu, &ch, &pp).unwrap();
        let m = pp.m() as f64;
        let d = 0.22;
        assert_eq!(p.probability(2).unwrap(), 1e-11);
        let want4 = d * (-(-2.0 * 0.1 * mu / m).exp_m1()) + 1e-11;
        assert!(close(p.probability(4).unwrap(), want4, 1e-12));
        // D1 and D3 on the half-delta split
        let a2 = 0.1 * mu / m;
        let want1 = (1.0 - 1.5 * d) * (-(-4.0 * a2).exp_m1()) + d * (-(-a2).exp_m1()) + 1e-11;
        let want3 = d * (-(-a2).exp_m1()) + d / 2.0 * (-(-4.0 * a2).exp_m1()) + 1e-11;
        assert!(close(p.probability(1).unwrap(), want1, 1e-12));
        assert!(close(p.probability(3).unwrap(), want3, 1e-12));
    }

    #[test]
    fn equal_diff_table_row() {
        let (pp, ch) = table_params();
        let mu = 4961.0;
        let m = 2e12;
        let pd = 1e-11;
        let pair = four_party_equal_diff(mu, &ch, &pp).unwrap();
        assert_eq!(pair.equal.probabilities(), &[pd; 3]);
        let p2 = 0.22 * (-(-2.0 * 0.1 * mu / m).exp_m1()) + pd;
        let p3 = 0.22 * (-(-0.1 * mu / m).exp_m1()) + pd;
        assert!(close(pair.different.probability(2).unwrap(), p2, 1e-12));
        assert!(close(pair.different.probability(3).unwrap(), p3, 1e-12));
        assert!(close(pair.different.probability(4).unwrap(), p2, 1e-12));
    }

    #[test]
    fn no_light_gives_dark_counts_only() {
        let (pp, ch) = table_params();
        let pair = four_party_equal_diff(0.0, &ch, &pp).unwrap();
        assert_eq!(pair.equal.probabilities(), &[1e-11; 3]);
        assert_eq!(pair.different.probabilities(), &[1e-11; 3]);
    }

    #[test]
    fn symmetric_model_rejects_asymmetric_channel() {
        let (pp, _) = table_params();
        let ch = ChannelModel::from_sqrt_eta(&[0.3, 0.4, 0.5, 0.6], 1e-11, 1.0).unwrap();
        assert!(four_party_symmetric(&rel("AABC"), 1.0, &ch, &pp).is_err());
        assert!(four_party_equal_diff(1.0, &ch, &pp).is_err());
    }

    #[test]
    fn two_party_single_bit_row() {
        let pp = ProtocolParams::new(3_000_000_000_000, 0.2, 0.22, 0.01, 2).unwrap();
        let ch = ChannelModel::from_sqrt_eta(&[0.3, 0.4], 1e-10, 1.0).unwrap();
        let pair = two_party_asymmetric(&[85.0, 78.0], &ch, &pp, Encoding::SingleBit).unwrap();
        let (a, b, m): (f64, f64, f64) = (25.5, 31.2, 6e11);
        let lo = -(-(a - b) * (a - b) / (2.0 * m)).exp_m1();
        let hi = -(-(a + b) * (a + b) / (2.0 * m)).exp_m1();
        assert!(close(pair.equal.probabilities()[0], lo + 1e-10, 1e-12));
        assert!(close(pair.different.probabilities()[0], 0.78 * lo + 0.22 * hi + 1e-10, 1e-12));
        assert_eq!(pair.equal.pulses(), 600_000_000_000);
    }

    #[test]
    fn two_party_balanced_cancels() {
        let pp = ProtocolParams::new(1000, 1.0, 0.2, 0.01, 2).unwrap();
        let ch = ChannelModel::symmetric(2, 0.3, 1e-6, 1.0).unwrap();
        for enc in [Encoding::SingleBit, Encoding::TwoBit] {
            let pair = two_party_asymmetric(&[5.0, 5.0], &ch, &pp, enc).unwrap();
            assert_eq!(pair.equal.probabilities()[0], 1e-6);
        }
    }

    #[test]
    fn two_bit_rejects_odd_length_and_halves_pulses() {
        let ch = ChannelModel::symmetric(2, 0.3, 0.0, 1.0).unwrap();
        let odd = ProtocolParams::new(1001, 1.0, 0.2, 0.01, 2).unwrap();
        assert!(two_party_asymmetric(&[1.0, 1.0], &ch, &odd, Encoding::TwoBit).is_err());
        let even = ProtocolParams::new(1000, 1.0, 0.2, 0.01, 2).unwrap();
        let p = two_party_asymmetric(&[1.0, 1.0], &ch, &even, Encoding::TwoBit).unwrap();
        assert_eq!(p.different.pulses(), 500);
    }

    #[test]
    fn visibility_half_symmetrizes() {
        let pp = ProtocolParams::new(1000, 1.0, 0.2, 0.01, 2).unwrap();
        let ch = ChannelModel::symmetric(2, 0.5, 1e-6, 0.5).unwrap();
        let pair = two_party_asymmetric(&[3.0, 3.0], &ch, &pp, Encoding::SingleBit).unwrap();
        assert!(close(pair.equal.probabilities()[0], pair.different.probabilities()[0], 1e-14));
    }

    #[test]
    fn visibility_row() {
        let pp = ProtocolParams::new(5_000_000_000_000, 0.2, 0.22, 0.01, 2).unwrap();
        let ch = ChannelModel::from_sqrt_eta(&[0.3, 0.4], 1e-10, 0.99).unwrap();
        let pair = two_party_asymmetric(&[88.0, 77.0], &ch, &pp, Encoding::SingleBit).unwrap();
        let (a, b, m): (f64, f64, f64) = (26.4, 30.8, 1e12);
        let lo = -(-(a - b) * (a - b) / (2.0 * m)).exp_m1();
        let hi = -(-(a + b) * (a + b) / (2.0 * m)).exp_m1();
        let pe = 0.99 * lo + 0.01 * hi + 1e-10;
        let pd = 0.78 * pe + 0.22 * (0.99 * hi + 0.01 * lo + 1e-10);
        assert!(close(pair.equal.probabilities()[0], pe, 1e-12));
        assert!(close(pair.different.probabilities()[0], pd, 1e-12));
    }

    #[test]
    fn asymmetric_run_rejects_wrong_pairing() {
        let (pp, ch) = table_params();
        let rc = RunConfig::new(vec![1.0; 4], Pairing::for_run(2).unwrap(), vec![], Encoding::SingleBit)
            .unwrap();
        assert!(four_party_asymmetric(1, &rc, &ch, &pp).is_err());
        assert!(four_party_asymmetric(2, &rc, &ch, &pp).is_ok());
        assert!(four_party_asymmetric(4, &rc, &ch, &pp).is_err());
    }

    #[test]
    fn asymmetric_first_row() {
        let pp = ProtocolParams::new(100_000_000_000_000, 0.2, 0.22, 0.01, 4).unwrap();
        let ch = ChannelModel::from_sqrt_eta(&[0.3, 0.4, 0.5, 0.6], 1e-11, 1.0).unwrap();
        let rc = RunConfig::new(
            vec![109.0, 109.0, 69.0, 69.0],
            Pairing::for_run(1).unwrap(),
            vec![],
            Encoding::SingleBit,
        )
        .unwrap();
        let pair = four_party_asymmetric(1, &rc, &ch, &pp).unwrap();
        let m = 2e13;
        let x = [32.7, 43.6, 34.5, 41.4];
        let e = |v: f64, den: f64| -(-v * v / den).exp_m1();
        assert!(close(pair.equal.probability(2).unwrap(), e(x[0] - x[1], 2.0 * m) + 1e-11, 1e-12));
        let p3e = e(x[0] + x[1] - x[2] - x[3], 4.0 * m) + 1e-11;
        assert!(close(pair.equal.probability(3).unwrap(), p3e, 1e-12));
        let cands = [
            -x[0] + x[1] - x[2] - x[3],
            x[0] - x[1] - x[2] - x[3],
            x[0] + x[1] + x[2] - x[3],
            x[0] + x[1] - x[2] + x[3],
        ];
        let xs = cands.iter().map(|c| c * c).fold(f64::INFINITY, f64::min);
        let p3d = 0.78 * e(x[0] + x[1] - x[2] - x[3], 4.0 * m) + 0.22 * (-(-xs / (4.0 * m)).exp_m1()) + 1e-11;
        assert!(close(pair.different.probability(3).unwrap(), p3d, 1e-12));
    }

    #[test]
    fn small_exponent_regime() {
        let (pp, ch) = table_params();
        let pair = four_party_equal_diff(4961.0, &ch, &pp).unwrap();
        let i = 2.0 * 0.1 * 4961.0 / 2e12;
        let approx = 0.22 * i + 1e-11;
        let got = pair.different.probability(2).unwrap();
        assert!(((got - approx) / approx).abs() <= i / 2.0);
    }

    fn random_rc(seed: &[f64], pairing: Pairing) -> RunConfig {
        RunConfig::new(seed.to_vec(), pairing, vec![], Encoding::SingleBit).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn symmetric_matches_oracle(
            mu in 0.0f64..5.0e5,
            eta in 0.0f64..=1.0,
            delta in 0.01f64..0.57,
            pd in 0.0f64..1e-3,
            nu in 0.5f64..=1.0,
            run in 1usize..=3,
        ) {
            let pp = ProtocolParams::new(1_000_000, 1.0, delta, 0.01, 4).unwrap();
            let ch = ChannelModel::symmetric(4, eta, pd, nu).unwrap();
            let pairing = Pairing::for_run(run).unwrap();
            let rc = random_rc(&[mu.sqrt(); 4], pairing.clone());
            for r in enumerate(4).unwrap() {
                let closed = four_party_symmetric_paired(&r, &pairing, mu, &ch, &pp).unwrap();
                let oracle = oracle_click_profile(&r, &rc, &ch, &pp).unwrap();
                for k in 0..4 {
                    prop_assert!((closed.probabilities()[k] - oracle.probabilities()[k]).abs() < 1e-10,
                        "{} D{}", r, k + 1);
                }
            }
        }

        #[test]
        fn two_party_matches_oracle(
            a1 in 0.0f64..3000.0, a2 in 0.0f64..3000.0,
            e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0,
            delta in 0.01f64..0.99, pd in 0.0f64..1e-3, nu in 0.5f64..=1.0,
            two_bit in any::<bool>(),
        ) {
            let enc = if two_bit { Encoding::TwoBit } else { Encoding::SingleBit };
            let pp = ProtocolParams::new(200_000, 1.0, delta, 0.01, 2).unwrap();
            let ch = ChannelModel::new(vec![e1, e2], pd, nu).unwrap();
            let rc = RunConfig::new(vec![a1, a2], Pairing::identity(2), vec![], enc).unwrap();
            let pair = two_party_asymmetric(&[a1, a2], &ch, &pp, enc).unwrap();
            let eq = oracle_click_profile(&rel("AA"), &rc, &ch, &pp).unwrap();
            let df = oracle_click_profile(&rel("AB"), &rc, &ch, &pp).unwrap();
            prop_assert!((pair.equal.probabilities()[0] - eq.probabilities()[1]).abs() < 1e-10);
            prop_assert!((pair.different.probabilities()[0] - df.probabilities()[1]).abs() < 1e-10);
        }

        #[test]
        fn asymmetric_matches_oracle(
            alphas in proptest::collection::vec(0.0f64..2000.0, 4),
            eta in proptest::collection::vec(0.0f64..=1.0, 4),
            delta in 0.01f64..0.99, pd in 0.0f64..1e-3, run in 1usize..=3,
        ) {
            let pp = ProtocolParams::new(1_000_000, 1.0, delta, 0.01, 4).unwrap();
            let ch = ChannelModel::new(eta.clone(), pd, 1.0).unwrap();
            let pairing = Pairing::for_run(run).unwrap();
            let rc = random_rc(&alphas, pairing.clone());
            let pair = four_party_asymmetric(run, &rc, &ch, &pp).unwrap();
            // Equal: all four senders agree.
            let eq = oracle_click_profile(&rel("AAAA"), &rc, &ch, &pp).unwrap();
            for d in 2..=4 {
                prop_assert!((pair.equal.probability(d).unwrap() - eq.probability(d).unwrap()).abs() < 1e-10);
            }
            // Different on D2/D4: the pair straddles a two-group split.
            let ports = pairing.ports();
            let mut lab = [0u8; 4];
            lab[ports[1]] = 1;
            lab[ports[3]] = 1;
            let split: Relationship = Relationship::from_labels(&lab).unwrap();
            let o = oracle_click_profile(&split, &rc, &ch, &pp).unwrap();
            prop_assert!((pair.different.probability(2).unwrap() - o.probability(2).unwrap()).abs() < 1e-10);
            prop_assert!((pair.different.probability(4).unwrap() - o.probability(4).unwrap()).abs() < 1e-10);
            // Different on D3: the minimum over single-port outliers.
            let mut best = f64::INFINITY;
            for p in 0..4 {
                let mut lab = [0u8; 4];
                lab[ports[p]] = 1;
                let r = Relationship::from_labels(&lab).unwrap();
                let o = oracle_click_profile(&r, &rc, &ch, &pp).unwrap();
                best = best.min(o.probability(3).unwrap());
            }
            prop_assert!((pair.different.probability(3).unwrap() - best).abs() < 1e-10);
        }

        #[test]
        fn asymmetric_degenerates_to_symmetric(
            mu in 0.0f64..5.0e5, eta in 0.0f64..=1.0, delta in 0.01f64..0.99,
            pd in 0.0f64..1e-3, nu in 0.5f64..=1.0, run in 1usize..=3,
        ) {
            let pp = ProtocolParams::new(1_000_000, 1.0, delta, 0.01, 4).unwrap();
            let ch = ChannelModel::symmetric(4, eta, pd, nu).unwrap();
            let rc = random_rc(&[mu.sqrt(); 4], Pairing::for_run(run).unwrap());
            let a = four_party_asymmetric(run, &rc, &ch, &pp).unwrap();
            let s = four_party_equal_diff(mu, &ch, &pp).unwrap();
            for k in 0..3 {
                prop_assert!((a.equal.probabilities()[k] - s.equal.probabilities()[k]).abs() < 1e-12);
                prop_assert!((a.different.probabilities()[k] - s.different.probabilities()[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn min_flip_is_brute_force_minimum(x in proptest::array::uniform4(-50.0f64..50.0)) {
            let f = min_flip(x);
            let cands = [
                -x[0] + x[1] - x[2] - x[3],
                x[0] - x[1] - x[2] - x[3],
                x[0] + x[1] + x[2] - x[3],
                x[0] + x[1] - x[2] + x[3],
            ];
            let m = cands.iter().map(|c| c.abs()).fold(f64::INFINITY, f64::min);
            prop_assert!((f.field.abs() - m).abs() < 1e-12);
            prop_assert!((f.field - cands[f.port]).abs() < 1e-12);
        }

        #[test]
        fn different_dominates_equal_when_matched(
            a in 0.0f64..2000.0, eta in 0.01f64..=1.0, delta in 0.01f64..0.99,
            pd in 0.0f64..1e-3, nu in 0.51f64..=1.0,
        ) {
            let pp = ProtocolParams::new(100_000, 1.0, delta, 0.01, 2).unwrap();
            let ch = ChannelModel::symmetric(2, eta, pd, nu).unwrap();
            let pair = two_party_asymmetric(&[a, a], &ch, &pp, Encoding::SingleBit).unwrap();
            prop_assert!(pair.different.probabilities()[0] >= pair.equal.probabilities()[0]);
        }
    }
}
