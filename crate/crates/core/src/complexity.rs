//! Quantum and classical communication-complexity accounting, and partition counting.

use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::params::RunConfig;
use crate::relationship::{enumerate, MAX_ENUMERATE};

/// `sum_runs sum_k alpha_k^2 * log2(n)` qubits.
pub fn q_total(runs: &[RunConfig], n: u64) -> Result<f64> {
    ensure!(n >= 2, "message length must be at least 2, got {n}");
    let photons: f64 = runs.iter().flat_map(|r| r.alphas()).map(|a| a * a).sum();
    Ok(photons * libm::log2(n as f64))
}

/// Same as [`q_total`] for bare amplitude vectors.
pub fn q_from_alphas<'a, I>(runs: I, n: u64) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    ensure!(n >= 2, "message length must be at least 2, got {n}");
    let photons: f64 = runs.into_iter().flatten().map(|a| a * a).sum();
    Ok(photons * libm::log2(n as f64))
}

fn ceil_div(a: u128, b: u128) -> u128 {
    a.div_ceil(b)
}

/// Bits used by the optimal classical all-equal protocol in the simultaneous message model.
pub fn classical_optimal_ae(n: u64, parties: usize, p_e: f64) -> Result<f64> {
    ensure!(p_e > 0.0 && p_e < 1.0, "error probability {p_e} outside (0, 1)");
    ensure!(n >= 1 && parties >= 2, "need n >= 1 and at least two parties");
    let per_round = libm::log2(1.0 - (1.0 - libm::exp(-0.5)) / 9.0);
    let reps = libm::ceil(libm::log2(p_e) / per_round);
    let block = ceil_div(3 * n as u128, parties as u128) as f64;
    let three_n = 3.0 * n as f64;
    let bits = 8.0 * libm::sqrt(2.0 * block) + 4.0 * libm::ceil(libm::log2(three_n / block));
    Ok(parties as f64 * reps * bits)
}

/// Lower limit on the bits of any classical all-equal protocol. May be negative when
/// `p_e >= 1/4`.
pub fn classical_limit_ae(n: u64, parties: usize, p_e: f64) -> Result<f64> {
    ensure!((0.0..1.0).contains(&p_e), "error probability {p_e} outside [0, 1)");
    ensure!(parties >= 2, "need at least two parties");
    let big_n = parties as f64;
    let per = (1.0 - 2.0 * libm::sqrt(p_e)) * libm::sqrt(n as f64)
        / (2.0 * libm::sqrt(big_n * core::f64::consts::LN_2));
    Ok(big_n * (per - 1.0 / big_n))
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Partitions of `n` into exactly `parts` parts, each at most `max`, non-increasing.
fn integer_partitions(n: usize, parts: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 0 {
        if n == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    if n < parts || n > parts * max {
        return;
    }
    for p in (1..=max.min(n)).rev() {
        prefix.push(p);
        integer_partitions(n - p, parts - 1, p, prefix, out);
        prefix.pop();
    }
}

/// Largest `N` for which [`count_cases`] stays inside `u128`.
pub const MAX_COUNT_PARTIES: usize = 30;

/// Number of relationships among `parties` senders with `groups` groups whose largest group
/// has exactly `largest` members.
///
/// Sums `C(N, g1) C(N - g1, g2) ... / s_G` over group-size profiles, where `s_G` is the
/// product of `multiplicity!` over repeated sizes.
pub fn count_cases(parties: usize, largest: usize, groups: usize) -> Result<u128> {
    ensure!(
        (1..=MAX_COUNT_PARTIES).contains(&parties),
        "party count {parties} outside 1..={MAX_COUNT_PARTIES}"
    );
    ensure!((1..=parties).contains(&groups), "group count {groups} outside 1..={parties}");
    ensure!(
        largest >= parties.div_ceil(groups) && largest + groups - 1 <= parties,
        "largest group {largest} impossible for {parties} senders in {groups} groups"
    );
    let mut profiles = Vec::new();
    let mut prefix = alloc::vec![largest];
    integer_partitions(parties - largest, groups - 1, largest, &mut prefix, &mut profiles);
    let mut total = 0u128;
    for sizes in profiles {
        let mut ways = 1u128;
        let mut left = parties;
        for &s in &sizes {
            ways *= binomial(left, s);
            left -= s;
        }
        let mut s_g = 1u128;
        let mut i = 0;
        while i < sizes.len() {
            let run = sizes[i..].iter().take_while(|&&s| s == sizes[i]).count();
            s_g *= factorial(run);
            i += run;
        }
        total += ways / s_g;
    }
    Ok(total)
}

/// [`count_cases`] by explicit enumeration of set partitions (`N <= 12`).
pub fn count_cases_enumerated(parties: usize, largest: usize, groups: usize) -> Result<u128> {
    ensure!(parties <= MAX_ENUMERATE, "enumeration limited to {MAX_ENUMERATE} parties");
    Ok(enumerate(parties)?
        .iter()
        .filter(|r| r.group_count() == groups && r.largest_group() == largest)
        .count() as u128)
}

/// Quantum cost against the two classical references.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ComplexityReport {
    pub q_ae: f64,
    pub q_r: f64,
    pub c_o_ae: f64,
    pub c_l_ae: f64,
    /// `q_r < c_l_ae < c_o_ae`.
    pub ordering_satisfied: bool,
}

impl ComplexityReport {
    pub fn new(q_ae: f64, q_r: f64, n: u64, parties: usize, p_e: f64) -> Result<Self> {
        let c_o_ae = classical_optimal_ae(n, parties, p_e)?;
        let c_l_ae = classical_limit_ae(n, parties, p_e)?;
        Ok(ComplexityReport {
            q_ae,
            q_r,
            c_o_ae,
            c_l_ae,
            ordering_satisfied: q_r < c_l_ae && c_l_ae < c_o_ae,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Encoding, Pairing};
    use crate::relationship::bell_number;
    use alloc::vec;
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn two_party_row_cost() {
        let rc = RunConfig::new(vec![85.0, 78.0], Pairing::identity(2), vec![], Encoding::SingleBit)
            .unwrap();
        let q = q_total(&[rc], 3_000_000_000_000).unwrap();
        assert!(rel_err(q, 5.52e5) < 5e-3, "{q}");
    }

    #[test]
    fn zero_amplitudes_cost_nothing() {
        let rc = RunConfig::new(vec![0.0; 4], Pairing::identity(4), vec![], Encoding::SingleBit)
            .unwrap();
        assert_eq!(q_total(&[rc], 1 << 20).unwrap(), 0.0);
        assert!(q_total(&[], 1).is_err());
    }

    #[test]
    fn classical_reference_values() {
        let cases = [
            (10_000_000_000_000u64, 4, 1e-2, 1.29e10, 3.04e6),
            (3_000_000_000_000, 2, 1e-5, 1.24e10, 1.46e6),
            (100_000_000_000_000, 4, 1e-5, 1.01e11, 1.19e7),
        ];
        for (n, parties, pe, co, cl) in cases {
            assert!(rel_err(classical_optimal_ae(n, parties, pe).unwrap(), co) < 0.01);
            assert!(rel_err(classical_limit_ae(n, parties, pe).unwrap(), cl) < 0.01);
        }
        assert!(classical_optimal_ae(10, 2, 1.0).is_err());
        assert!(classical_limit_ae(10_000, 2, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn partition_counts() {
        assert_eq!(count_cases(8, 4, 3).unwrap(), 490);
        assert_eq!(count_cases(4, 2, 2).unwrap(), 3);
        assert!(count_cases(4, 1, 2).is_err());
        assert!(count_cases(4, 4, 2).is_err());
        assert!(count_cases(4, 2, 0).is_err());
    }

    #[test]
    fn counts_sum_to_bell_numbers() {
        for n in 2usize..=8 {
            let mut total = 0u128;
            for j in 1..=n {
                for i in n.div_ceil(j)..=n - (j - 1) {
                    let closed = count_cases(n, i, j).unwrap();
                    assert_eq!(closed, count_cases_enumerated(n, i, j).unwrap(), "N={n} i={i} j={j}");
                    total += closed;
                }
            }
            assert_eq!(total, bell_number(n));
        }
    }

    #[test]
    fn report_ordering() {
        let r = ComplexityReport::new(1e5, 5e5, 3_000_000_000_000, 2, 1e-5).unwrap();
        assert!(r.ordering_satisfied);
        let r = ComplexityReport::new(1e5, 5e6, 3_000_000_000_000, 2, 1e-5).unwrap();
        assert!(!r.ordering_satisfied);
    }

    proptest! {
        #[test]
        fn doubling_amplitudes_quadruples_cost(a in proptest::collection::vec(0.0f64..200.0, 4)) {
            let one = RunConfig::new(a.clone(), Pairing::identity(4), vec![], Encoding::SingleBit).unwrap();
            let two = RunConfig::new(a.iter().map(|x| 2.0 * x).collect(), Pairing::identity(4), vec![], Encoding::SingleBit).unwrap();
            let q1 = q_total(&[one], 1_000_000).unwrap();
            let q2 = q_total(&[two], 1_000_000).unwrap();
            prop_assert!((q2 - 4.0 * q1).abs() <= 1e-9 * q2.max(1.0));
        }
    }
}
