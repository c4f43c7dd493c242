//! Referee decisions: outcome bits, the four- and three-sender lookup tables, the adaptive
//! position-swap schedule and the all-equal rules.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{ensure, Error, Result};
use crate::params::{ChannelModel, Pairing, ProtocolParams};
use crate::probmodel::four_party_symmetric_paired;
use crate::relationship::Relationship;

/// Threshold comparisons of one run, one bit per observed detector (D2, D3, D4 for four
/// senders). A bit is 0 iff the count is below its threshold.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunOutcome {
    bits: Vec<u8>,
}

impl RunOutcome {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        ensure!(!bits.is_empty(), "an outcome needs at least one bit");
        ensure!(bits.iter().all(|&b| b <= 1), "outcome bits must be 0 or 1");
        Ok(RunOutcome { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn all_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    fn matches_str(&self, s: &str) -> bool {
        self.bits.len() == s.len() && self.bits.iter().zip(s.bytes()).all(|(b, c)| *b == c - b'0')
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for RunOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ensure!(
            !s.is_empty() && s.bytes().all(|b| b == b'0' || b == b'1'),
            "outcome {s:?} must be a string of 0 and 1"
        );
        Ok(RunOutcome { bits: s.bytes().map(|b| b - b'0').collect() })
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for RunOutcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Bit `k` is 0 iff `counts[k] < thresholds[k]`; a count equal to its threshold reads 1.
pub fn outcome_bits(counts: &[u64], thresholds: &[u64]) -> Result<RunOutcome> {
    ensure!(
        counts.len() == thresholds.len(),
        "{} counts for {} thresholds",
        counts.len(),
        thresholds.len()
    );
    RunOutcome::new(counts.iter().zip(thresholds).map(|(c, t)| u8::from(c >= t)).collect())
}

/// A resolved relationship and the predicates it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DecisionOutcome {
    pub f_r: u64,
    pub relationship: Relationship,
    pub runs_used: usize,
    /// All inputs equal.
    pub f_ae: bool,
    /// Some pair of inputs equal.
    pub f_ee: bool,
}

impl DecisionOutcome {
    pub fn from_relationship(relationship: Relationship, runs_used: usize) -> Result<Self> {
        Ok(DecisionOutcome {
            f_r: relationship.f_r()?,
            f_ae: relationship.is_all_equal(),
            f_ee: relationship.exists_equal(),
            relationship,
            runs_used,
        })
    }
}

/// Result of feeding the outcomes seen so far to the four-sender table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(DecisionOutcome),
    /// Another run is needed, with senders placed according to `pairing`.
    NeedMoreRuns { next_run: usize, pairing: Pairing },
}

/// Four-sender decision table: size-ordered label and its outcome signature.
const FOUR_PARTY_TABLE: [(&str, &[&str]); 18] = [
    ("AAAA", &["000"]),
    ("AAAB", &["011", "011"]),
    ("AABA", &["011", "110"]),
    ("ABAA", &["110", "011"]),
    ("BAAA", &["110", "110"]),
    ("AABB", &["010"]),
    ("ABAB", &["101", "010"]),
    ("ABBA", &["101", "101"]),
    ("AABC", &["011", "111"]),
    ("ABAC", &["111", "011"]),
    ("ABCA", &["111", "111", "011"]),
    ("BAAC", &["111", "111", "110"]),
    ("BACA", &["111", "110"]),
    ("BCAA", &["110", "111"]),
    ("ABCD", &["101", "111"]),
    ("ABCD", &["111", "101"]),
    ("ABCD", &["111", "111", "101"]),
    ("ABCD", &["111", "111", "111"]),
];

/// One row of an exported decision table.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TableRow {
    pub relationship: Relationship,
    /// Label with letters assigned by group size, as printed in the table.
    pub label: String,
    pub signature: Vec<RunOutcome>,
    pub f_r: u64,
}

fn row(label: &str, sig: &[&str]) -> TableRow {
    let relationship: Relationship = label.parse().expect("table labels are valid");
    TableRow {
        f_r: relationship.f_r().expect("table relationships are enumerable"),
        label: String::from(label),
        relationship,
        signature: sig.iter().map(|s| s.parse().expect("table outcomes are valid")).collect(),
    }
}

/// Decision table for three senders (sender 1 duplicated onto port 4) or four senders.
///
/// The four-sender table lists the all-distinct relationship once per signature.
pub fn decision_table(parties: usize) -> Result<Vec<TableRow>> {
    match parties {
        3 => Ok(THREE_PARTY_TABLE.iter().map(|(l, o)| row(l, &[o])).collect()),
        4 => Ok(FOUR_PARTY_TABLE.iter().map(|(l, s)| row(l, s)).collect()),
        n => Err(Error::domain(format!("decision tables exist for 3 or 4 senders, got {n}"))),
    }
}

/// Resolves the four-sender relationship from the outcomes of runs 1, 2, 3 (in order),
/// or names the next run.
pub fn resolve_f_r(outcomes: &[RunOutcome]) -> Result<Resolution> {
    ensure!(!outcomes.is_empty(), "need the outcome of at least one run");
    ensure!(outcomes.len() <= 3, "at most three runs, got {}", outcomes.len());
    for o in outcomes {
        ensure!(o.len() == 3, "four-sender outcomes have 3 bits, got {o}");
    }
    let k = outcomes.len();
    let mut complete = None;
    let mut open = false;
    for (label, sig) in FOUR_PARTY_TABLE {
        if sig.len() < k || !outcomes.iter().zip(sig).all(|(o, s)| o.matches_str(s)) {
            continue;
        }
        if sig.len() == k {
            complete = Some(label);
        } else {
            open = true;
        }
    }
    match (complete, open) {
        (Some(label), _) => {
            let rel: Relationship = label.parse()?;
            Ok(Resolution::Resolved(DecisionOutcome::from_relationship(rel, k)?))
        }
        (None, true) => Ok(Resolution::NeedMoreRuns { next_run: k + 1, pairing: Pairing::for_run(k + 1)? }),
        (None, false) => Err(Error::InconsistentOutcome(format!(
            "outcome sequence [{}] matches no table row",
            outcomes.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

const THREE_PARTY_TABLE: [(&str, &str); 5] =
    [("AAA", "000"), ("AAB", "011"), ("ABA", "110"), ("BAA", "101"), ("ABC", "111")];

/// Resolves three senders from a single run of the four-port device fed `(x1, x2, x3, x1)`.
pub fn resolve_three_party(outcome: &RunOutcome) -> Result<DecisionOutcome> {
    ensure!(outcome.len() == 3, "three-sender outcomes have 3 bits, got {outcome}");
    let hit = THREE_PARTY_TABLE.iter().find(|(_, o)| outcome.matches_str(o));
    match hit {
        Some((label, _)) => DecisionOutcome::from_relationship(label.parse()?, 1),
        None => Err(Error::InconsistentOutcome(format!("three-sender outcome {outcome} matches no row"))),
    }
}

/// Resolves two senders from the single difference detector.
pub fn resolve_two_party(outcome: &RunOutcome) -> Result<DecisionOutcome> {
    ensure!(outcome.len() == 1, "two-sender outcomes have 1 bit, got {outcome}");
    let rel = if outcome.all_zero() { Relationship::all_equal(2) } else { Relationship::all_distinct(2) };
    DecisionOutcome::from_relationship(rel, 1)
}

/// Rule for deciding whether all inputs are equal from one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AeRule {
    /// Equal iff the root detector D1 reaches its threshold; `counts = [C1]`.
    ReferenceDetector,
    /// Equal iff the summed counts of D2..DN stay below a single threshold.
    SumDetectors,
    /// Equal iff both observed detectors stay below their thresholds.
    TwoDetector,
}

impl FromStr for AeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" | "reference_detector" => Ok(AeRule::ReferenceDetector),
            "sum" | "sum_detectors" => Ok(AeRule::SumDetectors),
            "two" | "two_detector" => Ok(AeRule::TwoDetector),
            _ => Err(Error::domain(format!("unknown all-equal rule {s:?}"))),
        }
    }
}

/// Whether all inputs are judged equal under `rule`.
pub fn resolve_f_ae(counts: &[u64], thresholds: &[u64], rule: AeRule) -> Result<bool> {
    match rule {
        AeRule::ReferenceDetector => {
            ensure!(counts.len() == 1 && thresholds.len() == 1, "reference rule takes one count and one threshold");
            Ok(counts[0] >= thresholds[0])
        }
        AeRule::SumDetectors => {
            ensure!(!counts.is_empty() && thresholds.len() == 1, "sum rule takes counts and one threshold");
            Ok(counts.iter().sum::<u64>() < thresholds[0])
        }
        AeRule::TwoDetector => {
            ensure!(counts.len() == 2 && thresholds.len() == 2, "two-detector rule takes two counts and two thresholds");
            Ok(counts.iter().zip(thresholds).all(|(c, t)| c < t))
        }
    }
}

/// What the referee must determine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Target {
    AllEqual,
    Relationship,
}

/// How the inputs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// All senders interfere in one splitter tree.
    MultiParty,
    /// Repeated two-sender comparisons.
    TwoPartyPairwise,
}

/// Worst-case number of protocol runs.
pub fn run_budget(parties: usize, target: Target, scheme: Scheme) -> Result<u64> {
    ensure!(parties >= 2, "need at least two senders, got {parties}");
    let n = parties as u64;
    if scheme == Scheme::MultiParty {
        ensure!(parties.is_power_of_two(), "the splitter tree needs a power of two senders, got {parties}");
    }
    Ok(match (scheme, target) {
        (Scheme::MultiParty, Target::AllEqual) => 1,
        (Scheme::MultiParty, Target::Relationship) => n - 1,
        (Scheme::TwoPartyPairwise, Target::AllEqual) => n - 1,
        (Scheme::TwoPartyPairwise, Target::Relationship) => n * (n - 1) / 2,
    })
}

/// Sender sets whose summed fields each detector D2..DN compares, for an `n`-port tree.
pub fn detector_comparisons(n: usize) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    ensure!(n >= 2 && n.is_power_of_two(), "the splitter tree needs a power of two ports, got {n}");
    let mut out = vec![(Vec::new(), Vec::new()); n - 1];
    fn rec(lo: usize, hi: usize, out: &mut [(Vec<usize>, Vec<usize>)]) {
        if hi - lo < 2 {
            return;
        }
        let mid = (lo + hi) / 2;
        out[mid - 1] = ((lo..mid).collect(), (mid..hi).collect());
        rec(lo, mid, out);
        rec(mid, hi, out);
    }
    rec(0, n, &mut out);
    Ok(out)
}

/// Noise-free outcome of a four-sender run: a detector reads 1 iff it can click at all.
pub fn ideal_outcome(rel: &Relationship, pairing: &Pairing) -> Result<RunOutcome> {
    ensure!(rel.parties() == 4, "ideal outcomes are modelled for four senders");
    let pp = ProtocolParams::new(1000, 1.0, 0.2, 0.5, 4)?;
    let ch = ChannelModel::symmetric(4, 1.0, 0.0, 1.0)?;
    let profile = four_party_symmetric_paired(rel, pairing, 1.0, &ch, &pp)?;
    RunOutcome::new((2..=4).map(|d| u8::from(profile.probability(d).unwrap_or(0.0) > 0.0)).collect())
}

/// Feeds noise-free outcomes run by run until the table resolves.
pub fn resolve_ideal(rel: &Relationship) -> Result<DecisionOutcome> {
    let mut seen = Vec::new();
    for run in 1..=3 {
        seen.push(ideal_outcome(rel, &Pairing::for_run(run)?)?);
        if let Resolution::Resolved(d) = resolve_f_r(&seen)? {
            return Ok(d);
        }
    }
    Err(Error::InconsistentOutcome(format!("{rel} unresolved after three runs")))
}

/// Noise-free outcome of three senders on the four-port device.
pub fn ideal_three_party_outcome(rel: &Relationship) -> Result<RunOutcome> {
    ensure!(rel.parties() == 3, "expected three senders");
    let ports = [rel.group_of(0), rel.group_of(1), rel.group_of(2), rel.group_of(0)];
    ideal_outcome(&Relationship::from_labels(&ports)?, &Pairing::identity(4))
}

/// Runs needed by sequential two-sender comparisons (skipping pairs whose relation already
/// follows from earlier results) and by the four-sender table, for one relationship.
pub fn pairwise_run_count(rel: &Relationship) -> Result<(usize, usize)> {
    ensure!(rel.parties() == 4, "run comparison is tabulated for four senders");
    let n = rel.parties();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    let mut unequal: Vec<(usize, usize)> = Vec::new();
    let mut t_two = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a == b {
                continue;
            }
            let known = unequal.iter().any(|&(x, y)| {
                let (x, y) = (find(&mut parent, x), find(&mut parent, y));
                (x, y) == (a, b) || (x, y) == (b, a)
            });
            if known {
                continue;
            }
            t_two += 1;
            if rel.same(i, j) {
                parent[b] = a;
            } else {
                unequal.push((i, j));
            }
        }
    }
    Ok((t_two, resolve_ideal(rel)?.runs_used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relationship::enumerate;
    use proptest::prelude::*;

    fn o(s: &str) -> RunOutcome {
        s.parse().unwrap()
    }

    fn resolved(seq: &[&str]) -> DecisionOutcome {
        let v: Vec<RunOutcome> = seq.iter().map(|s| o(s)).collect();
        match resolve_f_r(&v).unwrap() {
            Resolution::Resolved(d) => d,
            other => panic!("{seq:?} -> {other:?}"),
        }
    }

    #[test]
    fn threshold_comparison_bits() {
        assert_eq!(outcome_bits(&[10, 10, 10], &[602, 553, 602]).unwrap(), o("000"));
        assert_eq!(outcome_bits(&[700, 10, 700], &[602, 553, 602]).unwrap(), o("101"));
        assert_eq!(outcome_bits(&[602, 553, 602], &[602, 553, 602]).unwrap(), o("111"));
        assert!(outcome_bits(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn outcome_parsing() {
        assert_eq!(o("011").to_string(), "011");
        assert!("012".parse::<RunOutcome>().is_err());
        assert!("".parse::<RunOutcome>().is_err());
    }

    #[test]
    fn table_examples() {
        let d = resolved(&["000"]);
        assert_eq!((d.f_r, d.runs_used, d.f_ae, d.f_ee), (14, 1, true, true));
        let d = resolved(&["111", "111", "011"]);
        assert_eq!((d.f_r, d.runs_used), (4, 3));
        assert_eq!(d.relationship, "ABCA".parse().unwrap());
        let d = resolved(&["011", "110"]);
        assert_eq!((d.f_r, d.runs_used), (12, 2));
        let d = resolved(&["010"]);
        assert_eq!(d.f_r, 9);
        for sig in [&["101", "111"][..], &["111", "101"], &["111", "111", "101"], &["111", "111", "111"]] {
            let d = resolved(sig);
            assert_eq!(d.f_r, 0);
            assert!(!d.f_ae && !d.f_ee);
        }
    }

    #[test]
    fn adaptive_schedule() {
        match resolve_f_r(&[o("111")]).unwrap() {
            Resolution::NeedMoreRuns { next_run, pairing } => {
                assert_eq!(next_run, 2);
                assert_eq!(pairing, Pairing::for_run(2).unwrap());
            }
            r => panic!("{r:?}"),
        }
        match resolve_f_r(&[o("111"), o("111")]).unwrap() {
            Resolution::NeedMoreRuns { next_run, .. } => assert_eq!(next_run, 3),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn inconsistent_sequences_are_errors() {
        for seq in [&["001"][..], &["100"], &["011", "101"], &["000", "000"], &["010", "010"]] {
            let v: Vec<RunOutcome> = seq.iter().map(|s| o(s)).collect();
            assert!(matches!(resolve_f_r(&v), Err(Error::InconsistentOutcome(_))), "{seq:?}");
        }
    }

    #[test]
    fn forward_map_round_trips_all_relationships() {
        let mut seen = Vec::new();
        for rel in enumerate(4).unwrap() {
            let d = resolve_ideal(&rel).unwrap();
            assert_eq!(d.relationship, rel);
            assert!(d.runs_used <= 3);
            assert_eq!(d.runs_used == 1, d.f_r == 14 || d.f_r == 9, "{rel}");
            assert_eq!(d.f_ae, rel.groups().len() == 1);
            let ee = (0..4).any(|a| (a + 1..4).any(|b| rel.same(a, b)));
            assert_eq!(d.f_ee, ee);
            seen.push(d.f_r);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..15).collect::<Vec<u64>>());
    }

    #[test]
    fn table_rows_match_forward_map() {
        let rows = decision_table(4).unwrap();
        assert_eq!(rows.len(), 18);
        for r in rows.iter().filter(|r| r.f_r != 0) {
            let fwd: Vec<RunOutcome> = (1..=r.signature.len())
                .map(|s| ideal_outcome(&r.relationship, &Pairing::for_run(s).unwrap()).unwrap())
                .collect();
            assert_eq!(fwd, r.signature, "{}", r.label);
            assert_eq!(r.relationship.size_label(), r.label);
        }
        let fr: Vec<u64> = rows.iter().map(|r| r.f_r).collect();
        assert_eq!(fr, [14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn three_sender_table() {
        let rows = decision_table(3).unwrap();
        assert_eq!(rows.iter().map(|r| r.f_r).collect::<Vec<_>>(), [4, 3, 2, 1, 0]);
        for r in &rows {
            assert_eq!(ideal_three_party_outcome(&r.relationship).unwrap(), r.signature[0]);
            assert_eq!(resolve_three_party(&r.signature[0]).unwrap().relationship, r.relationship);
        }
        assert_eq!(resolve_three_party(&o("011")).unwrap().relationship, "AAB".parse().unwrap());
        for bad in ["001", "010", "100"] {
            assert!(matches!(resolve_three_party(&o(bad)), Err(Error::InconsistentOutcome(_))));
        }
        assert!(decision_table(5).is_err());
    }

    #[test]
    fn all_equal_rules() {
        assert!(resolve_f_ae(&[10, 10], &[602, 553], AeRule::TwoDetector).unwrap());
        assert!(!resolve_f_ae(&[10, 700], &[602, 553], AeRule::TwoDetector).unwrap());
        assert!(resolve_f_ae(&[0, 0, 0], &[5], AeRule::SumDetectors).unwrap());
        assert!(!resolve_f_ae(&[0], &[3], AeRule::ReferenceDetector).unwrap());
        assert!(resolve_f_ae(&[1], &[1, 2], AeRule::ReferenceDetector).is_err());
        assert!("bogus".parse::<AeRule>().is_err());
        assert_eq!("sum".parse::<AeRule>().unwrap(), AeRule::SumDetectors);
    }

    #[test]
    fn run_budgets() {
        assert_eq!(run_budget(4, Target::Relationship, Scheme::MultiParty).unwrap(), 3);
        assert_eq!(run_budget(4, Target::Relationship, Scheme::TwoPartyPairwise).unwrap(), 6);
        for s in [Scheme::MultiParty, Scheme::TwoPartyPairwise] {
            assert_eq!(run_budget(2, Target::AllEqual, s).unwrap(), 1);
        }
        assert!(run_budget(6, Target::AllEqual, Scheme::MultiParty).is_err());
        assert_eq!(run_budget(6, Target::AllEqual, Scheme::TwoPartyPairwise).unwrap(), 5);
    }

    #[test]
    fn comparison_table() {
        let want = [
            ("AAAA", 3, 1), ("AAAB", 3, 2), ("AABA", 3, 2), ("ABAA", 3, 2), ("BAAA", 5, 2),
            ("AABB", 4, 1), ("ABAB", 4, 2), ("ABBA", 4, 2), ("AABC", 4, 2), ("ABAC", 4, 2),
            ("ABCA", 4, 3), ("BAAC", 5, 3), ("BACA", 5, 2), ("BCAA", 6, 2),
        ];
        for (label, tt, tm) in want {
            assert_eq!(pairwise_run_count(&label.parse().unwrap()).unwrap(), (tt, tm), "{label}");
        }
        let (tt, tm) = pairwise_run_count(&"ABCD".parse().unwrap()).unwrap();
        assert_eq!(tt, 6);
        assert!((2..=3).contains(&tm));
    }

    #[test]
    fn tree_comparisons() {
        let c = detector_comparisons(4).unwrap();
        assert_eq!(c[0], (vec![0], vec![1]));
        assert_eq!(c[1], (vec![0, 1], vec![2, 3]));
        assert_eq!(c[2], (vec![2], vec![3]));
        assert_eq!(detector_comparisons(8).unwrap()[3], (vec![0, 1, 2, 3], vec![4, 5, 6, 7]));
        assert!(detector_comparisons(6).is_err());
    }

    proptest! {
        #[test]
        fn multi_party_never_needs_more_runs(labels in proptest::collection::vec(0u8..4, 4)) {
            let rel = Relationship::from_labels(&labels).unwrap();
            let (tt, tm) = pairwise_run_count(&rel).unwrap();
            prop_assert!(tm <= tt);
            prop_assert!(tm <= 3);
        }
    }
}
