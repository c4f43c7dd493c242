//! Equality relationships among the senders' messages, i.e. set partitions of the senders.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::error::{ensure, Error, Result};
use crate::params::Pairing;

/// Largest party count accepted by [`enumerate`].
pub const MAX_ENUMERATE: usize = 12;

/// A set partition of the senders, stored as a restricted-growth string: sender 0 is in
/// group 0 and each sender's group is at most one more than the largest group before it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relationship {
    rgs: Vec<u8>,
}

impl Relationship {
    /// Canonicalizes an arbitrary group labelling (`labels[k]` is sender `k`'s group tag).
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Result<Self> {
        ensure!(labels.len() >= 2, "a relationship needs at least two senders");
        ensure!(labels.len() <= 26, "at most 26 senders are supported");
        let mut seen: Vec<&T> = Vec::new();
        let mut rgs = Vec::with_capacity(labels.len());
        for l in labels {
            let idx = match seen.iter().position(|s| *s == l) {
                Some(i) => i,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            };
            rgs.push(idx as u8);
        }
        Ok(Relationship { rgs })
    }

    pub fn all_equal(parties: usize) -> Self {
        Relationship { rgs: alloc::vec![0; parties] }
    }

    pub fn all_distinct(parties: usize) -> Self {
        Relationship { rgs: (0..parties as u8).collect() }
    }

    pub fn parties(&self) -> usize {
        self.rgs.len()
    }

    /// Group index of sender `k` in canonical numbering.
    pub fn group_of(&self, k: usize) -> usize {
        self.rgs[k] as usize
    }

    pub fn group_count(&self) -> usize {
        self.rgs.iter().copied().max().map_or(0, |g| g as usize + 1)
    }

    /// Groups as sorted zero-based sender lists, in canonical order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.group_count()];
        for (k, &g) in self.rgs.iter().enumerate() {
            out[g as usize].push(k);
        }
        out
    }

    pub fn largest_group(&self) -> usize {
        self.groups().iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.rgs[a] == self.rgs[b]
    }

    pub fn is_all_equal(&self) -> bool {
        self.group_count() == 1
    }

    /// True iff at least two senders hold equal messages.
    pub fn exists_equal(&self) -> bool {
        self.group_count() < self.parties()
    }

    /// Restricted-growth label, e.g. `AABC`.
    pub fn label(&self) -> String {
        self.rgs.iter().map(|&g| (b'A' + g) as char).collect()
    }

    /// Groups ordered by size (largest first), ties by smallest member.
    pub fn groups_by_size(&self) -> Vec<Vec<usize>> {
        let mut g = self.groups();
        g.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        g
    }

    /// Label whose letters follow group size, e.g. `BCAA` for `{3,4}{1}{2}`.
    pub fn size_label(&self) -> String {
        let mut letters = alloc::vec![b'?'; self.parties()];
        for (i, grp) in self.groups_by_size().iter().enumerate() {
            for &k in grp {
                letters[k] = b'A' + i as u8;
            }
        }
        letters.into_iter().map(char::from).collect()
    }

    /// The relationship seen at the splitter ports under `pairing`.
    pub fn at_ports(&self, pairing: &Pairing) -> Result<Self> {
        ensure!(
            pairing.len() == self.parties(),
            "pairing has {} ports, relationship has {} senders",
            pairing.len(),
            self.parties()
        );
        Self::from_labels(&pairing.apply(&self.rgs))
    }

    /// Multiset of group sizes, sorted descending.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.groups().iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Ordering used by the relationship function's integer codomain: fewer groups first,
    /// then larger biggest group, then the size-ordered groups lexicographically.
    pub fn codomain_cmp(&self, other: &Self) -> Ordering {
        self.group_count()
            .cmp(&other.group_count())
            .then(other.largest_group().cmp(&self.largest_group()))
            .then_with(|| self.groups_by_size().cmp(&other.groups_by_size()))
    }

    /// Value of the relationship function: `B_N - 1` for all-equal down to 0 for all-distinct.
    pub fn f_r(&self) -> Result<u64> {
        let all = codomain_order(self.parties())?;
        let pos = all.iter().position(|r| r == self).expect("enumeration is complete");
        Ok((all.len() - 1 - pos) as u64)
    }

    /// Worst-case per-position bit patterns: each pair of distinct groups differs on
    /// exactly a `delta` fraction of positions, split evenly across patterns.
    pub fn pattern_weights(&self, delta: f64) -> Result<Vec<GroupPattern>> {
        ensure!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1), got {delta}");
        let g = self.group_count();
        if g == 1 {
            return Ok(alloc::vec![GroupPattern { flips: 0, weight: 1.0 }]);
        }
        ensure!(g <= 21, "too many groups ({g}) for pattern enumeration");
        let count = 1u32 << (g - 1);
        let each = delta / (1u64 << (g - 2)) as f64;
        let rest = 1.0 - (count - 1) as f64 * each;
        ensure!(
            rest >= -1e-15,
            "delta = {delta} too large for {g} mutually distinct groups (needs delta <= {})",
            (1u64 << (g - 2)) as f64 / (count - 1) as f64
        );
        let mut out = Vec::with_capacity(count as usize);
        out.push(GroupPattern { flips: 0, weight: rest.max(0.0) });
        for mask in 1..count {
            out.push(GroupPattern { flips: mask << 1, weight: each });
        }
        Ok(out)
    }
}

/// One class of codeword positions: which groups carry bit 1 (group 0 is the reference,
/// always 0) and the fraction of positions in the class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPattern {
    pub flips: u32,
    pub weight: f64,
}

impl GroupPattern {
    pub fn group_bit(&self, group: usize) -> u8 {
        ((self.flips >> group) & 1) as u8
    }

    /// Bits per sender for this class.
    pub fn sender_bits(&self, rel: &Relationship) -> Vec<u8> {
        (0..rel.parties()).map(|k| self.group_bit(rel.group_of(k))).collect()
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Relationship {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ensure!(
            !s.is_empty() && s.bytes().all(|b| b.is_ascii_uppercase()),
            "relationship label {s:?} must be uppercase letters"
        );
        Self::from_labels(s.as_bytes())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Relationship {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Relationship {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bell number `B_n`, the number of set partitions of `n` elements.
pub fn bell_number(n: usize) -> u128 {
    let mut row: Vec<u128> = alloc::vec![1];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &x in &row {
            let prev = *next.last().unwrap();
            next.push(prev + x);
        }
        row = next;
    }
    row[0]
}

/// All relationships on `parties` senders, restricted-growth strings in lexicographic order.
pub fn enumerate(parties: usize) -> Result<Vec<Relationship>> {
    ensure!(
        (2..=MAX_ENUMERATE).contains(&parties),
        "party count {parties} outside 2..={MAX_ENUMERATE}"
    );
    let mut out = Vec::new();
    let mut rgs = alloc::vec![0u8; parties];
    fn rec(rgs: &mut Vec<u8>, pos: usize, max: u8, out: &mut Vec<Relationship>) {
        if pos == rgs.len() {
            out.push(Relationship { rgs: rgs.clone() });
            return;
        }
        for g in 0..=max + 1 {
            rgs[pos] = g;
            rec(rgs, pos + 1, max.max(g), out);
        }
    }
    rec(&mut rgs, 1, 0, &mut out);
    Ok(out)
}

/// All relationships sorted by [`Relationship::codomain_cmp`] (all-equal first).
pub fn codomain_order(parties: usize) -> Result<Vec<Relationship>> {
    let mut all = enumerate(parties)?;
    all.sort_by(|a, b| a.codomain_cmp(b));
    Ok(all)
}

/// Worst-case pattern fractions of a four-party relationship at the splitter ports.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PatternFractions {
    /// Positions where not all four ports agree.
    pub total: f64,
    /// Positions where ports 1 and 2 differ.
    pub d12: f64,
    /// Positions where ports 3 and 4 differ.
    pub d34: f64,
    /// Positions where exactly one port disagrees with the other three.
    pub one_vs_three: f64,
    /// Positions of the form `xxyy` with `x != y`.
    pub pair_vs_pair: f64,
    /// Positions of the form `xyxy` or `xyyx`.
    pub crossed: f64,
}

/// Pattern fractions of a four-party relationship after applying `pairing`.
pub fn relationship_profile(
    rel: &Relationship,
    pairing: &Pairing,
    delta: f64,
) -> Result<PatternFractions> {
    ensure!(rel.parties() == 4, "pattern fractions are defined for four senders");
    rel.at_ports(pairing)?;
    let mut f = PatternFractions::default();
    for pat in rel.pattern_weights(delta)? {
        let sb = pat.sender_bits(rel);
        let b: Vec<u8> = pairing.apply(&sb);
        let ones = b.iter().filter(|&&x| x == 1).count();
        let w = pat.weight;
        if ones == 0 || ones == 4 {
            continue;
        }
        f.total += w;
        if b[0] != b[1] {
            f.d12 += w;
        }
        if b[2] != b[3] {
            f.d34 += w;
        }
        match (ones, b[0] == b[1]) {
            (1 | 3, _) => f.one_vs_three += w,
            (2, true) => f.pair_vs_pair += w,
            (2, false) => f.crossed += w,
            _ => unreachable!(),
        }
    }
    Ok(f)
}
