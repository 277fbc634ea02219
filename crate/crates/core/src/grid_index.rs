//! Multi-index arithmetic and downward-closed index sets.
//!
//! Every sparse-grid construction in this crate is driven by a set of level
//! multi-indices that must stay downward closed so the hierarchical surpluses
//! telescope correctly. [`Downset`] stores membership in a hash set plus a
//! journal of insertion order, which makes every downstream accumulation
//! reproducible run to run.

use crate::error::{Error, Result};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::collections::HashSet;
use std::fmt;

/// A vector of per-dimension levels, all `>= 1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(levels: Vec<u32>) -> Self {
        assert!(
            !levels.is_empty() && levels.iter().all(|&l| l >= 1),
            "multi-index components must be >= 1"
        );
        Self(levels)
    }

    /// The root index (1, ..., 1) in `d` dimensions.
    pub fn ones(d: usize) -> Self {
        Self::new(vec![1; d])
    }

    /// Isotropic index (l, ..., l) in `d` dimensions.
    pub fn uniform(d: usize, level: u32) -> Self {
        Self::new(vec![level; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn level(&self, k: usize) -> u32 {
        self.0[k]
    }

    /// `|i|_1`, the sum of the levels.
    pub fn level_sum(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `self + e_k`.
    pub fn bumped(&self, k: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[k] += 1;
        MultiIndex(v)
    }

    /// `self - e_k`, or `None` when the k-th level is already 1.
    pub fn lowered(&self, k: usize) -> Option<MultiIndex> {
        if self.0[k] <= 1 {
            return None;
        }
        let mut v = self.0.clone();
        v[k] -= 1;
        Some(MultiIndex(v))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

/// A downward-closed set of multi-indices below a componentwise level cap.
///
/// Insertion order is preserved in a journal so that quadrature values built
/// by iterating the set are bit-for-bit reproducible.
#[derive(Clone)]
pub struct Downset {
    cap: MultiIndex,
    members: HashSet<MultiIndex>,
    journal: Vec<MultiIndex>,
}

impl Downset {
    /// The singleton downset `{(1, ..., 1)}`.
    pub fn root(cap: MultiIndex) -> Self {
        let one = MultiIndex::ones(cap.dim());
        let mut members = HashSet::new();
        members.insert(one.clone());
        Self {
            cap,
            members,
            journal: vec![one],
        }
    }

    /// All indices `1 <= i <= cap`, inserted in lexicographic order.
    pub fn full_box(cap: &MultiIndex) -> Self {
        let mut set = Self::root(cap.clone());
        let mut idx = MultiIndex::ones(cap.dim());
        loop {
            // lexicographic odometer over the box
            let mut k = cap.dim();
            loop {
                if k == 0 {
                    return set;
                }
                k -= 1;
                if idx.0[k] < cap.0[k] {
                    idx.0[k] += 1;
                    for v in idx.0.iter_mut().skip(k + 1) {
                        *v = 1;
                    }
                    break;
                }
            }
            if !set.members.contains(&idx) {
                set.members.insert(idx.clone());
                set.journal.push(idx.clone());
            }
        }
    }

    /// Builds a downset from indices in the given order, validating closure
    /// as it goes.
    pub fn from_indices<I: IntoIterator<Item = MultiIndex>>(
        cap: MultiIndex,
        indices: I,
    ) -> Result<Self> {
        let mut set = Self::root(cap);
        for idx in indices {
            if set.contains(&idx) {
                continue;
            }
            set.insert(idx)?;
        }
        Ok(set)
    }

    /// Rebuilds a downset from a serialized journal.
    pub fn from_journal(cap: MultiIndex, journal: Vec<Vec<u32>>) -> Result<Self> {
        Self::from_indices(cap, journal.into_iter().map(MultiIndex::new))
    }

    pub fn dim(&self) -> usize {
        self.cap.dim()
    }

    pub fn cap(&self) -> &MultiIndex {
        &self.cap
    }

    pub fn len(&self) -> usize {
        self.journal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journal.is_empty()
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        self.members.contains(idx)
    }

    /// Members in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.journal.iter()
    }

    /// Number of indices in the full box `{i <= cap}` under the 1-origin
    /// convention, as a float because it overflows integers in high
    /// dimensions. The corresponding 0-origin count `prod(cap_k + 1)` is
    /// reported alongside for diagnostics.
    pub fn cap_cardinality(&self) -> (f64, f64) {
        let ours = self.cap.levels().iter().map(|&l| l as f64).product();
        let zero_origin = self.cap.levels().iter().map(|&l| (l + 1) as f64).product();
        (ours, zero_origin)
    }

    /// Largest level reached in dimension `k`.
    pub fn max_level(&self, k: usize) -> u32 {
        self.journal.iter().map(|i| i.level(k)).max().unwrap_or(0)
    }

    /// True iff `idx` is not a member, lies below the cap, and adding it
    /// keeps the set downward closed.
    pub fn is_covering_element(&self, idx: &MultiIndex) -> Result<bool> {
        if idx.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: idx.dim(),
            });
        }
        if self.members.contains(idx) || !idx.dominated_by(&self.cap) {
            return Ok(false);
        }
        for k in 0..idx.dim() {
            if let Some(pred) = idx.lowered(k) {
                if !self.members.contains(&pred) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// All covering elements within the cap, in lexicographic order.
    pub fn covering_elements(&self) -> Vec<MultiIndex> {
        let mut out: Vec<MultiIndex> = Vec::new();
        let mut seen: HashSet<MultiIndex> = HashSet::new();
        for member in &self.journal {
            for k in 0..self.dim() {
                let cand = member.bumped(k);
                if seen.contains(&cand) {
                    continue;
                }
                if self.is_covering_element(&cand).unwrap_or(false) {
                    seen.insert(cand.clone());
                    out.push(cand);
                }
            }
        }
        out.sort();
        out
    }

    /// Inserts a covering element; rejects anything that would break closure
    /// or exceed the cap.
    pub fn insert(&mut self, idx: MultiIndex) -> Result<()> {
        if !self.is_covering_element(&idx)? {
            return Err(Error::NotADownset { index: idx });
        }
        self.members.insert(idx.clone());
        self.journal.push(idx);
        Ok(())
    }

    /// Checks downward closure of the whole set (used to validate externally
    /// supplied index sets).
    pub fn validate_closure(&self) -> Result<()> {
        for idx in &self.journal {
            for k in 0..self.dim() {
                if let Some(pred) = idx.lowered(k) {
                    if !self.members.contains(&pred) {
                        return Err(Error::NotADownset { index: idx.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Members of `self` that are not in `other`, in journal order.
    pub fn difference<'a>(&'a self, other: &'a Downset) -> impl Iterator<Item = &'a MultiIndex> {
        self.journal.iter().filter(move |i| !other.contains(i))
    }
}

impl fmt::Debug for Downset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Downset")
            .field("cap", &self.cap)
            .field("members", &self.journal)
            .finish()
    }
}

impl PartialEq for Downset {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for Downset {}

// JSON form: an array of integer arrays, insertion order preserved.
impl Serialize for Downset {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.journal.len()))?;
        for idx in &self.journal {
            seq.serialize_element(idx.levels())?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn covering_element_basics() {
        let set = Downset::root(mi(&[3, 3]));
        assert!(set.is_covering_element(&mi(&[2, 1])).unwrap());
        assert!(!set.is_covering_element(&mi(&[2, 2])).unwrap());

        let set = Downset::from_indices(mi(&[3, 3]), vec![mi(&[2, 1]), mi(&[1, 2])]).unwrap();
        assert!(set.is_covering_element(&mi(&[2, 2])).unwrap());
    }

    #[test]
    fn covering_elements_respect_cap() {
        let set = Downset::root(mi(&[3, 3]));
        assert_eq!(set.covering_elements(), vec![mi(&[1, 2]), mi(&[2, 1])]);

        let set = Downset::from_indices(mi(&[2, 2]), vec![mi(&[2, 1])]).unwrap();
        assert_eq!(set.covering_elements(), vec![mi(&[1, 2])]);

        let full = Downset::full_box(&mi(&[2, 2]));
        assert!(full.covering_elements().is_empty());
    }

    #[test]
    fn full_box_counts() {
        assert_eq!(Downset::full_box(&mi(&[2, 2])).len(), 4);
        assert_eq!(Downset::full_box(&mi(&[1, 1, 1])).len(), 1);
        assert_eq!(Downset::full_box(&mi(&[3, 2])).len(), 6);
    }

    #[test]
    fn insert_rejects_closure_violations() {
        let mut set = Downset::root(mi(&[3, 3]));
        assert!(set.insert(mi(&[2, 2])).is_err());
        set.insert(mi(&[2, 1])).unwrap();
        set.insert(mi(&[1, 2])).unwrap();
        set.insert(mi(&[2, 2])).unwrap();
        set.validate_closure().unwrap();
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let set = Downset::root(mi(&[3, 3]));
        assert!(matches!(
            set.is_covering_element(&mi(&[2])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn journal_serializes_in_insertion_order() {
        let set = Downset::from_indices(mi(&[3, 3]), vec![mi(&[2, 1]), mi(&[1, 2])]).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, "[[1,1],[2,1],[1,2]]");
        let back = Downset::from_journal(mi(&[3, 3]), vec![vec![1, 1], vec![2, 1], vec![1, 2]])
            .unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn insertions_from_covering_elements_stay_closed() {
        // brute-force closure check while growing greedily in several shapes
        for cap in [mi(&[4, 4]), mi(&[3, 3, 3]), mi(&[4, 2, 3, 2])] {
            let mut set = Downset::root(cap);
            loop {
                let cands = set.covering_elements();
                let Some(first) = cands.first() else { break };
                set.insert(first.clone()).unwrap();
                set.validate_closure().unwrap();
            }
            // cap saturated: the set must now be the full box
            let (card, _) = set.cap_cardinality();
            assert_eq!(set.len() as f64, card);
        }
    }
}
