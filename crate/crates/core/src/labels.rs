//! Small sets of 1-based tail labels, packed into a bitmask.
//!
//! Every external identity in the system is a tail label in `1..=n`; sets of
//! labels show up everywhere (chamber signatures, splits, r-structure blocks,
//! vertex fingerprints), so they get a compact canonical representation with
//! a total order that all deterministic output relies on.

use std::fmt;

/// A subset of `{1, ..., n}` for `n <= 32`, stored as a bitmask.
///
/// The derived `Ord` (numeric order of the mask) is the canonical sort order
/// used for splits, blocks and fingerprints throughout the crate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LabelSet(u32);

/// Largest supported number of marked points.
pub const MAX_LABELS: usize = 32;

impl LabelSet {
    pub fn empty() -> Self {
        LabelSet(0)
    }

    /// The full set `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_LABELS);
        if n == 0 {
            LabelSet(0)
        } else {
            LabelSet(u32::MAX >> (MAX_LABELS - n))
        }
    }

    pub fn singleton(label: usize) -> Self {
        let mut s = LabelSet(0);
        s.insert(label);
        s
    }

    pub fn from_labels<I: IntoIterator<Item = usize>>(labels: I) -> Self {
        let mut s = LabelSet(0);
        for l in labels {
            s.insert(l);
        }
        s
    }

    pub fn insert(&mut self, label: usize) {
        assert!((1..=MAX_LABELS).contains(&label), "label out of range: {label}");
        self.0 |= 1 << (label - 1);
    }

    pub fn remove(&mut self, label: usize) {
        assert!((1..=MAX_LABELS).contains(&label));
        self.0 &= !(1 << (label - 1));
    }

    pub fn contains(self, label: usize) -> bool {
        (1..=MAX_LABELS).contains(&label) && self.0 & (1 << (label - 1)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        LabelSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        LabelSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        LabelSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Labels in ascending order.
    pub fn labels(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (1..=MAX_LABELS).filter(move |l| bits & (1 << (l - 1)) != 0)
    }

    pub fn min_label(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize + 1)
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_bits(bits: u32) -> Self {
        LabelSet(bits)
    }

    /// All subsets of `self` with at least `min_size` elements, ascending by mask.
    pub fn subsets(self, min_size: usize) -> Vec<LabelSet> {
        let mut out = Vec::new();
        // enumerate submasks of self.0 in increasing order
        let full = self.0;
        let mut sub = 0u32;
        loop {
            if (sub.count_ones() as usize) >= min_size {
                out.push(LabelSet(sub));
            }
            if sub == full {
                break;
            }
            sub = (sub.wrapping_sub(full)) & full;
        }
        out.sort_unstable();
        out
    }
}

impl FromIterator<usize> for LabelSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        LabelSet::from_labels(iter)
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.labels().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_set_ops() {
        let s = LabelSet::from_labels([3, 1, 4]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(1) && s.contains(3) && s.contains(4));
        assert!(!s.contains(2));
        assert_eq!(s.labels().collect::<Vec<_>>(), vec![1, 3, 4]);
        assert_eq!(s.min_label(), Some(1));
        assert_eq!(format!("{s:?}"), "{1,3,4}");
    }

    #[test]
    fn full_and_subsets() {
        let f = LabelSet::full(4);
        assert_eq!(f.labels().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        let subs = f.subsets(2);
        // C(4,2) + C(4,3) + C(4,4) = 6 + 4 + 1
        assert_eq!(subs.len(), 11);
        assert!(subs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subset_relations() {
        let a = LabelSet::from_labels([2, 3]);
        let b = LabelSet::from_labels([1, 2, 3]);
        assert!(a.is_subset(b));
        assert!(!b.is_subset(a));
        assert!(a.is_disjoint(LabelSet::singleton(4)));
        assert_eq!(b.difference(a), LabelSet::singleton(1));
    }
}
