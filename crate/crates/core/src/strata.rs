//! Enumeration of all strata of the moduli space for a weight datum.
//!
//! Strategy: trees first, r-structures second. A tail-labeled tree is
//! admissible iff every vertex passes the flag-weight stability test with raw
//! tails; r-structures never change flag sums, so for each admissible tree
//! the per-vertex partitions (every non-singleton block of weight <= 1) are
//! enumerated independently. Trees are generated from pairwise-compatible
//! split sets, so each isomorphism class appears exactly once; deduplication
//! by canonical key is kept as a defensive check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use num::One;
use thiserror::Error;

use crate::labels::LabelSet;
use crate::trees::{ATree, CanonicalKey, VertexId};
use crate::weights::{Rational, WeightDatum};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StrataError {
    #[error("the given tree is not a stratum of this table")]
    UnknownStratum,
}

/// All isomorphism classes of dual trees for one weight datum, grouped by
/// complex dimension and ordered by canonical key within each dimension.
#[derive(Clone, Debug)]
pub struct StrataTable {
    weights: WeightDatum,
    by_dim: Vec<Vec<ATree>>,
    index: BTreeMap<CanonicalKey, (usize, usize)>,
}

impl StrataTable {
    pub fn weights(&self) -> &WeightDatum {
        &self.weights
    }

    /// Largest dimension, `n - 3`.
    pub fn max_dim(&self) -> usize {
        self.by_dim.len() - 1
    }

    pub fn strata(&self, dim: usize) -> &[ATree] {
        &self.by_dim[dim]
    }

    pub fn get(&self, dim: usize, pos: usize) -> &ATree {
        &self.by_dim[dim][pos]
    }

    /// Strata counts indexed by dimension.
    pub fn counts(&self) -> Vec<usize> {
        self.by_dim.iter().map(|v| v.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.by_dim.iter().map(|v| v.len()).sum()
    }

    pub fn position(&self, key: &CanonicalKey) -> Option<(usize, usize)> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, tree: &ATree) -> bool {
        self.index.contains_key(&tree.canonical_key())
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &ATree> {
        self.by_dim.iter().flatten()
    }

    /// Every stratum in the closure of `g`: all `g'` with `g' <= g`,
    /// including `g` itself, in table order.
    pub fn closure_strata(&self, g: &ATree) -> Result<Vec<&ATree>, StrataError> {
        if g.weights() != &self.weights {
            return Err(StrataError::UnknownStratum);
        }
        let start = self
            .position(&g.canonical_key())
            .ok_or(StrataError::UnknownStratum)?;
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some((dim, pos)) = queue.pop_front() {
            for child in self.get(dim, pos).covers() {
                let at = self
                    .position(&child.canonical_key())
                    .expect("moves stay inside the enumerated table");
                if seen.insert(at) {
                    queue.push_back(at);
                }
            }
        }
        let mut positions: Vec<(usize, usize)> = seen.into_iter().collect();
        positions.sort_unstable();
        Ok(positions.into_iter().map(|(d, p)| self.get(d, p)).collect())
    }

    /// Covering relations of the degeneration order as index pairs,
    /// higher-dimensional stratum first.
    pub fn hasse_edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut edges = BTreeSet::new();
        for (dim, list) in self.by_dim.iter().enumerate() {
            for (pos, tree) in list.iter().enumerate() {
                for child in tree.covers() {
                    let at = self
                        .position(&child.canonical_key())
                        .expect("moves stay inside the enumerated table");
                    edges.insert(((dim, pos), at));
                }
            }
        }
        edges.into_iter().collect()
    }
}

/// Enumerate one representative per isomorphism class of dual tree.
pub fn enumerate_strata(weights: &WeightDatum) -> StrataTable {
    let n = weights.n();
    let shared = Arc::new(weights.clone());
    let full = LabelSet::full(n);

    // candidate splits: the side not containing label 1, both sides >= 2 tails
    let candidates: Vec<LabelSet> = full
        .subsets(2)
        .into_iter()
        .filter(|s| !s.contains(1) && s.len() <= n - 2)
        .collect();

    let mut by_key: BTreeMap<CanonicalKey, ATree> = BTreeMap::new();
    let mut chosen: Vec<LabelSet> = Vec::new();
    collect_split_sets(&candidates, 0, &mut chosen, &mut |splits| {
        let Ok(skeleton) = ATree::from_splits_arc(Arc::clone(&shared), splits) else {
            return; // some vertex fails stability for this shape
        };
        let vertices = skeleton.vertex_ids();
        let partitions: Vec<Vec<Vec<LabelSet>>> = vertices
            .iter()
            .map(|v| admissible_partitions(&shared, skeleton.tails_at(*v)))
            .collect();
        for_each_combination(&partitions, &mut |choice| {
            let assignment: BTreeMap<VertexId, Vec<LabelSet>> = vertices
                .iter()
                .copied()
                .zip(choice.iter().map(|c| (*c).clone()))
                .collect();
            let tree = skeleton
                .with_blocks(&assignment)
                .expect("partitions were generated admissible");
            let prev = by_key.insert(tree.canonical_key(), tree);
            debug_assert!(prev.is_none(), "canonical keys collide");
        });
    });

    let mut by_dim: Vec<Vec<ATree>> = vec![Vec::new(); n - 2];
    // BTreeMap iteration is key-sorted, so each dimension list comes out in
    // canonical order.
    for (_, tree) in by_key {
        by_dim[tree.dimension()].push(tree);
    }
    let mut index = BTreeMap::new();
    for (dim, list) in by_dim.iter().enumerate() {
        for (pos, tree) in list.iter().enumerate() {
            index.insert(tree.canonical_key(), (dim, pos));
        }
    }
    StrataTable {
        weights: weights.clone(),
        by_dim,
        index,
    }
}

/// DFS over all pairwise-compatible subsets of the candidate splits.
fn collect_split_sets(
    candidates: &[LabelSet],
    start: usize,
    chosen: &mut Vec<LabelSet>,
    visit: &mut impl FnMut(&[LabelSet]),
) {
    visit(chosen);
    for i in start..candidates.len() {
        let s = candidates[i];
        let compatible = chosen
            .iter()
            .all(|t| s.is_disjoint(*t) || s.is_subset(*t) || t.is_subset(s));
        if compatible {
            chosen.push(s);
            collect_split_sets(candidates, i + 1, chosen, visit);
            chosen.pop();
        }
    }
}

/// All partitions of `tails` whose non-singleton blocks weigh at most 1.
/// Restricted-growth enumeration; blocks are pruned by weight as they grow.
fn admissible_partitions(weights: &WeightDatum, tails: LabelSet) -> Vec<Vec<LabelSet>> {
    let labels: Vec<usize> = tails.labels().collect();
    let mut out = Vec::new();
    let mut blocks: Vec<(LabelSet, Rational)> = Vec::new();
    fn rec(
        weights: &WeightDatum,
        labels: &[usize],
        idx: usize,
        blocks: &mut Vec<(LabelSet, Rational)>,
        out: &mut Vec<Vec<LabelSet>>,
    ) {
        if idx == labels.len() {
            let mut partition: Vec<LabelSet> = blocks.iter().map(|(b, _)| *b).collect();
            partition.sort_unstable();
            out.push(partition);
            return;
        }
        let label = labels[idx];
        let w = weights.weight(label).clone();
        let one = Rational::one();
        for i in 0..blocks.len() {
            if &blocks[i].1 + &w <= one {
                let saved = blocks[i].clone();
                blocks[i].0.insert(label);
                blocks[i].1 += &w;
                rec(weights, labels, idx + 1, blocks, out);
                blocks[i] = saved;
            }
        }
        blocks.push((LabelSet::singleton(label), w));
        rec(weights, labels, idx + 1, blocks, out);
        blocks.pop();
    }
    rec(weights, &labels, 0, &mut blocks, &mut out);
    out
}

fn for_each_combination<T>(choices: &[Vec<T>], visit: &mut impl FnMut(&[&T])) {
    let mut current: Vec<&T> = Vec::with_capacity(choices.len());
    fn rec<'a, T>(
        choices: &'a [Vec<T>],
        idx: usize,
        current: &mut Vec<&'a T>,
        visit: &mut impl FnMut(&[&T]),
    ) {
        if idx == choices.len() {
            visit(current);
            return;
        }
        for item in &choices[idx] {
            current.push(item);
            rec(choices, idx + 1, current, visit);
            current.pop();
        }
    }
    rec(choices, 0, &mut current, visit);
}

/// Euler characteristic of the open stratum: the product over vertices of
/// `(-1)^(k-3) (k-3)!` where `k` counts blocks plus edge flags, obtained by
/// fibering configurations of `k` distinct points on a line by lines minus
/// `j` points (each with Euler characteristic `2 - j`).
pub fn stratum_euler_characteristic(g: &ATree) -> i64 {
    g.vertex_ids()
        .into_iter()
        .map(|v| {
            let k = g.mark_count_at(v) as i64;
            (0..k - 3).map(|j| -1 - j).product::<i64>()
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::rat;

    fn ones(n: usize) -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1); n]).unwrap()
    }

    fn fig1b() -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1), rat(1, 1), rat(1, 4), rat(1, 4)]).unwrap()
    }

    fn ls(labels: &[usize]) -> LabelSet {
        LabelSet::from_labels(labels.iter().copied())
    }

    #[test]
    fn classical_n4_counts() {
        let t = enumerate_strata(&ones(4));
        assert_eq!(t.counts(), vec![3, 1]);
    }

    #[test]
    fn fig1b_dimension_zero_contents() {
        let a = fig1b();
        let t = enumerate_strata(&a);
        assert_eq!(t.counts(), vec![3, 1]);
        let expected: BTreeSet<CanonicalKey> = [
            ATree::from_splits(&a, &[ls(&[2, 4])]).unwrap(),
            ATree::from_splits(&a, &[ls(&[2, 3])]).unwrap(),
            ATree::one_vertex(&a, &[ls(&[1]), ls(&[2]), ls(&[3, 4])]).unwrap(),
        ]
        .iter()
        .map(|g| g.canonical_key())
        .collect();
        let got: BTreeSet<CanonicalKey> =
            t.strata(0).iter().map(|g| g.canonical_key()).collect();
        assert_eq!(got, expected);
        // the split {1,2}|{3,4} is excluded: its light side is unstable
        assert!(ATree::from_splits(&a, &[ls(&[3, 4])]).is_err());
    }

    #[test]
    fn fig1c_dimension_zero_is_three_merges() {
        let c = WeightDatum::new(vec![rat(1, 1), rat(1, 2), rat(1, 2), rat(1, 2)]).unwrap();
        let t = enumerate_strata(&c);
        assert_eq!(t.counts(), vec![3, 1]);
        for g in t.strata(0) {
            assert_eq!(g.edge_count(), 0, "all boundary strata are collisions");
        }
    }

    #[test]
    fn classical_n5_counts() {
        let t = enumerate_strata(&ones(5));
        assert_eq!(t.counts(), vec![15, 10, 1]);
    }

    #[test]
    fn classical_n6_counts() {
        let t = enumerate_strata(&ones(6));
        assert_eq!(t.counts(), vec![105, 105, 25, 1]);
    }

    #[test]
    fn classical_boundary_divisor_formula() {
        // 2^(n-1) - n - 1 boundary divisors for the all-ones chamber
        for n in [5usize, 6] {
            let t = enumerate_strata(&ones(n));
            assert_eq!(t.strata(n - 4).len(), (1 << (n - 1)) - n - 1);
        }
    }

    #[test]
    fn closure_of_principal_is_everything() {
        let t = enumerate_strata(&ones(5));
        let principal = &t.strata(2)[0];
        assert_eq!(t.closure_strata(principal).unwrap().len(), t.total());
    }

    #[test]
    fn closure_of_point_is_itself() {
        let t = enumerate_strata(&ones(5));
        let point = &t.strata(0)[0];
        let closure = t.closure_strata(point).unwrap();
        assert_eq!(closure.len(), 1);
        assert_eq!(closure[0].canonical_key(), point.canonical_key());
    }

    #[test]
    fn closure_of_one_edge_tree() {
        let a = ones(5);
        let t = enumerate_strata(&a);
        let g = ATree::from_splits(&a, &[ls(&[3, 4, 5])]).unwrap();
        let closure = t.closure_strata(&g).unwrap();
        // itself plus the three two-edge refinements of the {3,4,5} side
        assert_eq!(closure.len(), 4);
    }

    #[test]
    fn unknown_stratum_is_rejected() {
        let t = enumerate_strata(&ones(4));
        let other = ATree::principal(&fig1b());
        assert!(matches!(
            t.closure_strata(&other),
            Err(StrataError::UnknownStratum)
        ));
    }

    #[test]
    fn euler_characteristic_examples() {
        let t = enumerate_strata(&ones(4));
        assert_eq!(stratum_euler_characteristic(&t.strata(0)[0]), 1);
        assert_eq!(stratum_euler_characteristic(&t.strata(1)[0]), -1);
        let p5 = ATree::principal(&ones(5));
        assert_eq!(stratum_euler_characteristic(&p5), 2);
    }

    #[test]
    fn chamber_invariance_small() {
        // signature-equal data produce identical key lists per dimension
        let pairs = [
            ("1,1,1/4,1/4", "1,1,1/3,1/3"),
            ("1,1,1,1", "1,9/10,9/10,9/10"),
            ("1,1,1/5,1/5,1/5", "1,1,1/4,1/4,1/4"),
        ];
        for (x, y) in pairs {
            let a = WeightDatum::parse(x).unwrap();
            let b = WeightDatum::parse(y).unwrap();
            assert!(a.same_chamber(&b), "{x} vs {y}");
            let ta = enumerate_strata(&a);
            let tb = enumerate_strata(&b);
            assert_eq!(ta.counts(), tb.counts());
            for d in 0..=ta.max_dim() {
                let ka: Vec<CanonicalKey> =
                    ta.strata(d).iter().map(|g| g.canonical_key()).collect();
                let kb: Vec<CanonicalKey> =
                    tb.strata(d).iter().map(|g| g.canonical_key()).collect();
                assert_eq!(ka, kb);
            }
        }
    }

    #[test]
    fn moves_stay_in_table_and_lower_dimension() {
        for weights in [ones(5), fig1b(), WeightDatum::parse("1,1,1/5,1/5,1/5").unwrap()] {
            let t = enumerate_strata(&weights);
            for g in t.iter_all() {
                for child in g.covers() {
                    assert_eq!(child.dimension() + 1, g.dimension());
                    assert!(t.contains(&child), "move image must be enumerated");
                }
                for (f, _) in g.edges() {
                    let up = g.contract_edge(f).unwrap();
                    assert_eq!(up.codimension() + 1, g.codimension());
                    assert!(t.contains(&up));
                }
            }
        }
    }

    #[test]
    fn n3_has_single_point_stratum() {
        let a = WeightDatum::parse("1,1,1/2").unwrap();
        let t = enumerate_strata(&a);
        assert_eq!(t.counts(), vec![1]);
        assert_eq!(stratum_euler_characteristic(&t.strata(0)[0]), 1);
    }
}
