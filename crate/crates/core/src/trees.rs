//! Dual trees of weighted pointed stable curves.
//!
//! An `ATree` is a tail-labeled weighted tree together with a per-vertex
//! r-structure (a partition of the tails at each vertex into blocks of
//! colliding marked points). Tails carry the weights of the datum, edge flags
//! weigh 1, every block weighs at most 1 and every vertex's flag weights sum
//! to strictly more than 2.
//!
//! Internal flag and vertex ids are arbitrary and never serialized; the only
//! external identity is the tail labeling by `1..=n`. `CanonicalKey` is the
//! complete isomorphism invariant used for deduplication and deterministic
//! ordering: the edge-induced splits of the tail set plus, per vertex, the
//! partition of all tails into the subtrees around it and the list of blocks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use num::One;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use crate::labels::LabelSet;
use crate::weights::{format_rational, rat, vertex_weight_structure, Rational, WeightDatum};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FlagId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VertexId(pub u32);

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("block {block} has weight {total} > 1")]
    BlockTooHeavy { block: LabelSet, total: String },
    #[error("flag is not part of an edge")]
    NotAnEdge,
    #[error("no such block at the given vertex")]
    NotAtVertex,
    #[error("need at least two blocks to identify")]
    TooFewBlocks,
    #[error("tail {label} does not lie in a singleton block")]
    NotSingleton { label: usize },
    #[error("removing the tail leaves an invalid weight datum")]
    InvalidResidualDatum,
    #[error("vertex with tails {tails} and {edges} edges is unstable (flag sum {total})")]
    UnstableVertex {
        tails: LabelSet,
        edges: usize,
        total: String,
    },
    #[error("blocks do not partition the tails at the vertex")]
    InvalidBlocks,
    #[error("no such vertex")]
    NoSuchVertex,
}

/// One entry of a vertex's weight structure: either an edge flag (weight 1)
/// or a block of tails (weight = sum of the block, at most 1).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Mark {
    EdgeFlag(FlagId),
    TailBlock(LabelSet),
}

/// Classification of the fiber of the tree-level forgetful map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FiberKind {
    /// A projective line minus the other special points at the supporting vertex.
    PuncturedLine { punctures: usize },
    /// Product of the open moduli of the vertices collapsed by stabilization.
    ProductOfModuli { factors: Vec<WeightDatum> },
}

/// Complete isomorphism invariant of an `ATree` (identity on tail labels).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CanonicalKey {
    /// Edge splits, each recorded as the side not containing label 1; sorted.
    pub splits: Vec<LabelSet>,
    /// Per-vertex keys, sorted.
    pub vertices: Vec<VertexKey>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VertexKey {
    /// Partition of all tails into the subtrees around the vertex; sorted.
    pub fingerprint: Vec<LabelSet>,
    /// The r-structure blocks at the vertex; sorted.
    pub blocks: Vec<LabelSet>,
}

#[derive(Clone, Debug)]
pub struct ATree {
    pub(crate) weights: Arc<WeightDatum>,
    pub(crate) boundary: BTreeMap<FlagId, VertexId>,
    pub(crate) involution: BTreeMap<FlagId, FlagId>,
    pub(crate) tail_labels: BTreeMap<FlagId, usize>,
    pub(crate) blocks: BTreeMap<VertexId, Vec<LabelSet>>,
}

impl PartialEq for ATree {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.canonical_key() == other.canonical_key()
    }
}
impl Eq for ATree {}

impl ATree {
    /// Single vertex carrying all `n` tails with the given r-structure.
    pub fn one_vertex(weights: &WeightDatum, blocks: &[LabelSet]) -> Result<ATree, TreeError> {
        Self::one_vertex_arc(Arc::new(weights.clone()), blocks)
    }

    pub(crate) fn one_vertex_arc(
        weights: Arc<WeightDatum>,
        blocks: &[LabelSet],
    ) -> Result<ATree, TreeError> {
        let n = weights.n();
        check_partition(LabelSet::full(n), blocks)?;
        check_block_weights(&weights, blocks)?;
        let v = VertexId(0);
        let mut tree = ATree {
            weights,
            boundary: BTreeMap::new(),
            involution: BTreeMap::new(),
            tail_labels: BTreeMap::new(),
            blocks: BTreeMap::from([(v, sorted(blocks))]),
        };
        for label in 1..=n {
            let f = FlagId(label as u32);
            tree.boundary.insert(f, v);
            tree.involution.insert(f, f);
            tree.tail_labels.insert(f, label);
        }
        Ok(tree)
    }

    /// Principal (all-singleton) one-vertex tree.
    pub fn principal(weights: &WeightDatum) -> ATree {
        let singletons: Vec<LabelSet> =
            (1..=weights.n()).map(LabelSet::singleton).collect();
        ATree::one_vertex(weights, &singletons).expect("singleton blocks are always legal")
    }

    /// Tree determined by a set of pairwise compatible splits (each given as
    /// the side not containing label 1), with all-singleton blocks.
    /// Fails with `UnstableVertex` when some vertex misses the stability bound.
    pub fn from_splits(weights: &WeightDatum, splits: &[LabelSet]) -> Result<ATree, TreeError> {
        Self::from_splits_arc(Arc::new(weights.clone()), splits)
    }

    pub(crate) fn from_splits_arc(
        weights: Arc<WeightDatum>,
        splits: &[LabelSet],
    ) -> Result<ATree, TreeError> {
        let n = weights.n();
        let full = LabelSet::full(n);
        for (i, s) in splits.iter().enumerate() {
            assert!(!s.contains(1) && s.len() >= 2 && s.len() <= n - 2);
            for t in &splits[i + 1..] {
                assert!(
                    s.is_disjoint(*t) || s.is_subset(*t) || t.is_subset(*s),
                    "splits must be pairwise compatible"
                );
            }
        }
        // vertex 0 is the root (side of label 1); vertex i+1 sits on the side
        // of splits[i]. parent(S) = smallest split strictly containing S.
        let parent_of = |i: usize| -> Option<usize> {
            let s = splits[i];
            splits
                .iter()
                .enumerate()
                .filter(|(j, t)| *j != i && s.is_subset(**t))
                .min_by_key(|(_, t)| t.len())
                .map(|(j, _)| j)
        };
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut top_level: Vec<usize> = Vec::new();
        for i in 0..splits.len() {
            match parent_of(i) {
                Some(p) => children.entry(p).or_default().push(i),
                None => top_level.push(i),
            }
        }
        let mut tree = ATree {
            weights,
            boundary: BTreeMap::new(),
            involution: BTreeMap::new(),
            tail_labels: BTreeMap::new(),
            blocks: BTreeMap::new(),
        };
        let mut next_flag = (n + 1) as u32;
        // tails: labels 1..=n get flag ids 1..=n
        let vertex_of_split = |i: Option<usize>| match i {
            None => VertexId(0),
            Some(i) => VertexId((i + 1) as u32),
        };
        let mut tails_at: BTreeMap<VertexId, LabelSet> = BTreeMap::new();
        tails_at.insert(VertexId(0), full);
        for (i, s) in splits.iter().enumerate() {
            tails_at.insert(vertex_of_split(Some(i)), *s);
        }
        // subtract descendants: tails live at the tightest containing split
        for (i, s) in splits.iter().enumerate() {
            let holder = vertex_of_split(parent_of(i));
            let held = tails_at.get_mut(&holder).unwrap();
            *held = held.difference(*s);
        }
        for (v, tails) in &tails_at {
            tree.blocks
                .insert(*v, tails.labels().map(LabelSet::singleton).collect());
            for label in tails.labels() {
                let f = FlagId(label as u32);
                tree.boundary.insert(f, *v);
                tree.involution.insert(f, f);
                tree.tail_labels.insert(f, label);
            }
        }
        // edges: one per split, joining its vertex to its parent's vertex
        for i in 0..splits.len() {
            let child = vertex_of_split(Some(i));
            let parent = vertex_of_split(parent_of(i));
            let f1 = FlagId(next_flag);
            let f2 = FlagId(next_flag + 1);
            next_flag += 2;
            tree.boundary.insert(f1, parent);
            tree.boundary.insert(f2, child);
            tree.involution.insert(f1, f2);
            tree.involution.insert(f2, f1);
        }
        tree.check_stability()?;
        Ok(tree)
    }

    /// Same skeleton with a different r-structure; `assignment` maps every
    /// vertex to a partition of its tails.
    pub(crate) fn with_blocks(
        &self,
        assignment: &BTreeMap<VertexId, Vec<LabelSet>>,
    ) -> Result<ATree, TreeError> {
        let mut tree = self.clone();
        for (v, blocks) in assignment {
            check_partition(self.tails_at(*v), blocks)?;
            check_block_weights(&self.weights, blocks)?;
            tree.blocks.insert(*v, sorted(blocks));
        }
        Ok(tree)
    }

    pub fn weights(&self) -> &WeightDatum {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn vertex_ids(&self) -> Vec<VertexId> {
        let mut ids: Vec<VertexId> = self.blocks.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn vertex_count(&self) -> usize {
        self.blocks.len()
    }

    /// Edges as flag pairs `(f, j(f))` with `f < j(f)`, sorted.
    pub fn edges(&self) -> Vec<(FlagId, FlagId)> {
        self.involution
            .iter()
            .filter(|(f, p)| f < p)
            .map(|(f, p)| (*f, *p))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn flags_at(&self, v: VertexId) -> Vec<FlagId> {
        self.boundary
            .iter()
            .filter(|(_, w)| **w == v)
            .map(|(f, _)| *f)
            .collect()
    }

    pub fn tails_at(&self, v: VertexId) -> LabelSet {
        self.flags_at(v)
            .iter()
            .filter_map(|f| self.tail_labels.get(f))
            .copied()
            .collect()
    }

    pub fn edge_flags_at(&self, v: VertexId) -> Vec<FlagId> {
        self.flags_at(v)
            .into_iter()
            .filter(|f| self.involution[f] != *f)
            .collect()
    }

    pub fn blocks_at(&self, v: VertexId) -> &[LabelSet] {
        &self.blocks[&v]
    }

    pub fn flag_of_label(&self, label: usize) -> Option<FlagId> {
        self.tail_labels
            .iter()
            .find(|(_, l)| **l == label)
            .map(|(f, _)| *f)
    }

    /// Weight of a flag: the tail's weight, or 1 for part of an edge.
    pub fn flag_weight(&self, f: FlagId) -> Rational {
        match self.tail_labels.get(&f) {
            Some(label) => self.weights.weight(*label).clone(),
            None => Rational::one(),
        }
    }

    pub fn vertex_flag_sum(&self, v: VertexId) -> Rational {
        self.flags_at(v).iter().map(|f| self.flag_weight(*f)).sum()
    }

    /// Blocks plus edge flags at `v`, sorted by their label footprints.
    pub fn marks_at(&self, v: VertexId) -> Vec<Mark> {
        let mut marks: Vec<Mark> = self.blocks_at(v).iter().map(|b| Mark::TailBlock(*b)).collect();
        marks.extend(self.edge_flags_at(v).into_iter().map(Mark::EdgeFlag));
        marks.sort_by_key(|m| self.mark_footprint(*m));
        marks
    }

    pub fn mark_count_at(&self, v: VertexId) -> usize {
        self.blocks_at(v).len() + self.edge_flags_at(v).len()
    }

    pub fn mark_weight(&self, m: Mark) -> Rational {
        match m {
            Mark::EdgeFlag(_) => Rational::one(),
            Mark::TailBlock(b) => self.weights.subset_sum(b),
        }
    }

    /// Label footprint of a mark: the block itself, or the tails beyond the
    /// edge flag. Footprints of the marks at one vertex are pairwise disjoint
    /// and nonempty, so they give a relabeling-invariant total order.
    pub fn mark_footprint(&self, m: Mark) -> LabelSet {
        match m {
            Mark::EdgeFlag(f) => self.labels_behind(f),
            Mark::TailBlock(b) => b,
        }
    }

    /// Tail labels in the component on the far side of edge flag `f`
    /// (the side of `j(f)`'s vertex when the edge is removed).
    pub fn labels_behind(&self, f: FlagId) -> LabelSet {
        let partner = self.involution[&f];
        assert_ne!(partner, f, "labels_behind needs an edge flag");
        let mut seen = BTreeSet::from([self.boundary[&partner]]);
        let mut queue = VecDeque::from([self.boundary[&partner]]);
        let mut labels = LabelSet::empty();
        while let Some(v) = queue.pop_front() {
            for g in self.flags_at(v) {
                if g == partner {
                    continue;
                }
                match self.tail_labels.get(&g) {
                    Some(l) => labels.insert(*l),
                    None => {
                        let w = self.boundary[&self.involution[&g]];
                        if seen.insert(w) {
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        labels
    }

    /// Codimension of the stratum: `|E| + (n - sum_v |blocks(v)|)`.
    pub fn codimension(&self) -> usize {
        let block_total: usize = self.blocks.values().map(|b| b.len()).sum();
        self.edge_count() + self.n() - block_total
    }

    pub fn dimension(&self) -> usize {
        self.n() - 3 - self.codimension()
    }

    pub fn canonical_key(&self) -> CanonicalKey {
        let mut splits: Vec<LabelSet> = self
            .edges()
            .iter()
            .map(|(f, p)| {
                let side = self.labels_behind(*f);
                if side.contains(1) {
                    self.labels_behind(*p)
                } else {
                    side
                }
            })
            .collect();
        splits.sort_unstable();
        let mut vertices: Vec<VertexKey> = self
            .vertex_ids()
            .into_iter()
            .map(|v| self.vertex_key(v))
            .collect();
        vertices.sort();
        CanonicalKey { splits, vertices }
    }

    pub(crate) fn vertex_key(&self, v: VertexId) -> VertexKey {
        let mut fingerprint: Vec<LabelSet> = self
            .flags_at(v)
            .into_iter()
            .map(|f| match self.tail_labels.get(&f) {
                Some(l) => LabelSet::singleton(*l),
                None => self.labels_behind(f),
            })
            .collect();
        fingerprint.sort_unstable();
        let mut blocks = self.blocks_at(v).to_vec();
        blocks.sort_unstable();
        VertexKey { fingerprint, blocks }
    }

    /// Find the vertex with the given fingerprint.
    pub fn vertex_by_fingerprint(&self, fingerprint: &[LabelSet]) -> Option<VertexId> {
        self.vertex_ids()
            .into_iter()
            .find(|v| self.vertex_key(*v).fingerprint == fingerprint)
    }

    /// Full structural validation of every invariant.
    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.n();
        // involution and boundary are total and consistent
        assert_eq!(self.boundary.len(), self.involution.len());
        for (f, p) in &self.involution {
            assert_eq!(self.involution[p], *f, "involution must square to identity");
            let is_tail = self.tail_labels.contains_key(f);
            assert_eq!(is_tail, f == p, "tails are exactly the fixed flags");
            if f != p {
                assert_ne!(self.boundary[f], self.boundary[p], "no self-loops");
            }
        }
        // labels are a bijection onto 1..=n
        let labels: BTreeSet<usize> = self.tail_labels.values().copied().collect();
        assert_eq!(labels.len(), self.tail_labels.len());
        assert_eq!(labels, (1..=n).collect());
        // connected with |E| = |V| - 1
        let vertices: BTreeSet<VertexId> = self.boundary.values().copied().collect();
        assert_eq!(vertices.len(), self.blocks.len());
        assert_eq!(self.edge_count() + 1, vertices.len(), "not a tree");
        let start = *vertices.iter().next().unwrap();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for f in self.edge_flags_at(v) {
                let w = self.boundary[&self.involution[&f]];
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        assert_eq!(seen, vertices, "tree must be connected");
        // r-structure partitions tails, blocks light enough, vertices stable
        for v in self.vertex_ids() {
            check_partition(self.tails_at(v), self.blocks_at(v))?;
            check_block_weights(&self.weights, self.blocks_at(v))?;
        }
        self.check_stability()
    }

    fn check_stability(&self) -> Result<(), TreeError> {
        let two = rat(2, 1);
        for v in self.vertex_ids() {
            let total = self.vertex_flag_sum(v);
            if total <= two {
                return Err(TreeError::UnstableVertex {
                    tails: self.tails_at(v),
                    edges: self.edge_flags_at(v).len(),
                    total: format_rational(&total),
                });
            }
        }
        Ok(())
    }

    /// Contract an edge (given by either of its flags): the endpoints merge,
    /// the two edge flags disappear, the r-structure is carried over.
    /// Codimension drops by exactly 1.
    pub fn contract_edge(&self, f: FlagId) -> Result<ATree, TreeError> {
        let p = *self.involution.get(&f).ok_or(TreeError::NotAnEdge)?;
        if p == f {
            return Err(TreeError::NotAnEdge);
        }
        let keep = self.boundary[&f];
        let gone = self.boundary[&p];
        let mut tree = self.clone();
        tree.boundary.remove(&f);
        tree.boundary.remove(&p);
        tree.involution.remove(&f);
        tree.involution.remove(&p);
        for w in tree.boundary.values_mut() {
            if *w == gone {
                *w = keep;
            }
        }
        let moved = tree.blocks.remove(&gone).unwrap();
        let merged = tree.blocks.get_mut(&keep).unwrap();
        merged.extend(moved);
        merged.sort_unstable();
        debug_assert_eq!(tree.codimension() + 1, self.codimension());
        Ok(tree)
    }

    /// Merge two or more r-structure blocks at a vertex into one.
    /// Codimension grows by (number of chosen blocks - 1).
    pub fn identify_tail_blocks(
        &self,
        v: VertexId,
        chosen: &[LabelSet],
    ) -> Result<ATree, TreeError> {
        if chosen.len() < 2 {
            return Err(TreeError::TooFewBlocks);
        }
        let at_v = self.blocks.get(&v).ok_or(TreeError::NoSuchVertex)?;
        let mut union = LabelSet::empty();
        for b in chosen {
            if !at_v.contains(b) {
                return Err(TreeError::NotAtVertex);
            }
            if !b.is_disjoint(union) {
                return Err(TreeError::NotAtVertex);
            }
            union = union.union(*b);
        }
        let total = self.weights.subset_sum(union);
        if total > Rational::one() {
            return Err(TreeError::BlockTooHeavy {
                block: union,
                total: format_rational(&total),
            });
        }
        let mut tree = self.clone();
        let list = tree.blocks.get_mut(&v).unwrap();
        list.retain(|b| !chosen.contains(b));
        list.push(union);
        list.sort_unstable();
        debug_assert_eq!(tree.codimension(), self.codimension() + chosen.len() - 1);
        Ok(tree)
    }

    /// Split vertex `v` into two adjacent vertices, distributing its marks.
    /// The caller has already checked stability of both sides.
    pub(crate) fn split_vertex(&self, v: VertexId, side1: &[Mark], side2: &[Mark]) -> ATree {
        let mut tree = self.clone();
        let new_v = VertexId(self.vertex_ids().last().unwrap().0 + 1);
        let max_flag = self.boundary.keys().last().unwrap().0;
        let (fe, fe2) = (FlagId(max_flag + 1), FlagId(max_flag + 2));
        // move side2 to the new vertex
        let mut new_blocks = Vec::new();
        for m in side2 {
            match m {
                Mark::EdgeFlag(f) => {
                    tree.boundary.insert(*f, new_v);
                }
                Mark::TailBlock(b) => {
                    for label in b.labels() {
                        let f = self.flag_of_label(label).unwrap();
                        tree.boundary.insert(f, new_v);
                    }
                    new_blocks.push(*b);
                }
            }
        }
        new_blocks.sort_unstable();
        let old_blocks: Vec<LabelSet> = side1
            .iter()
            .filter_map(|m| match m {
                Mark::TailBlock(b) => Some(*b),
                Mark::EdgeFlag(_) => None,
            })
            .collect();
        tree.blocks.insert(v, sorted(&old_blocks));
        tree.blocks.insert(new_v, new_blocks);
        tree.boundary.insert(fe, v);
        tree.boundary.insert(fe2, new_v);
        tree.involution.insert(fe, fe2);
        tree.involution.insert(fe2, fe);
        debug_assert_eq!(tree.codimension(), self.codimension() + 1);
        tree
    }

    /// All trees one elementary move below `self`: stable single-edge
    /// insertions and merges of two blocks. These are exactly the covering
    /// relations of the degeneration order.
    pub fn covers(&self) -> Vec<ATree> {
        let mut out = Vec::new();
        let two = rat(2, 1);
        let one = Rational::one();
        for v in self.vertex_ids() {
            let blocks = self.blocks_at(v).to_vec();
            for i in 0..blocks.len() {
                for j in i + 1..blocks.len() {
                    if self.weights.subset_sum(blocks[i].union(blocks[j])) <= one {
                        out.push(
                            self.identify_tail_blocks(v, &[blocks[i], blocks[j]])
                                .expect("merge checked"),
                        );
                    }
                }
            }
            let marks = self.marks_at(v);
            let k = marks.len();
            if k < 4 {
                continue;
            }
            // bipartitions with marks[0] pinned to side 1
            for bits in 0u32..(1 << (k - 1)) {
                let mut side1 = vec![marks[0]];
                let mut side2 = Vec::new();
                for (idx, m) in marks.iter().enumerate().skip(1) {
                    if bits & (1 << (idx - 1)) != 0 {
                        side1.push(*m);
                    } else {
                        side2.push(*m);
                    }
                }
                if side1.len() < 2 || side2.len() < 2 {
                    continue;
                }
                let w1: Rational = side1.iter().map(|m| self.mark_weight(*m)).sum();
                let w2: Rational = side2.iter().map(|m| self.mark_weight(*m)).sum();
                if w1 + &one > two && w2 + &one > two {
                    out.push(self.split_vertex(v, &side1, &side2));
                }
            }
        }
        out
    }

    /// True iff `self <= other` in the reflexive-transitive closure of the
    /// degeneration moves (edge contraction upward, tail identification
    /// downward).
    pub fn degenerates_to(&self, other: &ATree) -> bool {
        if self.weights != other.weights {
            return false;
        }
        let target = self.canonical_key();
        let target_dim = self.dimension();
        if target == other.canonical_key() {
            return true;
        }
        let mut seen = BTreeSet::from([other.canonical_key()]);
        let mut queue = VecDeque::from([other.clone()]);
        while let Some(t) = queue.pop_front() {
            if t.dimension() <= target_dim {
                continue;
            }
            for child in t.covers() {
                let key = child.canonical_key();
                if key == target {
                    return true;
                }
                if seen.insert(key) {
                    queue.push_back(child);
                }
            }
        }
        false
    }

    /// Remove the tail with `label`, then stabilize: a vertex whose flag sum
    /// drops to <= 2 either hangs on a single edge (its tails move to the
    /// neighbor as one merged block) or is a bare two-edge vertex (the two
    /// edges fuse into one). Labels above `label` shift down by one.
    pub fn forget_tail(&self, label: usize) -> Result<ATree, TreeError> {
        Ok(self.forget_tail_impl(label)?.0)
    }

    fn forget_tail_impl(&self, label: usize) -> Result<(ATree, Vec<VertexId>), TreeError> {
        let residual = self
            .weights
            .without_label(label)
            .map_err(|_| TreeError::InvalidResidualDatum)?;
        let mut tree = self.clone();
        let mut collapsed = Vec::new();
        let f = tree.flag_of_label(label).expect("label exists");
        let vs = tree.boundary[&f];
        tree.boundary.remove(&f);
        tree.involution.remove(&f);
        tree.tail_labels.remove(&f);
        let list = tree.blocks.get_mut(&vs).unwrap();
        for b in list.iter_mut() {
            b.remove(label);
        }
        list.retain(|b| !b.is_empty());

        // weight of a remaining tail is unchanged by dropping one entry, so
        // stability can be tested against the original datum throughout.
        let two = rat(2, 1);
        loop {
            let unstable = tree
                .vertex_ids()
                .into_iter()
                .find(|v| tree.vertex_flag_sum(*v) <= two);
            let Some(v) = unstable else { break };
            let edges = tree.edge_flags_at(v);
            match edges.len() {
                1 => {
                    let e = edges[0];
                    let p = tree.involution[&e];
                    let neighbor = tree.boundary[&p];
                    let tails = tree.tails_at(v);
                    assert!(
                        tails.is_empty() || tree.weights.subset_sum(tails) <= Rational::one(),
                        "instability bounds the collapsed tails by 1"
                    );
                    for t in tails.labels() {
                        let tf = tree.flag_of_label(t).unwrap();
                        tree.boundary.insert(tf, neighbor);
                    }
                    tree.boundary.remove(&e);
                    tree.boundary.remove(&p);
                    tree.involution.remove(&e);
                    tree.involution.remove(&p);
                    tree.blocks.remove(&v);
                    if !tails.is_empty() {
                        let list = tree.blocks.get_mut(&neighbor).unwrap();
                        list.push(tails);
                        list.sort_unstable();
                    }
                    collapsed.push(v);
                }
                2 => {
                    // a bare vertex between two edges: fuse them
                    assert!(
                        tree.tails_at(v).is_empty(),
                        "a two-edge vertex with a tail is stable"
                    );
                    let (e1, e2) = (edges[0], edges[1]);
                    let (p1, p2) = (tree.involution[&e1], tree.involution[&e2]);
                    tree.involution.insert(p1, p2);
                    tree.involution.insert(p2, p1);
                    tree.boundary.remove(&e1);
                    tree.boundary.remove(&e2);
                    tree.involution.remove(&e1);
                    tree.involution.remove(&e2);
                    tree.blocks.remove(&v);
                    collapsed.push(v);
                }
                k => unreachable!("unstable vertex with {k} edges cannot arise"),
            }
        }

        // shift labels above the forgotten one
        let relabel = |l: usize| if l > label { l - 1 } else { l };
        tree.tail_labels = tree
            .tail_labels
            .iter()
            .map(|(f, l)| (*f, relabel(*l)))
            .collect();
        tree.blocks = tree
            .blocks
            .iter()
            .map(|(v, bs)| {
                (
                    *v,
                    sorted(
                        &bs.iter()
                            .map(|b| b.labels().map(relabel).collect::<LabelSet>())
                            .collect::<Vec<_>>(),
                    ),
                )
            })
            .collect();
        tree.weights = Arc::new(residual);
        debug_assert!(tree.validate().is_ok());
        Ok((tree, collapsed))
    }

    /// Classify the fiber of the forgetful map dropping `label`, which must
    /// lie in a singleton block: a punctured line when the supporting vertex
    /// stays stable without it, otherwise the product of the open moduli of
    /// the collapsed vertices (weight structures taken in `self`).
    pub fn classify_fiber(&self, label: usize) -> Result<FiberKind, TreeError> {
        let f = self.flag_of_label(label).expect("label exists");
        let vs = self.boundary[&f];
        if !self.blocks_at(vs).contains(&LabelSet::singleton(label)) {
            return Err(TreeError::NotSingleton { label });
        }
        let rest = self.vertex_flag_sum(vs) - self.weights.weight(label);
        if rest > rat(2, 1) {
            Ok(FiberKind::PuncturedLine {
                punctures: self.mark_count_at(vs) - 1,
            })
        } else {
            let (_, collapsed) = self.forget_tail_impl(label)?;
            let factors = collapsed
                .iter()
                .map(|v| {
                    vertex_weight_structure(
                        &self.weights,
                        self.blocks_at(*v),
                        self.edge_flags_at(*v).len(),
                    )
                    .expect("vertex weight structures of a valid tree are valid data")
                })
                .collect();
            Ok(FiberKind::ProductOfModuli { factors })
        }
    }

    /// The same tree with freshly shuffled internal flag and vertex ids.
    /// Canonical keys must be insensitive to this.
    pub fn with_shuffled_ids(&self, seed: u64) -> ATree {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let flags: Vec<FlagId> = self.boundary.keys().copied().collect();
        let verts: Vec<VertexId> = self.vertex_ids();
        let mut new_flags: Vec<u32> = (0..flags.len() as u32).map(|i| 100 + 3 * i).collect();
        let mut new_verts: Vec<u32> = (0..verts.len() as u32).map(|i| 50 + 7 * i).collect();
        new_flags.shuffle(&mut rng);
        new_verts.shuffle(&mut rng);
        let fmap: BTreeMap<FlagId, FlagId> = flags
            .iter()
            .zip(&new_flags)
            .map(|(f, n)| (*f, FlagId(*n)))
            .collect();
        let vmap: BTreeMap<VertexId, VertexId> = verts
            .iter()
            .zip(&new_verts)
            .map(|(v, n)| (*v, VertexId(*n)))
            .collect();
        ATree {
            weights: Arc::clone(&self.weights),
            boundary: self
                .boundary
                .iter()
                .map(|(f, v)| (fmap[f], vmap[v]))
                .collect(),
            involution: self
                .involution
                .iter()
                .map(|(f, p)| (fmap[f], fmap[p]))
                .collect(),
            tail_labels: self.tail_labels.iter().map(|(f, l)| (fmap[f], *l)).collect(),
            blocks: self.blocks.iter().map(|(v, b)| (vmap[v], b.clone())).collect(),
        }
    }
}

fn sorted(blocks: &[LabelSet]) -> Vec<LabelSet> {
    let mut out = blocks.to_vec();
    out.sort_unstable();
    out
}

fn check_partition(universe: LabelSet, blocks: &[LabelSet]) -> Result<(), TreeError> {
    let mut union = LabelSet::empty();
    for b in blocks {
        if b.is_empty() || !b.is_disjoint(union) {
            return Err(TreeError::InvalidBlocks);
        }
        union = union.union(*b);
    }
    if union != universe {
        return Err(TreeError::InvalidBlocks);
    }
    Ok(())
}

fn check_block_weights(weights: &WeightDatum, blocks: &[LabelSet]) -> Result<(), TreeError> {
    let one = Rational::one();
    for b in blocks {
        let total = weights.subset_sum(*b);
        if total > one {
            return Err(TreeError::BlockTooHeavy {
                block: *b,
                total: format_rational(&total),
            });
        }
    }
    Ok(())
}

impl std::fmt::Display for ATree {
    /// Compact human-readable form: splits, then nontrivial blocks.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let key = self.canonical_key();
        if key.splits.is_empty() {
            write!(f, "[no edges")?;
        } else {
            write!(f, "[splits")?;
            for s in &key.splits {
                write!(f, " {s}")?;
            }
        }
        let merged: Vec<String> = key
            .vertices
            .iter()
            .flat_map(|vk| vk.blocks.iter())
            .filter(|b| b.len() > 1)
            .map(|b| b.to_string())
            .collect();
        if !merged.is_empty() {
            write!(f, "; merged {}", merged.join(" "))?;
        }
        write!(f, "; dim {}]", self.dimension())
    }
}
