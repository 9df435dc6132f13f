//! Principal relations between the strata.
//!
//! Picking four pairwise-disjoint mark classes at a vertex of a stratum of
//! dimension d+1 and splitting them two ways yields a d-dimensional class
//! that is rationally equivalent to zero. Each term either inserts a new
//! edge (when both sides stay stable) or, when one side fails the stability
//! bound, merges the two selected blocks adjacent to the unstable side.
//! One relation vector sums these classes over all distributions of the
//! remaining marks, one coefficient per isomorphism class per side.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::labels::LabelSet;
use crate::strata::StrataTable;
use crate::trees::{ATree, CanonicalKey, Mark, VertexId};
use crate::weights::{rat, Rational};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("sides must partition the marks at the vertex, two or more marks each")]
    BadPartition,
    #[error("the vertex carries fewer than four marks")]
    TooFewMarks,
    #[error("the four selected marks must be pairwise distinct")]
    MarksNotDistinct,
    #[error("no such vertex")]
    NoSuchVertex,
}

/// Result of inserting an edge at a vertex along a bipartition of its marks.
#[derive(Clone, Debug)]
pub enum InsertOutcome {
    /// Both new vertices pass the stability bound.
    Stable(ATree),
    /// Exactly one side fails; both cannot, since the two sides' flag sums
    /// total more than 4.
    Unstable(UnstableSide),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnstableSide {
    First,
    Second,
}

/// Insert a new edge at `v`, sending `side1` marks to one endpoint and
/// `side2` to the other. Each side needs at least two marks (an inserted
/// vertex carries at least three flags).
pub fn insert_edge(
    g: &ATree,
    v: VertexId,
    side1: &[Mark],
    side2: &[Mark],
) -> Result<InsertOutcome, RelationError> {
    if !g.vertex_ids().contains(&v) {
        return Err(RelationError::NoSuchVertex);
    }
    if side1.len() < 2 || side2.len() < 2 {
        return Err(RelationError::BadPartition);
    }
    let all: BTreeSet<Mark> = g.marks_at(v).into_iter().collect();
    let union: BTreeSet<Mark> = side1.iter().chain(side2).copied().collect();
    if union.len() != side1.len() + side2.len() || union != all {
        return Err(RelationError::BadPartition);
    }
    let two = rat(2, 1);
    let one = Rational::one();
    let w1: Rational = side1.iter().map(|m| g.mark_weight(*m)).sum::<Rational>() + &one;
    let w2: Rational = side2.iter().map(|m| g.mark_weight(*m)).sum::<Rational>() + &one;
    let s1_unstable = w1 <= two;
    let s2_unstable = w2 <= two;
    assert!(
        !(s1_unstable && s2_unstable),
        "the sides' flag sums total more than 4, so at most one side fails"
    );
    if s1_unstable {
        return Ok(InsertOutcome::Unstable(UnstableSide::First));
    }
    if s2_unstable {
        return Ok(InsertOutcome::Unstable(UnstableSide::Second));
    }
    Ok(InsertOutcome::Stable(g.split_vertex(v, side1, side2)))
}

/// Which rearrangement of the four selected marks defines the negative side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pairing {
    /// `(12|34) - (13|24)`
    Cross13,
    /// `(12|34) - (14|23)`
    Cross14,
}

impl Pairing {
    pub fn as_str(self) -> &'static str {
        match self {
            Pairing::Cross13 => "13|24",
            Pairing::Cross14 => "14|23",
        }
    }
}

/// Provenance of one relation vector.
#[derive(Clone, Debug)]
pub struct RelationSource {
    /// Position of the source stratum in the table, when generated from one.
    pub stratum: Option<(usize, usize)>,
    /// Fingerprint of the vertex the marks were chosen at.
    pub vertex: Vec<LabelSet>,
    /// Label footprints of the four selected marks, in order.
    pub marks: [LabelSet; 4],
    pub pairing: Pairing,
}

/// An integer combination of stratum classes of one dimension that is
/// rationally equivalent to zero.
#[derive(Clone, Debug)]
pub struct RelationVector {
    pub dim: usize,
    pub terms: BTreeMap<CanonicalKey, i64>,
    pub source: RelationSource,
}

impl RelationVector {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Test hooks that delete one family of generated relations; the verify
/// harness must catch every one of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationMutation {
    /// Omit every `(12|34) - (13|24)` relation.
    DropFirstPairing,
    /// Omit every `(12|34) - (14|23)` relation.
    DropSecondPairing,
    /// Stable edge insertions contribute no class.
    DropStableTerms,
    /// Unstable block merges contribute no class.
    DropUnstableTerms,
    /// Omit the relation at one index of the generated list.
    DropRelation(usize),
}

/// The principal relation at `(g, v, marks, pairing)`.
pub fn principal_relation(
    g: &ATree,
    v: VertexId,
    marks: &[Mark; 4],
    pairing: Pairing,
) -> Result<RelationVector, RelationError> {
    principal_relation_inner(g, v, marks, pairing, None)
}

fn principal_relation_inner(
    g: &ATree,
    v: VertexId,
    marks: &[Mark; 4],
    pairing: Pairing,
    mutation: Option<RelationMutation>,
) -> Result<RelationVector, RelationError> {
    if !g.vertex_ids().contains(&v) {
        return Err(RelationError::NoSuchVertex);
    }
    let at_v = g.marks_at(v);
    if at_v.len() < 4 {
        return Err(RelationError::TooFewMarks);
    }
    let distinct: BTreeSet<Mark> = marks.iter().copied().collect();
    if distinct.len() != 4 || !marks.iter().all(|m| at_v.contains(m)) {
        return Err(RelationError::MarksNotDistinct);
    }
    let remaining: Vec<Mark> = at_v
        .iter()
        .filter(|m| !distinct.contains(m))
        .copied()
        .collect();

    let positive = ([marks[0], marks[1]], [marks[2], marks[3]]);
    let negative = match pairing {
        Pairing::Cross13 => ([marks[0], marks[2]], [marks[1], marks[3]]),
        Pairing::Cross14 => ([marks[0], marks[3]], [marks[1], marks[2]]),
    };

    // one class per isomorphism class per side, over all distributions of the
    // remaining marks onto the two ends
    let side_classes = |pair: ([Mark; 2], [Mark; 2])| -> BTreeSet<CanonicalKey> {
        let mut classes = BTreeSet::new();
        for bits in 0u32..(1 << remaining.len()) {
            let mut side1: Vec<Mark> = pair.0.to_vec();
            let mut side2: Vec<Mark> = pair.1.to_vec();
            for (i, m) in remaining.iter().enumerate() {
                if bits & (1 << i) != 0 {
                    side1.push(*m);
                } else {
                    side2.push(*m);
                }
            }
            let outcome = insert_edge(g, v, &side1, &side2).expect("partition is well formed");
            let class = match outcome {
                InsertOutcome::Stable(t) => {
                    if mutation == Some(RelationMutation::DropStableTerms) {
                        continue;
                    }
                    t
                }
                InsertOutcome::Unstable(side) => {
                    if mutation == Some(RelationMutation::DropUnstableTerms) {
                        continue;
                    }
                    let selected = match side {
                        UnstableSide::First => pair.0,
                        UnstableSide::Second => pair.1,
                    };
                    let blocks: Vec<LabelSet> = selected
                        .iter()
                        .map(|m| match m {
                            Mark::TailBlock(b) => *b,
                            Mark::EdgeFlag(_) => {
                                unreachable!("an unstable side cannot contain an edge flag")
                            }
                        })
                        .collect();
                    g.identify_tail_blocks(v, &blocks)
                        .expect("the unstable side's blocks sum to at most 1")
                }
            };
            debug_assert_eq!(class.dimension() + 1, g.dimension());
            classes.insert(class.canonical_key());
        }
        classes
    };

    let plus = side_classes(positive);
    let minus = side_classes(negative);
    let mut terms: BTreeMap<CanonicalKey, i64> = BTreeMap::new();
    for k in plus {
        *terms.entry(k).or_insert(0) += 1;
    }
    for k in minus {
        *terms.entry(k).or_insert(0) -= 1;
    }
    terms.retain(|_, c| *c != 0);
    Ok(RelationVector {
        dim: g.dimension() - 1,
        terms,
        source: RelationSource {
            stratum: None,
            vertex: g.vertex_key(v).fingerprint,
            marks: [
                g.mark_footprint(marks[0]),
                g.mark_footprint(marks[1]),
                g.mark_footprint(marks[2]),
                g.mark_footprint(marks[3]),
            ],
            pairing,
        },
    })
}

/// Every principal relation targeting dimension `d`: all strata of dimension
/// `d + 1`, every vertex with at least four marks, every 4-subset of its
/// marks, both pairings. Trivially-zero vectors are dropped. The list order
/// is deterministic (strata in table order, marks in footprint order).
pub fn all_relations(table: &StrataTable, d: usize) -> Vec<RelationVector> {
    all_relations_mutated(table, d, None)
}

pub fn all_relations_mutated(
    table: &StrataTable,
    d: usize,
    mutation: Option<RelationMutation>,
) -> Vec<RelationVector> {
    if d + 1 > table.max_dim() {
        return Vec::new();
    }
    let sources = table.strata(d + 1);
    let mut relations: Vec<RelationVector> = sources
        .par_iter()
        .enumerate()
        .map(|(pos, g)| {
            let mut out = Vec::new();
            let mut vertices = g.vertex_ids();
            vertices.sort_by_key(|v| g.vertex_key(*v).fingerprint);
            for v in vertices {
                let marks = g.marks_at(v);
                if marks.len() < 4 {
                    continue;
                }
                for combo in marks.iter().copied().combinations(4) {
                    let four: [Mark; 4] = [combo[0], combo[1], combo[2], combo[3]];
                    for pairing in [Pairing::Cross13, Pairing::Cross14] {
                        if mutation == Some(RelationMutation::DropFirstPairing)
                            && pairing == Pairing::Cross13
                        {
                            continue;
                        }
                        if mutation == Some(RelationMutation::DropSecondPairing)
                            && pairing == Pairing::Cross14
                        {
                            continue;
                        }
                        let mut rel = principal_relation_inner(g, v, &four, pairing, mutation)
                            .expect("marks are distinct and at the vertex");
                        if rel.is_zero() {
                            continue;
                        }
                        rel.source.stratum = Some((d + 1, pos));
                        debug_assert!(
                            rel.terms.keys().all(|k| table
                                .position(k)
                                .is_some_and(|(dim, _)| dim == d)),
                            "every class must resolve in the table at dimension d"
                        );
                        out.push(rel);
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if let Some(RelationMutation::DropRelation(idx)) = mutation {
        if idx < relations.len() {
            relations.remove(idx);
        }
    }
    relations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::enumerate_strata;
    use crate::weights::{rat, WeightDatum};

    fn ones(n: usize) -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1); n]).unwrap()
    }

    fn fig1b() -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1), rat(1, 1), rat(1, 4), rat(1, 4)]).unwrap()
    }

    fn ls(labels: &[usize]) -> LabelSet {
        LabelSet::from_labels(labels.iter().copied())
    }

    fn tail_marks(labels: &[usize]) -> [Mark; 4] {
        [
            Mark::TailBlock(LabelSet::singleton(labels[0])),
            Mark::TailBlock(LabelSet::singleton(labels[1])),
            Mark::TailBlock(LabelSet::singleton(labels[2])),
            Mark::TailBlock(LabelSet::singleton(labels[3])),
        ]
    }

    #[test]
    fn insert_edge_examples() {
        let p = ATree::principal(&ones(4));
        let v = p.vertex_ids()[0];
        let marks = p.marks_at(v);
        let outcome = insert_edge(&p, v, &marks[..2], &marks[2..]).unwrap();
        match outcome {
            InsertOutcome::Stable(t) => {
                let expected = ATree::from_splits(&ones(4), &[ls(&[3, 4])]).unwrap();
                assert_eq!(t.canonical_key(), expected.canonical_key());
            }
            other => panic!("expected stable, got {other:?}"),
        }

        let p = ATree::principal(&fig1b());
        let v = p.vertex_ids()[0];
        let m = p.marks_at(v); // footprint order: {1},{2},{3},{4}
        let side1 = [m[2], m[3]];
        let side2 = [m[0], m[1]];
        match insert_edge(&p, v, &side1, &side2).unwrap() {
            InsertOutcome::Unstable(UnstableSide::First) => {}
            other => panic!("expected unstable first side, got {other:?}"),
        }

        assert!(matches!(
            insert_edge(&p, v, &m[..1], &m[1..]),
            Err(RelationError::BadPartition)
        ));
    }

    #[test]
    fn classical_four_point_relation() {
        let a = ones(4);
        let p = ATree::principal(&a);
        let v = p.vertex_ids()[0];
        let rel = principal_relation(&p, v, &tail_marks(&[1, 2, 3, 4]), Pairing::Cross13).unwrap();
        let plus = ATree::from_splits(&a, &[ls(&[3, 4])]).unwrap().canonical_key();
        let minus = ATree::from_splits(&a, &[ls(&[2, 4])]).unwrap().canonical_key();
        assert_eq!(rel.terms.len(), 2);
        assert_eq!(rel.terms[&plus], 1);
        assert_eq!(rel.terms[&minus], -1);
    }

    #[test]
    fn unstable_case_merges_selected_blocks() {
        let a = fig1b();
        let p = ATree::principal(&a);
        let v = p.vertex_ids()[0];
        let rel = principal_relation(&p, v, &tail_marks(&[1, 2, 3, 4]), Pairing::Cross13).unwrap();
        let merged = p
            .identify_tail_blocks(v, &[ls(&[3]), ls(&[4])])
            .unwrap()
            .canonical_key();
        let minus = ATree::from_splits(&a, &[ls(&[2, 4])]).unwrap().canonical_key();
        assert_eq!(rel.terms.len(), 2);
        assert_eq!(rel.terms[&merged], 1);
        assert_eq!(rel.terms[&minus], -1);
    }

    #[test]
    fn dimension_zero_stratum_has_no_relations() {
        let a = ones(4);
        let t = enumerate_strata(&a);
        let point = &t.strata(0)[0];
        let v = point.vertex_ids()[0];
        assert!(matches!(
            principal_relation(point, v, &tail_marks(&[1, 2, 3, 4]), Pairing::Cross13),
            Err(RelationError::TooFewMarks)
        ));
    }

    #[test]
    fn relation_counts_small_cases() {
        let t4 = enumerate_strata(&ones(4));
        assert_eq!(all_relations(&t4, 0).len(), 2);

        let t5 = enumerate_strata(&ones(5));
        assert_eq!(all_relations(&t5, 1).len(), 10);
        assert_eq!(all_relations(&t5, 0).len(), 20);
    }

    #[test]
    fn classical_positive_support_is_separating_splits() {
        // at the top stratum of the all-ones chamber, the positive side of the
        // relation is exactly the one-edge trees separating {m1,m2} from {m3,m4}
        let a = ones(5);
        let p = ATree::principal(&a);
        let v = p.vertex_ids()[0];
        let rel = principal_relation(&p, v, &tail_marks(&[1, 2, 3, 4]), Pairing::Cross13).unwrap();
        let mut expected_plus = BTreeSet::new();
        let full = LabelSet::full(5);
        for side in full.subsets(2) {
            if side.len() > 3 || side.contains(1) {
                continue;
            }
            let separates = side.contains(3) && side.contains(4) && !side.contains(2);
            if separates {
                expected_plus.insert(
                    ATree::from_splits(&a, &[side]).unwrap().canonical_key(),
                );
            }
        }
        let plus: BTreeSet<CanonicalKey> = rel
            .terms
            .iter()
            .filter(|(_, c)| **c > 0)
            .map(|(k, _)| k.clone())
            .collect();
        assert_eq!(plus, expected_plus);
        assert_eq!(plus.len(), 2); // {3,4} and {3,4,5} splits
        assert!(rel.terms.values().all(|c| c.abs() == 1));
    }

    #[test]
    fn insert_then_contract_is_identity() {
        let a = ones(5);
        let p = ATree::principal(&a);
        let v = p.vertex_ids()[0];
        let marks = p.marks_at(v);
        if let InsertOutcome::Stable(t) = insert_edge(&p, v, &marks[..2], &marks[2..]).unwrap() {
            let (f, _) = t.edges()[0];
            assert_eq!(
                t.contract_edge(f).unwrap().canonical_key(),
                p.canonical_key()
            );
        } else {
            panic!("classical insertions are stable");
        }
    }

    #[test]
    fn every_relation_class_resolves_one_dimension_down() {
        for weights in [ones(5), WeightDatum::parse("1,1,1/5,1/5,1/5").unwrap()] {
            let t = enumerate_strata(&weights);
            for d in 0..t.max_dim() {
                for rel in all_relations(&t, d) {
                    assert!(!rel.is_zero());
                    for key in rel.terms.keys() {
                        let (dim, _) = t.position(key).expect("class resolves");
                        assert_eq!(dim, d);
                    }
                }
            }
        }
    }
}
