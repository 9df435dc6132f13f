//! Integer presentations of the Chow/homology groups.
//!
//! For each dimension d the strata of that dimension generate freely and the
//! principal relations targeting d cut the group down; the Smith normal form
//! of the relation matrix gives the free rank and torsion exactly. All
//! entries are arbitrary-precision integers, so nothing overflows.

use std::collections::BTreeSet;

use num::{BigInt, One, Signed, Zero};
use rayon::prelude::*;

use crate::oracles;
use crate::relations::{all_relations_mutated, RelationMutation, RelationVector};
use crate::strata::{enumerate_strata, stratum_euler_characteristic, StrataTable};
use crate::weights::WeightDatum;

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Vec<BigInt>>,
}

impl IntegerMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntegerMatrix {
            rows,
            cols,
            data: vec![vec![BigInt::zero(); cols]; rows],
        }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c));
        IntegerMatrix {
            rows: r,
            cols: c,
            data: rows
                .into_iter()
                .map(|row| row.into_iter().map(BigInt::from).collect())
                .collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i][j] = value;
    }
}

/// Invariant factors `d_1 | d_2 | ... | d_r` of an integer matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    pub factors: Vec<BigInt>,
    pub rank: usize,
}

impl SmithForm {
    /// Invariant factors larger than 1: the torsion of the cokernel.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.factors
            .iter()
            .filter(|f| !f.is_one())
            .cloned()
            .collect()
    }
}

/// Smith normal form by exact elimination: repeatedly move a minimal-absolute
/// nonzero entry to the pivot, reduce its row and column by division with
/// remainder, and fold any entry the pivot misses back into the pivot row.
/// Each pass strictly shrinks the pivot, so the loop terminates with a pivot
/// dividing the whole remaining submatrix, which yields the divisibility
/// chain directly.
pub fn smith_normal_form(m: &IntegerMatrix) -> SmithForm {
    let mut a = m.data.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut factors = Vec::new();
    let mut k = 0;
    while k < rows.min(cols) {
        let Some((pi, pj)) = min_abs_entry(&a, k, rows, cols) else {
            break;
        };
        a.swap(k, pi);
        swap_cols(&mut a, k, pj);
        'reduce: loop {
            // clear column k below the pivot
            for i in k + 1..rows {
                if a[i][k].is_zero() {
                    continue;
                }
                let q = &a[i][k] / &a[k][k];
                if !q.is_zero() {
                    for j in k..cols {
                        let delta = &q * &a[k][j];
                        a[i][j] -= delta;
                    }
                }
                if !a[i][k].is_zero() {
                    a.swap(i, k); // remainder is strictly smaller; retry
                    continue 'reduce;
                }
            }
            // clear row k right of the pivot
            for j in k + 1..cols {
                if a[k][j].is_zero() {
                    continue;
                }
                let q = &a[k][j] / &a[k][k];
                if !q.is_zero() {
                    for row in a.iter_mut().skip(k) {
                        let delta = &q * &row[k];
                        row[j] -= delta;
                    }
                }
                if !a[k][j].is_zero() {
                    swap_cols(&mut a, j, k);
                    continue 'reduce;
                }
            }
            // the pivot must divide the remaining submatrix
            let offender = (k + 1..rows)
                .flat_map(|i| (k + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(&a[i][j] % &a[k][k]).is_zero());
            match offender {
                Some((i, _)) => {
                    let (head, tail) = a.split_at_mut(i);
                    let row_i = &tail[0];
                    for j in k..cols {
                        let v = row_i[j].clone();
                        head[k][j] += v;
                    }
                }
                None => break,
            }
        }
        if a[k][k].is_negative() {
            a[k][k] = -a[k][k].clone();
        }
        factors.push(a[k][k].clone());
        k += 1;
    }
    let rank = factors.len();
    debug_assert!(factors.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
    SmithForm { factors, rank }
}

fn min_abs_entry(
    a: &[Vec<BigInt>],
    k: usize,
    rows: usize,
    cols: usize,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in k..rows {
        for j in k..cols {
            if a[i][j].is_zero() {
                continue;
            }
            match best {
                Some((bi, bj)) if a[bi][bj].abs() <= a[i][j].abs() => {}
                _ => best = Some((i, j)),
            }
        }
    }
    best
}

fn swap_cols(a: &mut [Vec<BigInt>], j1: usize, j2: usize) {
    if j1 != j2 {
        for row in a.iter_mut() {
            row.swap(j1, j2);
        }
    }
}

/// Presentation of one Chow/homology group `A_d = Z^{g_d} / I_d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionGroup {
    pub dim: usize,
    pub generators: usize,
    /// Relations as generated (before deduplication).
    pub relation_count: usize,
    /// Distinct relation vectors fed to the Smith normal form.
    pub distinct_relations: usize,
    pub smith: SmithForm,
    pub betti: usize,
    pub torsion: Vec<BigInt>,
}

/// Per-dimension generators, ranks and torsion for a whole weight datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChowPresentation {
    pub dims: Vec<DimensionGroup>,
}

impl ChowPresentation {
    pub fn betti_vector(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.betti).collect()
    }

    pub fn generator_counts(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.generators).collect()
    }

    pub fn relation_counts(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.relation_count).collect()
    }

    pub fn torsion_free(&self) -> bool {
        self.dims.iter().all(|d| d.torsion.is_empty())
    }
}

/// Assemble the relation matrix for one dimension: rows are the distinct
/// relation vectors, columns the strata of dimension `d` in table order.
pub fn relation_matrix(
    table: &StrataTable,
    d: usize,
    relations: &[RelationVector],
) -> IntegerMatrix {
    let cols = table.strata(d).len();
    let distinct: BTreeSet<Vec<(usize, i64)>> = relations
        .iter()
        .map(|rel| {
            rel.terms
                .iter()
                .map(|(key, coeff)| {
                    let (dim, pos) = table.position(key).expect("class resolves in table");
                    assert_eq!(dim, d);
                    (pos, *coeff)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut m = IntegerMatrix::zero(distinct.len(), cols);
    for (i, row) in distinct.iter().enumerate() {
        for (pos, coeff) in row {
            m.set(i, *pos, BigInt::from(*coeff));
        }
    }
    m
}

/// Full pipeline for one weight datum.
pub fn chow_groups(weights: &WeightDatum) -> ChowPresentation {
    chow_groups_from_table(&enumerate_strata(weights))
}

pub fn chow_groups_from_table(table: &StrataTable) -> ChowPresentation {
    chow_groups_mutated(table, None)
}

/// Pipeline with an optional relation-family mutation (testing hook).
pub fn chow_groups_mutated(
    table: &StrataTable,
    mutation: Option<RelationMutation>,
) -> ChowPresentation {
    let dims: Vec<DimensionGroup> = (0..=table.max_dim())
        .into_par_iter()
        .map(|d| {
            let relations = all_relations_mutated(table, d, mutation);
            let matrix = relation_matrix(table, d, &relations);
            let smith = smith_normal_form(&matrix);
            let generators = table.strata(d).len();
            DimensionGroup {
                dim: d,
                generators,
                relation_count: relations.len(),
                distinct_relations: matrix.rows,
                betti: generators - smith.rank,
                torsion: smith.torsion(),
                smith,
            }
        })
        .collect();
    ChowPresentation { dims }
}

/// The Poincare polynomial `sum_d b_d t^{2d}` rendered like `1+5*t^2+t^4`.
pub fn poincare_polynomial(p: &ChowPresentation) -> String {
    let mut parts = Vec::new();
    for group in &p.dims {
        if group.betti == 0 {
            continue;
        }
        let power = 2 * group.dim;
        let part = match (group.betti, power) {
            (b, 0) => b.to_string(),
            (1, e) => format!("t^{e}"),
            (b, e) => format!("{b}*t^{e}"),
        };
        parts.push(part);
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join("+")
    }
}

/// Consistency checks tying the presentation to the independent oracles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresentationChecks {
    /// Poincare duality `b_d = b_{(n-3)-d}`.
    pub duality: bool,
    /// `sum b_d` equals the point count at q = 1 equals the total stratum
    /// Euler characteristic.
    pub euler: bool,
    /// No torsion in any dimension.
    pub torsion_free: bool,
    /// `b_d` equals the coefficient of `q^d` in the point-count polynomial.
    pub point_count: bool,
}

impl PresentationChecks {
    pub fn all_pass(&self) -> bool {
        self.duality && self.euler && self.torsion_free && self.point_count
    }
}

pub fn verify_presentation(p: &ChowPresentation, table: &StrataTable) -> PresentationChecks {
    let betti = p.betti_vector();
    let top = betti.len() - 1;
    let duality = (0..=top).all(|d| betti[d] == betti[top - d]);
    let poly = oracles::point_count_polynomial(table);
    let chi: BigInt = table
        .iter_all()
        .map(|g| BigInt::from(stratum_euler_characteristic(g)))
        .sum();
    let b_sum: BigInt = betti.iter().map(|b| BigInt::from(*b)).sum();
    let at_one = poly.evaluate(&BigInt::one());
    let euler = b_sum == at_one && at_one == chi;
    let torsion_free = p.torsion_free();
    let point_count = (0..=top).all(|d| poly.coefficient(d) == BigInt::from(betti[d]))
        && poly.degree() == top;
    PresentationChecks {
        duality,
        euler,
        torsion_free,
        point_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::all_relations;
    use crate::weights::rat;
    use num::{BigInt, Integer};
    use proptest::prelude::*;

    fn ones(n: usize) -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1); n]).unwrap()
    }

    fn snf_of(rows: Vec<Vec<i64>>) -> SmithForm {
        smith_normal_form(&IntegerMatrix::from_rows(rows))
    }

    #[test]
    fn snf_examples() {
        let s = snf_of(vec![vec![2, 0], vec![0, 3]]);
        assert_eq!(s.factors, vec![BigInt::from(1), BigInt::from(6)]);
        assert_eq!(s.rank, 2);

        let s = snf_of(vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(s.rank, 0);
        assert!(s.factors.is_empty());

        let s = snf_of(vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(s.rank, 3);
        assert!(s.factors.iter().all(|f| f.is_one()));
    }

    #[test]
    fn snf_known_nontrivial() {
        let s = snf_of(vec![
            vec![-6, 111, -36, 6],
            vec![5, -672, 210, 74],
            vec![0, -255, 81, 24],
            vec![-7, 255, -81, -10],
        ]);
        assert_eq!(
            s.factors,
            vec![BigInt::from(1), BigInt::from(3), BigInt::from(21)]
        );
        assert_eq!(s.rank, 3);
    }

    // independent oracle: the k-th determinantal divisor (gcd of all k x k
    // minors) equals d_1 * ... * d_k
    fn determinant(m: &[Vec<BigInt>]) -> BigInt {
        let n = m.len();
        if n == 0 {
            return BigInt::one();
        }
        if n == 1 {
            return m[0][0].clone();
        }
        let mut det = BigInt::zero();
        for (i, row) in m.iter().enumerate() {
            let minor: Vec<Vec<BigInt>> = m
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != i)
                .map(|(_, rr)| rr[1..].to_vec())
                .collect();
            let term = &row[0] * determinant(&minor);
            if i % 2 == 0 {
                det += term;
            } else {
                det -= term;
            }
        }
        det
    }

    fn determinantal_divisors(m: &IntegerMatrix) -> Vec<BigInt> {
        use itertools::Itertools;
        let mut out = Vec::new();
        for k in 1..=m.rows.min(m.cols) {
            let mut g = BigInt::zero();
            for rows in (0..m.rows).combinations(k) {
                for cols in (0..m.cols).combinations(k) {
                    let sub: Vec<Vec<BigInt>> = rows
                        .iter()
                        .map(|&i| cols.iter().map(|&j| m.get(i, j).clone()).collect())
                        .collect();
                    g = g.gcd(&determinant(&sub));
                }
            }
            if g.is_zero() {
                break;
            }
            out.push(g);
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn snf_matches_determinantal_divisors(
            rows in prop::collection::vec(prop::collection::vec(-9i64..=9, 4), 1..=4)
        ) {
            let m = IntegerMatrix::from_rows(rows);
            let smith = smith_normal_form(&m);
            let divisors = determinantal_divisors(&m);
            prop_assert_eq!(smith.rank, divisors.len());
            let mut product = BigInt::one();
            for (factor, divisor) in smith.factors.iter().zip(&divisors) {
                product *= factor;
                prop_assert_eq!(&product, divisor);
            }
        }
    }

    #[test]
    fn chow_groups_small_cases() {
        assert_eq!(chow_groups(&ones(4)).betti_vector(), vec![1, 1]);
        assert_eq!(chow_groups(&ones(5)).betti_vector(), vec![1, 5, 1]);
        let lm5 = WeightDatum::parse("1,1,1/4,1/4,1/4").unwrap();
        assert_eq!(chow_groups(&lm5).betti_vector(), vec![1, 4, 1]);
    }

    #[test]
    fn fig1_chambers_all_give_p1() {
        for weights in ["1,1,1,1", "1,1,1/4,1/4", "1,1/2,1/2,1/2"] {
            let p = chow_groups(&WeightDatum::parse(weights).unwrap());
            assert_eq!(p.betti_vector(), vec![1, 1], "{weights}");
            assert!(p.torsion_free());
        }
    }

    #[test]
    fn poincare_polynomial_examples() {
        assert_eq!(poincare_polynomial(&chow_groups(&ones(4))), "1+t^2");
        assert_eq!(poincare_polynomial(&chow_groups(&ones(5))), "1+5*t^2+t^4");
        let lm5 = WeightDatum::parse("1,1,1/4,1/4,1/4").unwrap();
        assert_eq!(poincare_polynomial(&chow_groups(&lm5)), "1+4*t^2+t^4");
    }

    #[test]
    fn verify_presentation_passes_small_cases() {
        for weights in ["1,1,1,1", "1,1/2,1/2,1/2", "1,1,1,1,1", "1,1,1/5,1/5,1/5"] {
            let a = WeightDatum::parse(weights).unwrap();
            let t = enumerate_strata(&a);
            let p = chow_groups_from_table(&t);
            let checks = verify_presentation(&p, &t);
            assert!(checks.all_pass(), "{weights}: {checks:?}");
        }
    }

    #[test]
    fn dropping_a_relation_breaks_the_point_count_check() {
        let a = ones(4);
        let t = enumerate_strata(&a);
        let p = chow_groups_mutated(&t, Some(RelationMutation::DropRelation(0)));
        assert_eq!(p.dims[0].betti, 2, "one relation leaves rank 1");
        let checks = verify_presentation(&p, &t);
        assert!(!checks.point_count);
        assert!(!checks.all_pass());
    }

    #[test]
    fn top_dimension_has_single_free_generator() {
        for weights in ["1,1,1,1", "1,1,1,1,1", "1,1,1/5,1/5,1/5"] {
            let a = WeightDatum::parse(weights).unwrap();
            let t = enumerate_strata(&a);
            let top = t.max_dim();
            assert_eq!(all_relations(&t, top).len(), 0);
            let p = chow_groups_from_table(&t);
            assert_eq!(p.dims[top].generators, 1);
            assert_eq!(p.dims[top].betti, 1);
        }
    }
}
