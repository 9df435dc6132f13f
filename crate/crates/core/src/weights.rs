//! Weight data, chamber signatures and one-parameter weight families.
//!
//! All arithmetic is exact rational. The stability inequalities compared
//! against 1 and 2 are equalities on chamber walls, so nothing in this module
//! (or anywhere else in the crate) ever rounds.
//!
//! Boundary semantics: a subset is mergeable when its weight sum is `<= 1`
//! (non-strict); a vertex is stable when its flag weights sum to `> 2`
//! (strict).

use std::collections::BTreeSet;
use std::fmt;

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, Zero};
use thiserror::Error;

use crate::labels::{LabelSet, MAX_LABELS};

/// Exact rational number: arbitrary-precision, lowest terms, positive denominator.
pub type Rational = BigRational;

/// Convenience constructor used pervasively in tests.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("weight m_{index} lies outside (0, 1]")]
    WeightOutOfRange { index: usize },
    #[error("total weight is {total}, must be strictly greater than 2")]
    TotalTooSmall { total: String },
    #[error("a weight datum needs at least 3 marked points, got {n}")]
    TooFewPoints { n: usize },
    #[error("at most {MAX_LABELS} marked points are supported, got {n}")]
    TooManyPoints { n: usize },
    #[error("block {block} has weight {total} > 1")]
    BlockTooHeavy { block: LabelSet, total: String },
    #[error("vertex weight structure totals {total}, must exceed 2")]
    UnstableVertex { total: String },
    #[error("cannot parse `{0}` as a rational weight")]
    Parse(String),
    #[error("cannot parse `{0}` as a family entry")]
    ParseFamily(String),
    #[error("family is not a valid weight datum at every interior point of its domain")]
    InvalidFamily,
    #[error("domain interval is empty")]
    EmptyDomain,
}

/// Parse a single rational token: `INT`, `INT/INT` or a decimal `INT.DIGITS`.
pub fn parse_rational(token: &str) -> Result<Rational, WeightError> {
    let t = token.trim();
    let err = || WeightError::Parse(token.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| err())?;
        let d: BigInt = den.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let int = if int.is_empty() { "0" } else { int };
        let (sign, int_abs) = match int.strip_prefix('-') {
            Some(rest) => (Sign::Minus, if rest.is_empty() { "0" } else { rest }),
            None => (Sign::Plus, int),
        };
        let whole: BigInt = int_abs.parse().map_err(|_| err())?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let digits: BigInt = frac.parse().map_err(|_| err())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mut value = Rational::from(whole) + Rational::new(digits, scale);
        if sign == Sign::Minus {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Rational::from(n))
}

/// Render a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A weight datum: rationals `m_1, ..., m_n` in `(0, 1]` with total `> 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightDatum {
    weights: Vec<Rational>,
}

impl WeightDatum {
    pub fn new(weights: Vec<Rational>) -> Result<Self, WeightError> {
        let n = weights.len();
        if n < 3 {
            return Err(WeightError::TooFewPoints { n });
        }
        if n > MAX_LABELS {
            return Err(WeightError::TooManyPoints { n });
        }
        let one = Rational::one();
        for (i, m) in weights.iter().enumerate() {
            if !m.is_positive() || m > &one {
                return Err(WeightError::WeightOutOfRange { index: i + 1 });
            }
        }
        let total: Rational = weights.iter().sum();
        if total <= rat(2, 1) {
            return Err(WeightError::TotalTooSmall {
                total: format_rational(&total),
            });
        }
        Ok(WeightDatum { weights })
    }

    /// Parse the comma-separated weight grammar, e.g. `1,1,1/3,0.25`.
    pub fn parse(input: &str) -> Result<Self, WeightError> {
        let weights = input
            .split(',')
            .map(parse_rational)
            .collect::<Result<Vec<_>, _>>()?;
        WeightDatum::new(weights)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Weight of the tail with 1-based `label`.
    pub fn weight(&self, label: usize) -> &Rational {
        &self.weights[label - 1]
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn total(&self) -> Rational {
        self.weights.iter().sum()
    }

    pub fn subset_sum(&self, set: LabelSet) -> Rational {
        set.labels().map(|l| self.weight(l).clone()).sum()
    }

    /// Is it legal for the tails in `set` to collide (weight sum `<= 1`)?
    /// Singletons and the empty set are always mergeable.
    pub fn is_mergeable(&self, set: LabelSet) -> bool {
        set.len() <= 1 || self.subset_sum(set) <= Rational::one()
    }

    pub fn chamber_signature(&self) -> ChamberSignature {
        chamber_signature_of(&self.weights)
    }

    /// True iff both data have the same `n` and identical chamber signatures.
    pub fn same_chamber(&self, other: &WeightDatum) -> bool {
        self.n() == other.n() && self.chamber_signature() == other.chamber_signature()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.weights.iter().map(format_rational).collect()
    }

    /// Datum with the weight of `label` removed and later labels shifted down.
    pub fn without_label(&self, label: usize) -> Result<WeightDatum, WeightError> {
        let mut weights = self.weights.clone();
        weights.remove(label - 1);
        WeightDatum::new(weights)
    }
}

impl fmt::Display for WeightDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(","))
    }
}

/// Signature of a raw weight vector. Defined for any list of positive
/// rationals, so it also applies to family samples that fail the total
/// stability bound.
pub fn chamber_signature_of(values: &[Rational]) -> ChamberSignature {
    let n = values.len();
    let one = Rational::one();
    let mut mergeable = BTreeSet::new();
    for set in LabelSet::full(n).subsets(2) {
        let sum: Rational = set.labels().map(|l| values[l - 1].clone()).sum();
        if sum <= one {
            mergeable.insert(set);
        }
    }
    ChamberSignature { n, mergeable }
}

/// The fine chamber signature: every subset of size >= 2 whose weights sum to <= 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChamberSignature {
    n: usize,
    mergeable: BTreeSet<LabelSet>,
}

impl ChamberSignature {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mergeable_sets(&self) -> impl Iterator<Item = LabelSet> + '_ {
        self.mergeable.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.mergeable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mergeable.is_empty()
    }

    /// Membership test; sets of size <= 1 are vacuously mergeable.
    pub fn is_mergeable(&self, set: LabelSet) -> bool {
        set.len() <= 1 || self.mergeable.contains(&set)
    }
}

/// The weight structure of a vertex: one entry per tail block plus a 1 per edge.
///
/// `tail_blocks` partitions some subset of the tails of `a`; the result lists
/// each block's weight sum followed by `edge_count` ones.
pub fn vertex_weight_structure(
    a: &WeightDatum,
    tail_blocks: &[LabelSet],
    edge_count: usize,
) -> Result<WeightDatum, WeightError> {
    let mut entries = Vec::with_capacity(tail_blocks.len() + edge_count);
    let one = Rational::one();
    for block in tail_blocks {
        debug_assert!(!block.is_empty());
        let sum = a.subset_sum(*block);
        if sum > one {
            return Err(WeightError::BlockTooHeavy {
                block: *block,
                total: format_rational(&sum),
            });
        }
        entries.push(sum);
    }
    entries.extend(std::iter::repeat(one.clone()).take(edge_count));
    let total: Rational = entries.iter().sum();
    if total <= rat(2, 1) {
        return Err(WeightError::UnstableVertex {
            total: format_rational(&total),
        });
    }
    WeightDatum::new(entries)
}

/// A one-parameter affine family of weight data `m_i(eps) = a_i + b_i * eps`
/// over an open interval of the parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightFamily {
    coeffs: Vec<(Rational, Rational)>,
    lo: Rational,
    hi: Rational,
}

impl WeightFamily {
    /// Validates that every entry stays inside `(0, 1]` strictly inside
    /// `(lo, hi)` and that the family is a stable weight datum somewhere in
    /// the domain. Each constraint is affine in eps, so endpoint checks
    /// suffice. Chambers of the domain where the total drops to `<= 2`
    /// carry no moduli space; `evaluate` reports them as errors.
    pub fn new(
        coeffs: Vec<(Rational, Rational)>,
        lo: Rational,
        hi: Rational,
    ) -> Result<Self, WeightError> {
        let n = coeffs.len();
        if n < 3 {
            return Err(WeightError::TooFewPoints { n });
        }
        if n > MAX_LABELS {
            return Err(WeightError::TooManyPoints { n });
        }
        if lo >= hi {
            return Err(WeightError::EmptyDomain);
        }
        let at = |a: &Rational, b: &Rational, e: &Rational| a + b * e;
        let zero = Rational::zero();
        let one = Rational::one();
        for (a, b) in &coeffs {
            let v_lo = at(a, b, &lo);
            let v_hi = at(a, b, &hi);
            // m_i > 0 strictly on the interior
            if v_lo < zero || v_hi < zero || (v_lo.is_zero() && v_hi.is_zero()) {
                return Err(WeightError::InvalidFamily);
            }
            // m_i <= 1 on the interior
            if v_lo > one || v_hi > one {
                return Err(WeightError::InvalidFamily);
            }
        }
        let total = |e: &Rational| -> Rational { coeffs.iter().map(|(a, b)| at(a, b, e)).sum() };
        let two = rat(2, 1);
        if total(&lo) <= two && total(&hi) <= two {
            return Err(WeightError::InvalidFamily);
        }
        Ok(WeightFamily { coeffs, lo, hi })
    }

    /// Parse the family grammar: entries are rationals, `eps`, `b*eps` or
    /// `a+b*eps` (also `a-b*eps`), e.g. `1,1,eps,eps,eps`.
    pub fn parse(entries: &str, lo: Rational, hi: Rational) -> Result<Self, WeightError> {
        let coeffs = entries
            .split(',')
            .map(parse_family_entry)
            .collect::<Result<Vec<_>, _>>()?;
        WeightFamily::new(coeffs, lo, hi)
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn domain(&self) -> (&Rational, &Rational) {
        (&self.lo, &self.hi)
    }

    pub fn coefficients(&self) -> &[(Rational, Rational)] {
        &self.coeffs
    }

    /// The weight datum at a given interior parameter value; fails where the
    /// family is unstable (total weight `<= 2`).
    pub fn evaluate(&self, eps: &Rational) -> Result<WeightDatum, WeightError> {
        WeightDatum::new(self.evaluate_raw(eps))
    }

    /// Raw weight values at a parameter, without the stability validation.
    pub fn evaluate_raw(&self, eps: &Rational) -> Vec<Rational> {
        self.coeffs.iter().map(|(a, b)| a + b * eps).collect()
    }

    /// Sorted, deduplicated parameter values strictly inside the domain where
    /// the chamber signature changes: solutions of `sum_S (a_i + b_i eps) = 1`
    /// over subsets `S` with `|S| >= 2`.
    pub fn find_walls(&self) -> Vec<Rational> {
        let n = self.n();
        let one = Rational::one();
        let mut walls = BTreeSet::new();
        for set in LabelSet::full(n).subsets(2) {
            let mut a_sum = Rational::zero();
            let mut b_sum = Rational::zero();
            for l in set.labels() {
                let (a, b) = &self.coeffs[l - 1];
                a_sum += a;
                b_sum += b;
            }
            if b_sum.is_zero() {
                continue;
            }
            let eps = (&one - a_sum) / b_sum;
            if eps > self.lo && eps < self.hi {
                walls.insert(eps);
            }
        }
        walls.into_iter().collect()
    }

    /// Open intervals between consecutive walls, each with its midpoint sample.
    pub fn chambers(&self) -> Vec<((Rational, Rational), Rational)> {
        let walls = self.find_walls();
        let mut bounds = Vec::with_capacity(walls.len() + 2);
        bounds.push(self.lo.clone());
        bounds.extend(walls);
        bounds.push(self.hi.clone());
        bounds
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / rat(2, 1);
                ((w[0].clone(), w[1].clone()), mid)
            })
            .collect()
    }
}

fn parse_family_entry(token: &str) -> Result<(Rational, Rational), WeightError> {
    let t: String = token.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || WeightError::ParseFamily(token.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if t == "eps" {
        return Ok((Rational::zero(), Rational::one()));
    }
    // split at a '+' or '-' that is not a leading sign
    let split_at = t
        .char_indices()
        .skip(1)
        .find(|(_, c)| *c == '+' || *c == '-')
        .map(|(i, c)| (i, c));
    if let Some((i, sign)) = split_at {
        let a = parse_rational(&t[..i]).map_err(|_| err())?;
        let tail = &t[i + 1..];
        let b_abs = parse_eps_term(tail).ok_or_else(err)?;
        let b = if sign == '-' { -b_abs } else { b_abs };
        return Ok((a, b));
    }
    if let Some(b) = parse_eps_term(&t) {
        return Ok((Rational::zero(), b));
    }
    let a = parse_rational(&t).map_err(|_| err())?;
    Ok((a, Rational::zero()))
}

/// `eps` or `b*eps`, returning the coefficient.
fn parse_eps_term(t: &str) -> Option<Rational> {
    if t == "eps" {
        return Some(Rational::one());
    }
    let coeff = t.strip_suffix("*eps")?;
    parse_rational(coeff).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn datum(parts: &[(i64, i64)]) -> WeightDatum {
        WeightDatum::new(parts.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
    }

    #[test]
    fn new_weight_datum_classical() {
        let a = datum(&[(1, 1), (1, 1), (1, 1), (1, 1)]);
        assert_eq!(a.n(), 4);
    }

    #[test]
    fn new_weight_datum_rejects_sum_exactly_two() {
        let err = WeightDatum::new(vec![rat(1, 2); 4]).unwrap_err();
        assert!(matches!(err, WeightError::TotalTooSmall { .. }));
    }

    #[test]
    fn new_weight_datum_accepts_paper_example() {
        let a = datum(&[(1, 1), (1, 1), (1, 4), (1, 4)]);
        assert_eq!(a.total(), rat(5, 2));
    }

    #[test]
    fn new_weight_datum_rejects_bad_entries() {
        assert!(matches!(
            WeightDatum::new(vec![rat(1, 1), rat(1, 1), rat(3, 2)]),
            Err(WeightError::WeightOutOfRange { index: 3 })
        ));
        assert!(matches!(
            WeightDatum::new(vec![rat(1, 1), rat(1, 1), rat(0, 1)]),
            Err(WeightError::WeightOutOfRange { index: 3 })
        ));
        assert!(matches!(
            WeightDatum::new(vec![rat(1, 1), rat(1, 1)]),
            Err(WeightError::TooFewPoints { n: 2 })
        ));
    }

    #[test]
    fn parse_grammar() {
        let a = WeightDatum::parse("1,1,1/3,0.25").unwrap();
        assert_eq!(a.weight(3), &rat(1, 3));
        assert_eq!(a.weight(4), &rat(1, 4));
        assert!(WeightDatum::parse("1,1,abc").is_err());
    }

    #[test]
    fn chamber_signature_examples() {
        let sig = datum(&[(1, 1), (1, 1), (1, 1), (1, 1)]).chamber_signature();
        assert!(sig.is_empty());

        let sig = datum(&[(1, 1), (1, 1), (1, 4), (1, 4)]).chamber_signature();
        let expected: Vec<LabelSet> = vec![LabelSet::from_labels([3, 4])];
        assert_eq!(sig.mergeable_sets().collect::<Vec<_>>(), expected);

        let sig = datum(&[(1, 1), (1, 2), (1, 2), (1, 2)]).chamber_signature();
        let expected: BTreeSet<LabelSet> = [
            LabelSet::from_labels([2, 3]),
            LabelSet::from_labels([2, 4]),
            LabelSet::from_labels([3, 4]),
        ]
        .into_iter()
        .collect();
        assert_eq!(sig.mergeable_sets().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn same_chamber_examples() {
        let a = datum(&[(1, 1), (1, 1), (1, 4), (1, 4)]);
        assert!(a.same_chamber(&a));
        let b = datum(&[(1, 1), (1, 1), (1, 3), (1, 3)]);
        assert!(a.same_chamber(&b));
        let c = datum(&[(1, 1), (1, 1), (1, 2), (1, 2)]);
        let d = datum(&[(1, 1), (1, 1), (3, 5), (3, 5)]);
        assert!(!c.same_chamber(&d));
    }

    #[test]
    fn signature_downward_closure() {
        // exhaustive over the subsets of every generated signature
        for parts in [
            vec![(1, 1), (1, 1), (1, 4), (1, 4)],
            vec![(1, 1), (1, 2), (1, 2), (1, 2)],
            vec![(1, 1), (1, 1), (1, 5), (1, 5), (1, 5)],
            vec![(1, 1), (2, 3), (1, 3), (1, 6), (1, 6), (1, 2)],
        ] {
            let a = datum(&parts);
            let sig = a.chamber_signature();
            for s in sig.mergeable_sets() {
                for t in s.subsets(2) {
                    assert!(sig.is_mergeable(t), "downward closure fails: {t} in {s}");
                }
                // no unit weight shares a mergeable set
                for l in s.labels() {
                    assert!(a.weight(l) < &Rational::one() || s.len() == 1);
                }
            }
        }
    }

    #[test]
    fn vertex_weight_structure_examples() {
        let a = datum(&[(1, 1), (1, 1), (1, 4), (1, 4)]);
        let blocks = [
            LabelSet::singleton(1),
            LabelSet::singleton(2),
            LabelSet::from_labels([3, 4]),
        ];
        let v = vertex_weight_structure(&a, &blocks, 0).unwrap();
        assert_eq!(v.weights(), &[rat(1, 1), rat(1, 1), rat(1, 2)]);

        let ones = datum(&[(1, 1), (1, 1), (1, 1), (1, 1)]);
        let v = vertex_weight_structure(
            &ones,
            &[LabelSet::singleton(3), LabelSet::singleton(4)],
            1,
        )
        .unwrap();
        assert_eq!(v.weights(), &[rat(1, 1), rat(1, 1), rat(1, 1)]);

        let err = vertex_weight_structure(
            &a,
            &[LabelSet::singleton(3), LabelSet::singleton(4)],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, WeightError::UnstableVertex { .. }));

        let err = vertex_weight_structure(&ones, &[LabelSet::from_labels([1, 2])], 2).unwrap_err();
        assert!(matches!(err, WeightError::BlockTooHeavy { .. }));
    }

    #[test]
    fn vertex_weight_structure_total_identity() {
        let a = datum(&[(1, 1), (2, 3), (1, 3), (1, 6), (1, 6)]);
        let blocks = [LabelSet::singleton(1), LabelSet::from_labels([4, 5])];
        let v = vertex_weight_structure(&a, &blocks, 2).unwrap();
        let expected: Rational =
            blocks.iter().map(|b| a.subset_sum(*b)).sum::<Rational>() + rat(2, 1);
        assert_eq!(v.total(), expected);
    }

    #[test]
    fn family_walls_two_light_points() {
        let f = WeightFamily::parse("1,1,eps,eps", rat(0, 1), rat(1, 1)).unwrap();
        assert_eq!(f.find_walls(), vec![rat(1, 2)]);
    }

    #[test]
    fn family_walls_three_light_points() {
        let f = WeightFamily::parse("1,eps,eps,eps", rat(1, 3), rat(1, 1)).unwrap();
        assert_eq!(f.find_walls(), vec![rat(1, 2)]);
        let f = WeightFamily::parse("1,eps,eps,eps", rat(0, 1), rat(1, 1)).unwrap();
        assert_eq!(f.find_walls(), vec![rat(1, 3), rat(1, 2)]);
    }

    #[test]
    fn family_constant_has_no_walls() {
        let f = WeightFamily::parse("1,1,1,1", rat(0, 1), rat(1, 1)).unwrap();
        assert_eq!(f.find_walls(), Vec::<Rational>::new());
        assert_eq!(f.chambers().len(), 1);
    }

    #[test]
    fn family_entry_grammar() {
        assert_eq!(
            parse_family_entry("1/2+2*eps").unwrap(),
            (rat(1, 2), rat(2, 1))
        );
        assert_eq!(parse_family_entry("1-eps").unwrap(), (rat(1, 1), rat(-1, 1)));
        assert_eq!(parse_family_entry("3*eps").unwrap(), (rat(0, 1), rat(3, 1)));
        assert_eq!(parse_family_entry("eps").unwrap(), (rat(0, 1), rat(1, 1)));
        assert!(parse_family_entry("eps*2").is_err());
    }

    #[test]
    fn family_rejects_invalid_interior() {
        // at eps near 1, weight 3 exceeds 1
        assert!(WeightFamily::parse("1,1,2*eps", rat(0, 1), rat(1, 1)).is_err());
        // total is identically 2: stable nowhere
        assert!(WeightFamily::parse("1,1-eps,eps", rat(0, 1), rat(1, 1)).is_err());
        // empty domain
        assert!(WeightFamily::parse("1,1,eps", rat(1, 2), rat(1, 2)).is_err());
    }

    #[test]
    fn evaluate_reports_unstable_chambers() {
        let f = WeightFamily::parse("1,eps,eps,eps", rat(0, 1), rat(1, 1)).unwrap();
        assert!(matches!(
            f.evaluate(&rat(1, 6)),
            Err(WeightError::TotalTooSmall { .. })
        ));
        assert!(f.evaluate(&rat(2, 5)).is_ok());
    }

    #[test]
    fn walls_partition_domain_into_constant_chambers() {
        let f = WeightFamily::parse("1,eps,eps,eps", rat(0, 1), rat(1, 1)).unwrap();
        let walls = f.find_walls();
        let sig_at = |p: &Rational| chamber_signature_of(&f.evaluate_raw(p));
        for ((lo, hi), mid) in f.chambers() {
            // signature is constant on each open interval: compare the
            // midpoint with two more interior sample points
            let sig = sig_at(&mid);
            for frac in [rat(1, 4), rat(3, 4)] {
                let p = &lo + (&hi - &lo) * frac;
                assert_eq!(sig_at(&p), sig);
            }
        }
        // signature changes across every wall
        let chambers = f.chambers();
        for (i, _) in walls.iter().enumerate() {
            assert_ne!(sig_at(&chambers[i].1), sig_at(&chambers[i + 1].1));
        }
    }
}
