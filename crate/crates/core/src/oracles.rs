//! Independent cross-validation of the computed groups.
//!
//! Each stratum is a product of configuration spaces of k distinct points on
//! a line modulo automorphisms, whose count over a field with q elements is
//! `(q-2)(q-3)...(q-2-(k-4))`. Summing over the strata table gives a
//! polynomial whose coefficients must match the Betti numbers (all homology
//! sits in even degree with free strata-generated classes). The oracle
//! shares only the strata table with the main pipeline, none of the
//! relation or Smith-form code.

use std::fmt;

use num::{BigInt, One, Signed, Zero};
use thiserror::Error;

use crate::strata::StrataTable;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("coefficient of q^{power} is negative: the table is inconsistent")]
    NegativeCoefficient { power: usize },
}

/// Integer polynomial in q, coefficients indexed by power.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountPolynomial {
    coeffs: Vec<BigInt>,
}

impl CountPolynomial {
    fn normalized(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(BigInt::zero());
        }
        CountPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        CountPolynomial {
            coeffs: vec![BigInt::zero()],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficient(&self, power: usize) -> BigInt {
        self.coeffs.get(power).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn evaluate(&self, q: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * q + c;
        }
        acc
    }

    fn add_assign(&mut self, other: &CountPolynomial) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), BigInt::zero());
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            self.coeffs[i] += c;
        }
    }

    fn mul(&self, other: &CountPolynomial) -> CountPolynomial {
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CountPolynomial::normalized(out)
    }
}

impl fmt::Display for CountPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (power, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let part = match power {
                0 => c.to_string(),
                1 if c.is_one() => "q".to_string(),
                1 => format!("{c}*q"),
                e if c.is_one() => format!("q^{e}"),
                e => format!("{c}*q^{e}"),
            };
            parts.push(part);
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

/// Count of configurations of `k` distinct points on a line modulo
/// automorphisms: fix three of them, the rest avoid `2, 3, ...` points.
/// `P(q, 3) = 1`, `P(q, k) = (q-2)(q-3)...(q-(k-2))`.
pub fn vertex_count_polynomial(k: usize) -> CountPolynomial {
    assert!(k >= 3, "every vertex of a valid tree carries >= 3 marks");
    let mut poly = CountPolynomial {
        coeffs: vec![BigInt::one()],
    };
    for i in 0..k - 3 {
        let factor = CountPolynomial {
            coeffs: vec![BigInt::from(-2 - i as i64), BigInt::one()],
        };
        poly = poly.mul(&factor);
    }
    poly
}

/// Number of points of the whole space over a field with q elements:
/// the sum over strata of the product over vertices of the per-vertex count.
pub fn point_count_polynomial(table: &StrataTable) -> CountPolynomial {
    let mut total = CountPolynomial::zero();
    for tree in table.iter_all() {
        let mut term = CountPolynomial {
            coeffs: vec![BigInt::one()],
        };
        for v in tree.vertex_ids() {
            term = term.mul(&vertex_count_polynomial(tree.mark_count_at(v)));
        }
        total.add_assign(&term);
    }
    total
}

/// Eulerian numbers `A(m, k)` for `k = 0..m-1` via the standard recurrence
/// `A(m, k) = (k+1) A(m-1, k) + (m-k) A(m-1, k-1)`.
pub fn eulerian_numbers(m: usize) -> Vec<BigInt> {
    assert!(m >= 1);
    let mut row = vec![BigInt::one()];
    for size in 2..=m {
        let mut next = vec![BigInt::zero(); size];
        for (k, value) in next.iter_mut().enumerate() {
            let from_same = if k < row.len() {
                BigInt::from(k as u64 + 1) * &row[k]
            } else {
                BigInt::zero()
            };
            let from_prev = if k >= 1 && k - 1 < row.len() {
                BigInt::from((size - k) as u64) * &row[k - 1]
            } else {
                BigInt::zero()
            };
            *value = from_same + from_prev;
        }
        row = next;
    }
    row
}

/// Read the expected Betti numbers off the point-count polynomial.
pub fn betti_from_point_count(poly: &CountPolynomial) -> Result<Vec<BigInt>, OracleError> {
    let mut out = Vec::with_capacity(poly.degree() + 1);
    for power in 0..=poly.degree() {
        let c = poly.coefficient(power);
        if c.is_negative() {
            return Err(OracleError::NegativeCoefficient { power });
        }
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::{enumerate_strata, stratum_euler_characteristic};
    use crate::weights::{rat, WeightDatum};

    fn ones(n: usize) -> WeightDatum {
        WeightDatum::new(vec![rat(1, 1); n]).unwrap()
    }

    fn coeffs(values: &[i64]) -> Vec<BigInt> {
        values.iter().map(|&v| BigInt::from(v)).collect()
    }

    #[test]
    fn point_count_n4_any_chamber() {
        for weights in ["1,1,1,1", "1,1,1/4,1/4", "1,1/2,1/2,1/2"] {
            let t = enumerate_strata(&WeightDatum::parse(weights).unwrap());
            let p = point_count_polynomial(&t);
            assert_eq!(p.coefficients(), coeffs(&[1, 1]), "{weights}");
            assert_eq!(p.to_string(), "1+q");
        }
    }

    #[test]
    fn point_count_classical_n5_and_n6() {
        let p = point_count_polynomial(&enumerate_strata(&ones(5)));
        assert_eq!(p.coefficients(), coeffs(&[1, 5, 1]));
        let p = point_count_polynomial(&enumerate_strata(&ones(6)));
        assert_eq!(p.coefficients(), coeffs(&[1, 16, 16, 1]));
    }

    #[test]
    fn eulerian_rows() {
        assert_eq!(eulerian_numbers(1), coeffs(&[1]));
        assert_eq!(eulerian_numbers(2), coeffs(&[1, 1]));
        assert_eq!(eulerian_numbers(3), coeffs(&[1, 4, 1]));
        assert_eq!(eulerian_numbers(4), coeffs(&[1, 11, 11, 1]));
        assert_eq!(eulerian_numbers(5), coeffs(&[1, 26, 66, 26, 1]));
    }

    #[test]
    fn betti_readoff_examples() {
        let p = CountPolynomial::normalized(coeffs(&[1, 1]));
        assert_eq!(betti_from_point_count(&p).unwrap(), coeffs(&[1, 1]));
        let p = CountPolynomial::normalized(coeffs(&[1, 5, 1]));
        assert_eq!(betti_from_point_count(&p).unwrap(), coeffs(&[1, 5, 1]));
        let p = CountPolynomial::normalized(coeffs(&[1, 16, 16, 1]));
        assert_eq!(betti_from_point_count(&p).unwrap(), coeffs(&[1, 16, 16, 1]));
        let bad = CountPolynomial::normalized(coeffs(&[1, -2, 1]));
        assert!(matches!(
            betti_from_point_count(&bad),
            Err(OracleError::NegativeCoefficient { power: 1 })
        ));
    }

    #[test]
    fn losev_manin_betti_are_eulerian() {
        // (1, 1, eps, ..., eps) with (n-2) eps <= 1
        for n in 4..=6 {
            let mut weights = vec![rat(1, 1), rat(1, 1)];
            weights.extend(vec![rat(1, (n - 2) as i64); n - 2]);
            let t = enumerate_strata(&WeightDatum::new(weights).unwrap());
            let betti = betti_from_point_count(&point_count_polynomial(&t)).unwrap();
            assert_eq!(betti, eulerian_numbers(n - 2), "n = {n}");
        }
    }

    #[test]
    fn evaluation_at_one_is_total_euler_characteristic() {
        for weights in ["1,1,1,1,1", "1,1,1/4,1/4,1/4", "1,2/3,2/3,1/3,1/3"] {
            let t = enumerate_strata(&WeightDatum::parse(weights).unwrap());
            let chi: BigInt = t
                .iter_all()
                .map(|g| BigInt::from(stratum_euler_characteristic(g)))
                .sum();
            let poly = point_count_polynomial(&t);
            assert_eq!(poly.evaluate(&BigInt::one()), chi, "{weights}");
        }
    }

    #[test]
    fn count_polynomial_is_monic_with_positive_constant() {
        for weights in ["1,1,1,1,1", "1,1,1/4,1/4,1/4"] {
            let t = enumerate_strata(&WeightDatum::parse(weights).unwrap());
            let poly = point_count_polynomial(&t);
            assert_eq!(poly.degree(), t.max_dim());
            assert!(poly.coefficient(poly.degree()).is_one());
            assert!(poly.coefficient(0) >= BigInt::one());
        }
    }
}
