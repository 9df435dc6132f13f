//! Self-check harness: a fixed battery of known chambers plus randomly
//! sampled weight data, each run through every structural invariant the
//! pipeline is supposed to satisfy. The relation-mutation hook threads
//! through to the presentation so that fault-injection tests can confirm the
//! harness actually catches broken relation sets.

use num::{BigInt, One};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::export::{presentation_json_weightless, table_json_weightless};
use crate::oracles::{eulerian_numbers, point_count_polynomial};
use crate::presentation::{chow_groups_mutated, verify_presentation};
use crate::relations::RelationMutation;
use crate::strata::{enumerate_strata, StrataTable};
use crate::weights::{rat, Rational, WeightDatum};

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub max_n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mutation: Option<RelationMutation>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            max_n: 5,
            trials: 25,
            seed: 7,
            mutation: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub n: usize,
    pub weights: String,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<Failure>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Failures with the smallest (and cheapest to re-examine) first.
    pub fn minimized(&self) -> Option<&Failure> {
        self.failures.iter().min_by_key(|f| (f.n, f.weights.len()))
    }
}

/// Run the whole invariant suite.
pub fn run_verify(cfg: &VerifyConfig) -> VerifyOutcome {
    let mut cases: Vec<WeightDatum> = Vec::new();
    // fixed battery: the three n=4 chambers, then per n one classical and one
    // light-points chamber, which exercise both relation branches
    for parts in ["1,1,1,1", "1,1,1/4,1/4", "1,1/2,1/2,1/2"] {
        cases.push(WeightDatum::parse(parts).unwrap());
    }
    for n in 5..=cfg.max_n {
        cases.push(WeightDatum::new(vec![rat(1, 1); n]).unwrap());
        let mut lm = vec![rat(1, 1), rat(1, 1)];
        lm.extend(vec![rat(1, (n - 2) as i64); n - 2]);
        cases.push(WeightDatum::new(lm).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.trials {
        if let Some(datum) = sample_datum(&mut rng, cfg.max_n) {
            cases.push(datum);
        }
    }

    let mut failures = Vec::new();
    let total = cases.len();
    for (i, weights) in cases.iter().enumerate() {
        // the structural move checks are quadratic-ish in the table; keep
        // them for every case at n <= 5 and sample beyond that
        let thorough = weights.n() <= 5 || i % 3 == 0;
        check_chamber(weights, cfg, thorough, &mut failures, &mut rng);
    }
    VerifyOutcome {
        seed: cfg.seed,
        cases: total,
        failures,
    }
}

/// Random datum with denominators up to 8; rejection-sampled for stability.
fn sample_datum(rng: &mut ChaCha8Rng, max_n: usize) -> Option<WeightDatum> {
    let n = rng.gen_range(4..=max_n.max(4));
    for _ in 0..200 {
        let weights: Vec<Rational> = (0..n)
            .map(|_| {
                let d = rng.gen_range(1..=8i64);
                let num = rng.gen_range(1..=d);
                rat(num, d)
            })
            .collect();
        if let Ok(datum) = WeightDatum::new(weights) {
            return Some(datum);
        }
    }
    None
}

fn check_chamber(
    weights: &WeightDatum,
    cfg: &VerifyConfig,
    thorough: bool,
    failures: &mut Vec<Failure>,
    rng: &mut ChaCha8Rng,
) {
    let n = weights.n();
    let fail = |failures: &mut Vec<Failure>, check, detail: String| {
        failures.push(Failure {
            n,
            weights: weights.to_string(),
            check,
            detail,
        });
    };

    let table = enumerate_strata(weights);
    let p = chow_groups_mutated(&table, cfg.mutation);
    let checks = verify_presentation(&p, &table);
    if !checks.duality {
        fail(failures, "duality", format!("betti {:?}", p.betti_vector()));
    }
    if !checks.euler {
        fail(
            failures,
            "euler",
            format!(
                "sum betti {:?} vs point count at 1",
                p.betti_vector().iter().sum::<usize>()
            ),
        );
    }
    if !checks.torsion_free {
        fail(failures, "torsion", format!("betti {:?}", p.betti_vector()));
    }
    if !checks.point_count {
        let poly = point_count_polynomial(&table);
        fail(
            failures,
            "point_count",
            format!("betti {:?} vs coefficients of {}", p.betti_vector(), poly),
        );
    }
    let betti = p.betti_vector();
    if betti.first() != Some(&1) || betti.last() != Some(&1) {
        fail(failures, "unit_ends", format!("betti {betti:?}"));
    }

    // light-points chambers must reproduce the Eulerian numbers
    if is_losev_manin(weights) {
        let expected = eulerian_numbers(n - 2);
        let got: Vec<BigInt> = betti.iter().map(|b| BigInt::from(*b)).collect();
        if got != expected {
            fail(
                failures,
                "eulerian",
                format!("betti {got:?} vs eulerian {expected:?}"),
            );
        }
    }

    if thorough {
        check_moves(&table, failures, rng, weights);
        check_invariance_twin(weights, &table, &p, failures, rng);
    }
}

fn check_moves(
    table: &StrataTable,
    failures: &mut Vec<Failure>,
    rng: &mut ChaCha8Rng,
    weights: &WeightDatum,
) {
    let n = weights.n();
    let fail = |failures: &mut Vec<Failure>, check, detail: String| {
        failures.push(Failure {
            n,
            weights: weights.to_string(),
            check,
            detail,
        });
    };
    for g in table.iter_all() {
        for child in g.covers() {
            if child.dimension() + 1 != g.dimension() {
                fail(
                    failures,
                    "move_dimension",
                    format!("{g} -> {child}"),
                );
            }
            if !table.contains(&child) {
                fail(failures, "move_closure", format!("{g} -> {child}"));
            }
            // antisymmetry of the order: comparable distinct strata have
            // strictly different dimensions, so one direction must fail
            if child.degenerates_to(g) && g.degenerates_to(&child) {
                fail(failures, "partial_order", format!("{g} <-> {child}"));
            }
        }
        for (f, _) in g.edges() {
            let up = g.contract_edge(f).expect("edge exists");
            if up.codimension() + 1 != g.codimension() || !table.contains(&up) {
                fail(failures, "contract_closure", format!("{g} -> {up}"));
            }
        }
        let seed = rng.gen::<u64>();
        for s in 0..3u64 {
            let relabeled = g.with_shuffled_ids(seed.wrapping_add(s));
            if relabeled.canonical_key() != g.canonical_key() {
                fail(failures, "key_relabeling", format!("{g} seed {seed}"));
            }
        }
    }
}

/// Build a signature-equal twin by nudging every weight that is not pinned by
/// an exact subset-sum equality, then demand byte-identical outputs.
fn check_invariance_twin(
    weights: &WeightDatum,
    table: &StrataTable,
    p: &crate::presentation::ChowPresentation,
    failures: &mut Vec<Failure>,
    rng: &mut ChaCha8Rng,
) {
    let Some(twin) = perturbed_twin(weights, rng) else {
        return;
    };
    let n = weights.n();
    if !weights.same_chamber(&twin) {
        failures.push(Failure {
            n,
            weights: weights.to_string(),
            check: "twin_construction",
            detail: format!("twin {twin} landed in a different chamber"),
        });
        return;
    }
    let twin_table = enumerate_strata(&twin);
    let twin_p = chow_groups_mutated(&twin_table, None);
    let same_tables = table_json_weightless(table) == table_json_weightless(&twin_table);
    let same_presentations =
        presentation_json_weightless(p) == presentation_json_weightless(&twin_p);
    if !(same_tables && same_presentations) {
        failures.push(Failure {
            n,
            weights: weights.to_string(),
            check: "chamber_invariance",
            detail: format!("twin {twin} gave different output"),
        });
    }
}

/// A different weight datum in the same fine chamber, when one exists: move
/// each free weight by less than the smallest gap to any wall. Weights lying
/// on an exact subset-sum wall (or equal to 1) are left untouched where
/// required.
pub fn perturbed_twin(weights: &WeightDatum, rng: &mut ChaCha8Rng) -> Option<WeightDatum> {
    use crate::labels::LabelSet;
    let n = weights.n();
    let one = Rational::one();
    // indices pinned by a subset summing to exactly 1
    let mut frozen = vec![false; n];
    let mut min_gap: Option<Rational> = None;
    for set in LabelSet::full(n).subsets(2) {
        let gap = weights.subset_sum(set) - &one;
        if gap == Rational::from(BigInt::from(0)) {
            for l in set.labels() {
                frozen[l - 1] = true;
            }
        } else {
            let abs = if gap < Rational::from(BigInt::from(0)) {
                -gap
            } else {
                gap
            };
            min_gap = Some(match min_gap {
                Some(g) if g < abs => g,
                _ => abs,
            });
        }
    }
    let total_gap = weights.total() - rat(2, 1);
    let gap = match min_gap {
        Some(g) if g < total_gap => g,
        _ => total_gap,
    };
    let step = gap / rat(4 * n as i64, 1);
    let mut out = Vec::with_capacity(n);
    let mut changed = false;
    for (i, m) in weights.weights().iter().enumerate() {
        if frozen[i] || step >= *m {
            out.push(m.clone());
            continue;
        }
        // only nudge downward when sitting at the top of the range
        let down = m == &one || rng.gen_bool(0.5);
        let nudged = if down { m - &step } else { m + &step };
        if nudged > one {
            out.push(m.clone());
            continue;
        }
        changed = true;
        out.push(nudged);
    }
    if !changed {
        return None;
    }
    WeightDatum::new(out).ok().filter(|t| t != weights)
}

/// Matches the light-points chamber `(1, 1, eps, ..., eps)` with
/// `(n-2) eps <= 1`: two labels that can merge with nothing and all the
/// others jointly mergeable.
pub fn is_losev_manin(weights: &WeightDatum) -> bool {
    use crate::labels::LabelSet;
    let n = weights.n();
    let sig = weights.chamber_signature();
    let mut heavy = Vec::new();
    let mut light = LabelSet::empty();
    for l in 1..=n {
        let alone = (1..=n)
            .filter(|m| *m != l)
            .all(|m| !sig.is_mergeable(LabelSet::from_labels([l, m])));
        if alone {
            heavy.push(l);
        } else {
            light.insert(l);
        }
    }
    heavy.len() == 2 && light.len() == n - 2 && sig.is_mergeable(light)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let outcome = run_verify(&VerifyConfig::default());
        assert!(outcome.passed(), "failures: {:?}", outcome.failures);
        assert!(outcome.cases >= 25);
    }

    #[test]
    fn losev_manin_detection() {
        assert!(is_losev_manin(&WeightDatum::parse("1,1,1/4,1/4,1/4").unwrap()));
        assert!(is_losev_manin(&WeightDatum::parse("1,1,1/3,1/3,1/3").unwrap()));
        assert!(!is_losev_manin(&WeightDatum::parse("1,1,1,1").unwrap()));
        assert!(!is_losev_manin(&WeightDatum::parse("1,1,1/2,1/2,1/2").unwrap()));
    }

    #[test]
    fn perturbed_twin_stays_in_chamber() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for parts in ["1,1,1/4,1/4", "1,1/2,1/2,1/2", "1,2/3,2/3,1/3,1/3"] {
            let a = WeightDatum::parse(parts).unwrap();
            for _ in 0..5 {
                if let Some(twin) = perturbed_twin(&a, &mut rng) {
                    assert!(a.same_chamber(&twin), "{parts} vs {twin}");
                    assert_ne!(&a, &twin);
                }
            }
        }
    }

    #[test]
    fn mutations_are_caught() {
        for mutation in [
            RelationMutation::DropFirstPairing,
            RelationMutation::DropSecondPairing,
            RelationMutation::DropStableTerms,
            RelationMutation::DropUnstableTerms,
        ] {
            let cfg = VerifyConfig {
                max_n: 5,
                trials: 0,
                seed: 1,
                mutation: Some(mutation),
            };
            let outcome = run_verify(&cfg);
            assert!(!outcome.passed(), "{mutation:?} was not caught");
            let min = outcome.minimized().unwrap();
            assert!(min.n <= 5, "counterexample should be minimized: {min:?}");
        }
    }
}
