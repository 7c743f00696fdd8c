//! The generic private learner (exponential mechanism over a finite
//! hypothesis collection), an empirical differential-privacy tester, and the
//! harvesting procedure that turns a private learner into a probabilistic
//! representation.

use std::collections::BTreeMap;

use rand::distributions::{Distribution as _, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::concept::{cover_new, loss, Concept, Distribution, LabeledExample, TOL};
use crate::error::{Error, Result};
use crate::rng::{child_rng, child_seed, Rng};

/// Where a hypothesis collection came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Discretized,
    Harvested,
}

/// A nonempty list of hypotheses over a shared domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCollection {
    pub hypotheses: Vec<Concept>,
    pub provenance: Provenance,
}

impl HypothesisCollection {
    pub fn new(hypotheses: Vec<Concept>, provenance: Provenance) -> Result<Self> {
        let n = hypotheses.first().ok_or(Error::EmptyClass)?.domain_size();
        if let Some(h) = hypotheses.iter().find(|h| h.domain_size() != n) {
            return Err(Error::DomainMismatch {
                expected: n,
                actual: h.domain_size(),
            });
        }
        Ok(HypothesisCollection {
            hypotheses,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn domain_size(&self) -> usize {
        self.hypotheses[0].domain_size()
    }

    /// Whether some member has Loss_D(h, c, ζ) ≤ `alpha`.
    pub fn hits_good_set(
        &self,
        target: &Concept,
        dist: &Distribution,
        zeta: f64,
        alpha: f64,
    ) -> Result<bool> {
        for h in &self.hypotheses {
            if loss(h, target, zeta, dist)? <= alpha + TOL {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Largest collection [`discretize_hypotheses`] will enumerate.
pub const MAX_DISCRETIZED: f64 = 1e6;

/// Every function from the domain to the bin midpoints of the ζ-cover, in
/// lexicographic order (point 0 varies slowest).
pub fn discretize_hypotheses(domain_size: usize, zeta: f64) -> Result<HypothesisCollection> {
    let grid = cover_new(zeta)?.bin_midpoints;
    let count = (grid.len() as f64).powi(domain_size as i32);
    if count > MAX_DISCRETIZED {
        return Err(Error::TooLarge(format!(
            "{count} discretized hypotheses exceed the limit {MAX_DISCRETIZED}"
        )));
    }
    let count = count as usize;
    let hypotheses = (0..count)
        .map(|mut code| {
            let mut values = vec![0.0; domain_size];
            for slot in values.iter_mut().rev() {
                *slot = grid[code % grid.len()];
                code /= grid.len();
            }
            Concept {
                id: 0,
                values,
            }
        })
        .enumerate()
        .map(|(i, mut h)| {
            h.id = i as u64;
            h
        })
        .collect();
    HypothesisCollection::new(hypotheses, Provenance::Discretized)
}

/// Fraction of `sample` on which `h` misses the label by more than ζ.
pub fn empirical_loss(h: &Concept, sample: &[LabeledExample], zeta: f64) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let misses = sample
        .iter()
        .filter(|ex| (h.at(ex.x) - ex.y).abs() > zeta + TOL)
        .count();
    misses as f64 / sample.len() as f64
}

/// Output probabilities of the exponential mechanism: proportional to
/// exp(−ε·m·L̂(h)/2).
pub fn exponential_weights(
    collection: &HypothesisCollection,
    sample: &[LabeledExample],
    epsilon: f64,
    zeta: f64,
) -> Vec<f64> {
    let m = sample.len() as f64;
    let logits: Vec<f64> = collection
        .hypotheses
        .iter()
        .map(|h| -epsilon * m * empirical_loss(h, sample, zeta) / 2.0)
        .collect();
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Sample size 8·ln|H|/(αε) used with the generic private learner.
pub fn gl_sample_size(collection_size: usize, alpha: f64, epsilon: f64) -> usize {
    const C: f64 = 8.0;
    (C * (collection_size as f64).ln() / (alpha * epsilon)).ceil() as usize
}

/// A learner whose output may depend on internal randomness.
pub trait RandomizedLearner: Sync {
    fn learn(&self, sample: &[LabeledExample], rng: &mut Rng) -> Result<Concept>;
}

/// The ε-differentially private generic learner over a finite collection.
#[derive(Clone, Debug)]
pub struct GenericPrivateLearner {
    pub collection: HypothesisCollection,
    pub epsilon: f64,
    pub zeta: f64,
}

impl RandomizedLearner for GenericPrivateLearner {
    fn learn(&self, sample: &[LabeledExample], rng: &mut Rng) -> Result<Concept> {
        let p = exponential_weights(&self.collection, sample, self.epsilon, self.zeta);
        let idx = WeightedIndex::new(&p)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .sample(rng);
        Ok(self.collection.hypotheses[idx].clone())
    }
}

/// One draw of the generic private learner.
pub fn generic_private_learner(
    collection: &HypothesisCollection,
    sample: &[LabeledExample],
    epsilon: f64,
    zeta: f64,
    seed: u64,
) -> Result<Concept> {
    if sample.is_empty() {
        return Err(Error::OutOfRange {
            name: "sample",
            value: 0.0,
            reason: "sample must be nonempty",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            reason: "privacy parameter must be positive",
        });
    }
    GenericPrivateLearner {
        collection: collection.clone(),
        epsilon,
        zeta,
    }
    .learn(sample, &mut crate::rng::rng_from_seed(seed))
}

/// Checks that two samples have equal length and differ in exactly one
/// position.
pub fn check_neighbors(s: &[LabeledExample], t: &[LabeledExample]) -> Result<()> {
    if s.len() != t.len() {
        return Err(Error::NotNeighbors(format!(
            "lengths {} and {} differ",
            s.len(),
            t.len()
        )));
    }
    let diff = s.iter().zip(t).filter(|(a, b)| a != b).count();
    if diff != 1 {
        return Err(Error::NotNeighbors(format!("{diff} examples differ")));
    }
    Ok(())
}

/// Family-wise confidence of every [`dp_test`] verdict.
pub const DP_CONFIDENCE: f64 = 0.99;

/// Least number of trials [`dp_test`] accepts.
pub const MIN_DP_TRIALS: usize = 10_000;

/// Frequencies of one output under both inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub output: Vec<f64>,
    pub freq_s: f64,
    pub freq_neighbor: f64,
}

/// Result of an empirical (ε, δ)-indistinguishability test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpTestReport {
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub confidence: f64,
    pub events: Vec<EventRow>,
    /// Largest value of lower(p_A(E)) − e^ε·upper(p_B(E)) − δ over events
    /// and both directions, with Wilson bounds at the Bonferroni-corrected
    /// level. Positive means a certified violation.
    pub max_violation: f64,
    pub passed: bool,
}

fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn bonferroni_z(intervals: usize, confidence: f64) -> f64 {
    let tail = (1.0 - confidence) / (2.0 * intervals.max(1) as f64);
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - tail)
}

fn output_key(h: &Concept) -> Vec<u64> {
    h.values.iter().map(|v| v.to_bits()).collect()
}

fn output_counts<L: RandomizedLearner + ?Sized>(
    learner: &L,
    sample: &[LabeledExample],
    trials: usize,
    seed: u64,
) -> Result<BTreeMap<Vec<u64>, usize>> {
    let outputs = (0..trials)
        .into_par_iter()
        .map(|i| learner.learn(sample, &mut child_rng(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = BTreeMap::new();
    for h in &outputs {
        *counts.entry(output_key(h)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Runs `learner` `trials` times on each of the neighbouring samples and
/// tests both directions of p(E) ≤ e^ε·q(E) + δ for every observed output E.
pub fn dp_test<L: RandomizedLearner + ?Sized>(
    learner: &L,
    s: &[LabeledExample],
    neighbor: &[LabeledExample],
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<DpTestReport> {
    check_neighbors(s, neighbor)?;
    if trials < MIN_DP_TRIALS {
        return Err(Error::OutOfRange {
            name: "trials",
            value: trials as f64,
            reason: "frequency estimates need at least 10^4 trials",
        });
    }
    let a = output_counts(learner, s, trials, child_seed(seed, 0))?;
    let b = output_counts(learner, neighbor, trials, child_seed(seed, 1))?;
    let mut keys: Vec<&Vec<u64>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let z = bonferroni_z(2 * keys.len(), DP_CONFIDENCE);
    let scale = epsilon.exp();
    let mut max_violation = f64::NEG_INFINITY;
    let mut events = Vec::with_capacity(keys.len());
    for key in keys {
        let ca = a.get(key).copied().unwrap_or(0);
        let cb = b.get(key).copied().unwrap_or(0);
        let (lo_a, hi_a) = wilson(ca, trials, z);
        let (lo_b, hi_b) = wilson(cb, trials, z);
        max_violation = max_violation
            .max(lo_a - scale * hi_b - delta)
            .max(lo_b - scale * hi_a - delta);
        events.push(EventRow {
            output: key.iter().map(|&b| f64::from_bits(b)).collect(),
            freq_s: ca as f64 / trials as f64,
            freq_neighbor: cb as f64 / trials as f64,
        });
    }
    Ok(DpTestReport {
        trials,
        epsilon,
        delta,
        confidence: DP_CONFIDENCE,
        events,
        max_violation,
        passed: max_violation <= 0.0,
    })
}

/// Repetitions per grid label: ⌈4·ln 4·e^(8αεm)⌉.
pub fn harvest_repetitions(alpha: f64, epsilon: f64, m: usize) -> f64 {
    (4.0 * 4f64.ln() * (8.0 * alpha * epsilon * m as f64).exp()).ceil()
}

/// Largest harvested collection allowed.
pub const MAX_HARVEST: f64 = 1e6;

/// Harvests a hypothesis collection from a private learner: for each label z
/// on the ζ/5 grid, runs the learner on m copies of (first point, z) the
/// prescribed number of times and keeps every output.
pub fn build_probabilistic_representation<L: RandomizedLearner + ?Sized>(
    learner: &L,
    domain_size: usize,
    zeta: f64,
    alpha: f64,
    epsilon: f64,
    m: usize,
    seed: u64,
) -> Result<HypothesisCollection> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::OutOfRange {
            name: "zeta",
            value: zeta,
            reason: "must lie in (0, 1)",
        });
    }
    if m == 0 {
        return Err(Error::OutOfRange {
            name: "m",
            value: 0.0,
            reason: "sample size must be positive",
        });
    }
    if domain_size == 0 {
        return Err(Error::DomainMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let labels = cover_new(zeta / 5.0)?.bin_midpoints;
    let reps = harvest_repetitions(alpha, epsilon, m);
    let total = reps * labels.len() as f64;
    if !(total <= MAX_HARVEST) {
        return Err(Error::TooLarge(format!(
            "harvest would run the learner {total} times (limit {MAX_HARVEST})"
        )));
    }
    let reps = reps as usize;
    let mut hypotheses = Vec::with_capacity(total as usize);
    for (j, &z) in labels.iter().enumerate() {
        let sample = vec![LabeledExample { x: 0, y: z }; m];
        let stream = child_seed(seed, j as u64);
        for r in 0..reps {
            hypotheses.push(learner.learn(&sample, &mut child_rng(stream, r as u64))?);
        }
    }
    HypothesisCollection::new(hypotheses, Provenance::Harvested)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Ignore(Concept);

    impl RandomizedLearner for Ignore {
        fn learn(&self, _s: &[LabeledExample], _rng: &mut Rng) -> Result<Concept> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn discretize_examples() {
        let h = discretize_hypotheses(1, 0.5).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.hypotheses[0].values, vec![0.25]);
        assert_eq!(h.hypotheses[1].values, vec![0.75]);
        assert_eq!(discretize_hypotheses(2, 0.25).unwrap().len(), 16);
        assert!(matches!(discretize_hypotheses(7, 0.1), Err(Error::TooLarge(_))));
    }

    #[test]
    fn equal_losses_give_uniform_weights() {
        let h = discretize_hypotheses(1, 0.25).unwrap();
        let sample = [LabeledExample { x: 0, y: 0.5 }];
        // ζ = 1: nobody misses
        for p in exponential_weights(&h, &sample, 1.0, 1.0) {
            assert_abs_diff_eq!(p, 0.25);
        }
        for p in exponential_weights(&h, &sample, 1e-12, 0.01) {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn weights_closed_form() {
        let h = discretize_hypotheses(1, 0.5).unwrap();
        let sample = [LabeledExample { x: 0, y: 0.2 }, LabeledExample { x: 0, y: 0.3 }];
        // ≡0.25 fits both, ≡0.75 misses both: weights 1 and e^(−1)
        let p = exponential_weights(&h, &sample, 1.0, 0.1);
        assert_abs_diff_eq!(p[0], 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn neighbors() {
        let a = [LabeledExample { x: 0, y: 0.1 }, LabeledExample { x: 1, y: 0.1 }];
        let b = [LabeledExample { x: 0, y: 0.1 }, LabeledExample { x: 1, y: 0.9 }];
        assert!(check_neighbors(&a, &b).is_ok());
        assert!(check_neighbors(&b, &a).is_ok());
        assert!(check_neighbors(&a, &a).is_err());
        assert!(check_neighbors(&a, &b[..1]).is_err());
    }

    #[test]
    fn ignoring_learner_passes_at_zero() {
        let a = [LabeledExample { x: 0, y: 0.1 }];
        let b = [LabeledExample { x: 0, y: 0.9 }];
        let l = Ignore(Concept::constant(0, 0.5, 1).unwrap());
        let r = dp_test(&l, &a, &b, 0.0, 0.0, 10_000, 1).unwrap();
        assert!(r.passed);
        assert!(dp_test(&l, &a, &a, 0.0, 0.0, 10_000, 1).is_err());
    }

    #[test]
    fn harvest_size() {
        let l = Ignore(Concept::constant(0, 0.5, 2).unwrap());
        assert_eq!(harvest_repetitions(0.25, 1.0, 1), 41.0);
        let h = build_probabilistic_representation(&l, 2, 0.5, 0.25, 1.0, 1, 0).unwrap();
        assert_eq!(h.len(), 410);
        assert_eq!(h.provenance, Provenance::Harvested);
        assert!(build_probabilistic_representation(&l, 2, 1.0, 0.25, 1.0, 0, 0).is_err());
        assert!(matches!(
            build_probabilistic_representation(&l, 2, 0.5, 1.0, 1.0, 3, 0),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn gl_size() {
        assert_eq!(gl_sample_size(16, 0.25, 1.0), (8.0 * 16f64.ln() / 0.25).ceil() as usize);
    }

    #[test]
    fn mechanism_matches_closed_form() {
        let cases = [
            (discretize_hypotheses(1, 0.125).unwrap(), vec![LabeledExample { x: 0, y: 0.3 }; 3], 0.125),
            (
                discretize_hypotheses(3, 0.5).unwrap(),
                vec![
                    LabeledExample { x: 0, y: 0.1 },
                    LabeledExample { x: 1, y: 0.8 },
                    LabeledExample { x: 2, y: 0.4 },
                    LabeledExample { x: 2, y: 0.9 },
                ],
                0.3,
            ),
        ];
        for (k, (h, sample, zeta)) in cases.into_iter().enumerate() {
            assert!(h.len() <= 8);
            let l = GenericPrivateLearner { collection: h.clone(), epsilon: 1.0, zeta };
            let trials = 100_000;
            let counts = output_counts(&l, &sample, trials, k as u64).unwrap();
            let p = exponential_weights(&h, &sample, 1.0, zeta);
            let tv: f64 = h
                .hypotheses
                .iter()
                .zip(&p)
                .map(|(hyp, w)| {
                    let f = counts.get(&output_key(hyp)).copied().unwrap_or(0) as f64 / trials as f64;
                    (f - w).abs() / 2.0
                })
                .sum();
            assert!(tv <= 0.02, "case {k}: TV {tv}");
        }
    }

    #[test]
    fn good_hypothesis_amplifies_to_twice_alpha() {
        let zeta = 0.25;
        let alpha = 0.25;
        let h = discretize_hypotheses(2, zeta).unwrap();
        let target = Concept::new(0, vec![0.3, 0.7]).unwrap();
        let dist = Distribution::new(vec![0.7, 0.3]).unwrap();
        assert!(h.hits_good_set(&target, &dist, zeta, alpha).unwrap());
        let m = gl_sample_size(h.len(), alpha, 1.0);
        let l = GenericPrivateLearner { collection: h, epsilon: 1.0, zeta };
        let trials = 500;
        let good = (0..trials)
            .filter(|&t| {
                let mut rng = child_rng(77, t as u64);
                let sampler = dist.sampler();
                let sample: Vec<LabeledExample> = (0..m)
                    .map(|_| {
                        let x = sampler.sample(&mut rng);
                        LabeledExample { x, y: target.at(x) }
                    })
                    .collect();
                let out = l.learn(&sample, &mut rng).unwrap();
                loss(&out, &target, zeta, &dist).unwrap() <= 2.0 * alpha
            })
            .count();
        assert!(good as f64 / trials as f64 >= 2.0 / 3.0, "{good} of {trials}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn example(n: usize) -> impl Strategy<Value = LabeledExample> {
            (0..n, 0.0..=1.0f64).prop_map(|(x, y)| LabeledExample { x, y })
        }

        fn pair() -> impl Strategy<Value = (Vec<LabeledExample>, Vec<LabeledExample>)> {
            prop::collection::vec(example(2), 1..6).prop_flat_map(|s| {
                let len = s.len();
                (Just(s), 0..len, example(2)).prop_map(|(s, i, e)| {
                    let mut t = s.clone();
                    t[i] = e;
                    (s, t)
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn neighbor_relation_is_symmetric_and_irreflexive((s, t) in pair()) {
                prop_assert!(check_neighbors(&s, &s).is_err());
                prop_assert_eq!(check_neighbors(&s, &t).is_ok(), check_neighbors(&t, &s).is_ok());
                prop_assert_eq!(check_neighbors(&s, &t).is_ok(), s != t);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(6))]

            #[test]
            fn mechanism_is_private_on_random_pairs((s, t) in pair(), seed in any::<u64>()) {
                prop_assume!(s != t);
                let l = GenericPrivateLearner {
                    collection: discretize_hypotheses(2, 0.5).unwrap(),
                    epsilon: 1.0,
                    zeta: 0.5,
                };
                prop_assert!(dp_test(&l, &s, &t, 1.0, 0.0, MIN_DP_TRIALS, seed).unwrap().passed);
            }
        }
    }
}
