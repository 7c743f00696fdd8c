//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use rand::Rng as _;
use rayon::prelude::*;

use sfatlab::communication::{all_instances, baseline_eval_protocol, run_batch, CorruptedProtocol};
use sfatlab::concept::{binary_entropy, Concept, ConceptClass, Distribution, LabeledExample, TOL};
use sfatlab::dimensions::{ldim_oracle, sfat_class};
use sfatlab::online::{
    gentle_sample_complexity, run_game, run_online_game, run_shadow_stream, weak_adversary_from_tree,
    ConstantLearner, FeedbackMode, GreedyAdversary, NoiseStrategy, Rsoa,
};
use sfatlab::privacy::{
    build_probabilistic_representation, discretize_hypotheses, dp_test, exponential_weights,
    GenericPrivateLearner,
};
use sfatlab::quantum::linalg::{CMatrix, C64};
use sfatlab::quantum::{
    depolarizing_capacity_bound, holevo_chi, margin_for_success, materialize_concept_class, max_holevo,
    nayak_inequality_check, pauli_eigenprojectors, random_basis_measurements, random_density_matrix,
    sfat_holevo_bound, srac_from_tree, DensityMatrix, Ensemble, Measurement,
};
use sfatlab::rng::{child_rng, Rng};
use sfatlab::stability::{sample_ext, stability_experiment};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Random class; with `coarse` the values sit on the quarter grid, which
/// makes deep shatter trees likely.
fn random_class(rng: &mut Rng, max_points: usize, max_concepts: usize, coarse: bool) -> ConceptClass {
    let n = rng.gen_range(1..=max_points);
    let k = rng.gen_range(1..=max_concepts);
    let mut value = || {
        if coarse {
            rng.gen_range(0..=4) as f64 / 4.0
        } else {
            rng.gen::<f64>()
        }
    };
    let rows = (0..k).map(|_| (0..n).map(|_| value()).collect()).collect();
    ConceptClass::from_rows(rows).unwrap()
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Entropy of a 2×2 density matrix from its closed-form eigenvalues.
fn qubit_entropy(m: &CMatrix) -> f64 {
    let (p, q) = (m[(0, 0)].re, m[(1, 1)].re);
    let off = m[(0, 1)].norm();
    let top = (p + q) / 2.0 + (((p - q) / 2.0).powi(2) + off * off).sqrt();
    h2(top.clamp(0.0, 1.0))
}

fn qubit_chi(a: &DensityMatrix, b: &DensityMatrix, w: f64) -> f64 {
    let mix = a.matrix().scale(w) + b.matrix().scale(1.0 - w);
    qubit_entropy(&mix) - w * qubit_entropy(a.matrix()) - (1.0 - w) * qubit_entropy(b.matrix())
}

fn random_qubit(rng: &mut Rng) -> DensityMatrix {
    let rank = rng.gen_range(1..=2);
    random_density_matrix(2, rank, rng).unwrap()
}

/// A few qubit states read by the Pauli "+" projectors and one random basis.
fn micro_quantum(rng: &mut Rng) -> (Vec<DensityMatrix>, Vec<Measurement>) {
    let n = rng.gen_range(2..=4);
    let states = (0..n).map(|_| random_qubit(rng)).collect();
    let mut meas = pauli_eigenprojectors();
    meas.extend(random_basis_measurements(2, rng).unwrap());
    (states, meas)
}

fn mistake_bound() -> Verdict {
    let zetas = [0.2, 0.125];
    let results: Vec<(usize, usize, usize)> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(1, i);
            let class = random_class(&mut rng, 6, 20, i % 4 < 2);
            let zeta = zetas[(i % 2) as usize];
            let target = class.concepts()[rng.gen_range(0..class.len())].clone();
            let bound = sfat_class(&class, 2.0 * zeta).unwrap().dimension;
            let noises = [
                NoiseStrategy::Exact,
                NoiseStrategy::RoundToGrid { step: zeta },
                NoiseStrategy::UniformWithin { zeta, seed: i },
                NoiseStrategy::AdversarialExtreme { zeta },
            ];
            let mut worst = 0;
            let mut violations = 0;
            for noise in noises {
                let t = run_online_game(
                    &class,
                    target.id,
                    &mut GreedyAdversary,
                    FeedbackMode::strong(noise, zeta),
                    200,
                    i,
                )
                .unwrap();
                let far = t
                    .rounds
                    .iter()
                    .filter(|r| (r.prediction - target.at(r.x)).abs() > 5.0 * zeta + TOL)
                    .count();
                worst = worst.max(far);
                if far > bound {
                    violations += 1;
                }
            }
            (violations, worst, bound)
        })
        .collect();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let worst = results.iter().map(|r| r.1).max().unwrap();
    let tight = results.iter().filter(|r| r.1 == r.2 && r.2 > 0).count();
    verdict(
        violations == 0,
        format!("2000 games, {violations} violations, most far rounds {worst}, {tight} classes at the bound"),
    )
}

fn boolean_agreement() -> Verdict {
    let mismatches: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = child_rng(2, i);
            let n = rng.gen_range(1..=5usize);
            let mut masks: Vec<usize> = (0..1usize << n).filter(|_| rng.gen_bool(0.5)).collect();
            if masks.is_empty() {
                masks.push(0);
            }
            let rows = masks
                .iter()
                .map(|m| (0..n).map(|x| (m >> x & 1) as f64).collect())
                .collect();
            let class = ConceptClass::from_rows(rows).unwrap();
            let s = sfat_class(&class, 0.25).unwrap().dimension;
            let l = ldim_oracle(&class).unwrap();
            (s != l).then(|| format!("class {i}: sfat {s}, ldim {l}"))
        })
        .collect();
    verdict(mismatches.is_empty(), format!("200 classes, {} mismatches {mismatches:?}", mismatches.len()))
}

fn adversarial_forcing() -> Verdict {
    let results: Vec<(usize, usize)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(3, i);
            let class = random_class(&mut rng, 5, 12, i % 2 == 1);
            let zeta = if i % 2 == 0 { 0.2 } else { 0.125 };
            let r = sfat_class(&class, zeta).unwrap();
            let mut bad = 0;
            for constant in [false, true] {
                let mut adv = weak_adversary_from_tree(&r.witness);
                let t = if constant {
                    run_game(&mut ConstantLearner(0.5), &class, None, &mut adv, FeedbackMode::Weak, r.dimension + 1, i)
                } else {
                    let mut l = Rsoa::new(&class, zeta / 2.0).unwrap();
                    run_game(&mut l, &class, None, &mut adv, FeedbackMode::Weak, r.dimension + 1, i)
                }
                .unwrap();
                // every claim must be honest for the committed concept
                let c = class.concept(class.index_of(t.target_id.unwrap()).unwrap());
                let honest = t
                    .rounds
                    .iter()
                    .all(|rd| !rd.mistake || (rd.prediction - c.at(rd.x)).abs() >= zeta - TOL);
                if t.mistakes() < r.dimension || !honest {
                    bad += 1;
                }
            }
            (bad, r.dimension)
        })
        .collect();
    let bad: usize = results.iter().map(|r| r.0).sum();
    let deepest = results.iter().map(|r| r.1).max().unwrap();
    verdict(bad == 0, format!("200 games, {bad} violations, deepest tree {deepest}"))
}

fn stability() -> Verdict {
    let dist = Distribution::uniform(1).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    // {0.1, 0.9} cannot be split at margin 2ζ; {0, 1} can, exercising ext
    for (values, seed) in [([0.1, 0.9], 4), ([0.0, 1.0], 5)] {
        let class = ConceptClass::constants(&values, 1).unwrap();
        let rep = stability_experiment(&class, 0, &dist, 0.25, 0.5, 2000, seed).unwrap();
        let floor = 1.0 / 16.0;
        pass &= rep.empirical_frequency >= floor - 3.0 * rep.sigma_hat;
        pass &= rep.center_loss <= rep.alpha;
        detail.push(format!(
            "{values:?}: d={}, frequency {:.4} (sigma {:.4}), center loss {}, cutoff failures {}",
            rep.params.d, rep.empirical_frequency, rep.sigma_hat, rep.center_loss, rep.failures
        ));
    }
    verdict(pass, detail.join("; "))
}

fn ext_cost() -> Verdict {
    // one informative point with 64 values and one point where every concept agrees
    let rows: Vec<Vec<f64>> = (0..64).map(|j| vec![0.5, j as f64 / 63.0]).collect();
    let class = ConceptClass::from_rows(rows).unwrap();
    let dist = Distribution::new(vec![0.6, 0.4]).unwrap();
    let (zeta, m) = (1.0 / 32.0, 1);
    let mut pass = true;
    let mut detail = Vec::new();
    for level in 1..=2usize {
        let draws: Vec<f64> = (0..1000u64)
            .into_par_iter()
            .map(|s| sample_ext(&class, 0, &dist, level, m, zeta, u64::MAX / 2, s).unwrap().draws_used as f64)
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let se = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let bound = 4f64.powi(level as i32 + 1) * m as f64;
        pass &= mean - 3.0 * se <= bound;
        detail.push(format!("level {level}: mean {mean:.2} se {se:.2} bound {bound}"));
    }
    verdict(pass, detail.join("; "))
}

fn ex(x: usize, y: f64) -> LabeledExample {
    LabeledExample { x, y }
}

fn privacy() -> Verdict {
    let pairs: Vec<(usize, f64, Vec<LabeledExample>, Vec<LabeledExample>)> = vec![
        (1, 0.25, vec![ex(0, 0.1)], vec![ex(0, 0.9)]),
        (1, 0.25, vec![ex(0, 0.1), ex(0, 0.1)], vec![ex(0, 0.1), ex(0, 0.9)]),
        (1, 0.25, vec![ex(0, 0.5); 3], vec![ex(0, 0.5), ex(0, 0.5), ex(0, 0.0)]),
        (1, 0.25, vec![ex(0, 0.3), ex(0, 0.7)], vec![ex(0, 0.3), ex(0, 0.3)]),
        (1, 0.25, vec![ex(0, 0.0); 4], vec![ex(0, 0.0), ex(0, 0.0), ex(0, 0.0), ex(0, 1.0)]),
        (2, 0.5, vec![ex(0, 0.1), ex(1, 0.9)], vec![ex(0, 0.9), ex(1, 0.9)]),
        (2, 0.5, vec![ex(0, 0.2)], vec![ex(1, 0.2)]),
        (2, 0.5, vec![ex(0, 0.1), ex(1, 0.1), ex(0, 0.1)], vec![ex(0, 0.1), ex(1, 0.1), ex(1, 0.9)]),
        (2, 0.5, vec![ex(1, 0.6), ex(1, 0.6)], vec![ex(1, 0.6), ex(0, 0.4)]),
        (2, 0.5, vec![ex(0, 1.0), ex(1, 0.0)], vec![ex(0, 1.0), ex(1, 1.0)]),
    ];
    let eps = 1.0;
    let mut failed = Vec::new();
    let mut worst_tv: f64 = 0.0;
    for (k, (n, zeta, s, t)) in pairs.iter().enumerate() {
        let collection = discretize_hypotheses(*n, *zeta).unwrap();
        let learner = GenericPrivateLearner { collection: collection.clone(), epsilon: eps, zeta: *zeta };
        let rep = dp_test(&learner, s, t, eps, 0.0, 10_000, 60 + k as u64).unwrap();
        let ws = exponential_weights(&collection, s, eps, *zeta);
        let wt = exponential_weights(&collection, t, eps, *zeta);
        let (mut tv_s, mut tv_t) = (0.0, 0.0);
        for (h, (ps, pt)) in collection.hypotheses.iter().zip(ws.iter().zip(&wt)) {
            let row = rep.events.iter().find(|e| e.output == h.values);
            let (fs, ft) = row.map_or((0.0, 0.0), |e| (e.freq_s, e.freq_neighbor));
            tv_s += (fs - ps).abs() / 2.0;
            tv_t += (ft - pt).abs() / 2.0;
        }
        let tv = f64::max(tv_s, tv_t);
        worst_tv = worst_tv.max(tv);
        if !rep.passed || tv > 0.02 {
            failed.push(k);
        }
    }
    verdict(
        failed.is_empty(),
        format!("10 pairs, failing pairs {failed:?}, worst TV {worst_tv:.4}"),
    )
}

fn harvest() -> Verdict {
    let zeta = 0.25;
    let collection = discretize_hypotheses(2, zeta).unwrap();
    let learner = GenericPrivateLearner { collection, epsilon: 1.0, zeta };
    let target = Concept::new(0, vec![0.3, 0.7]).unwrap();
    let dist = Distribution::uniform(2).unwrap();
    let trials = 400;
    let misses = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| {
            let h = build_probabilistic_representation(&learner, 2, zeta, 0.125, 1.0, 1, 70 + t).unwrap();
            !h.hits_good_set(&target, &dist, zeta, 0.25).unwrap()
        })
        .count();
    let rate = misses as f64 / trials as f64;
    let sigma = (rate * (1.0 - rate) / trials as f64).sqrt();
    verdict(rate <= 0.25 + 3.0 * sigma, format!("miss rate {rate:.4} over {trials} trials"))
}

fn communication() -> Verdict {
    let class = ConceptClass::boolean_cube(4).unwrap();
    let zeta = 0.25;
    let tree = sfat_class(&class, zeta).unwrap().witness;
    let baseline = baseline_eval_protocol(&class);
    let mut exact_failures = 0;
    for d in 1..=4 {
        let rows = run_batch(&class, &tree, zeta, d, &baseline, 1, 8).unwrap();
        assert_eq!(rows.len(), all_instances(d).len());
        exact_failures += rows.iter().filter(|r| !r.success).count();
    }
    let corrupted = CorruptedProtocol { inner: baseline, failure: 0.1 };
    let rows = run_batch(&class, &tree, zeta, 4, &corrupted, 157, 9).unwrap();
    let n = rows.len() as f64;
    let rate = rows.iter().filter(|r| r.success).count() as f64 / n;
    let sigma = (rate * (1.0 - rate) / n).sqrt();
    verdict(
        exact_failures == 0 && rate >= 0.9 - 3.0 * sigma,
        format!("exact failures {exact_failures}; corrupted success {rate:.4} over {n} trials"),
    )
}

fn holevo_suite() -> Verdict {
    let mut notes = Vec::new();
    let ket = |b: usize| {
        let mut v = vec![C64::new(0.0, 0.0); 2];
        v[b] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&v).unwrap()
    };
    let chi01 = holevo_chi(&Ensemble::uniform(vec![ket(0), ket(1)]).unwrap()).unwrap();
    let basis_ok = (chi01 - 1.0).abs() <= 1e-9;
    notes.push(format!("chi(|0>,|1>) = {chi01}"));

    let mut worst_gap: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = child_rng(90, i);
        let (a, b) = (random_qubit(&mut rng), random_qubit(&mut rng));
        let best = max_holevo(&[a.clone(), b.clone()], 1e-9).unwrap();
        let grid = (0..=100).map(|j| qubit_chi(&a, &b, j as f64 / 100.0)).fold(f64::MIN, f64::max);
        worst_gap = worst_gap.max((best.chi - grid).abs());
    }
    let grid_ok = worst_gap <= 1e-4;
    notes.push(format!("grid gap {worst_gap:.2e}"));

    let depol_ok = depolarizing_capacity_bound(2, 1.0).unwrap() == 1.0
        && depolarizing_capacity_bound(2, 0.0).unwrap() == 0.0;

    let sweep: Vec<usize> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(91, i);
            let (states, meas) = micro_quantum(&mut rng);
            let class = materialize_concept_class(&states, &meas).unwrap();
            let chi_star = max_holevo(&states, 1e-7).unwrap().chi;
            let mut bad = 0;
            for p in [0.8, 0.9] {
                let s = sfat_class(&class, margin_for_success(p)).unwrap().dimension;
                if s as f64 > sfat_holevo_bound(chi_star, p).unwrap() + 1e-9 {
                    bad += 1;
                }
            }
            // the code read off a shatter tree carries k(1 − H(p)) bits
            let zeta = 0.1;
            let tree = sfat_class(&class, zeta).unwrap().witness;
            let code = srac_from_tree(&states, &meas, &tree, zeta).unwrap();
            let pc = code.decoding_probability(&states, &meas).unwrap();
            let chi_code = code.codeword_holevo(&states).unwrap();
            let need = code.k as f64 * (1.0 - binary_entropy(pc).unwrap());
            if pc < 0.5 + zeta / 2.0 - 1e-9 || need > chi_code + 1e-9 || chi_code > chi_star + 1e-6 {
                bad += 1;
            }
            bad
        })
        .collect();
    let sweep_bad: usize = sweep.iter().sum();
    notes.push(format!("sweep violations {sweep_bad}"));

    let mut nayak_bad = 0;
    for i in 0..200u64 {
        let mut rng = child_rng(92, i);
        let (a, b) = (random_qubit(&mut rng), random_qubit(&mut rng));
        // independent check with closed-form qubit spectra
        let diff = a.matrix() - b.matrix();
        let half_gap = (((diff[(0, 0)].re - diff[(1, 1)].re) / 2.0).powi(2) + diff[(0, 1)].norm_sqr()).sqrt();
        let p = (0.5 + 0.5 * half_gap).min(1.0);
        let oracle = qubit_chi(&a, &b, 0.5) >= 1.0 - h2(p) - 1e-9;
        if !nayak_inequality_check(&a, &b).unwrap() || !oracle {
            nayak_bad += 1;
        }
    }
    notes.push(format!("pair violations {nayak_bad}"));

    verdict(
        basis_ok && grid_ok && depol_ok && sweep_bad == 0 && nayak_bad == 0,
        notes.join("; "),
    )
}

fn shadow() -> Verdict {
    let eps = 0.25;
    let results: Vec<(bool, usize, f64)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(100, i);
            let (states, meas) = micro_quantum(&mut rng);
            let class = materialize_concept_class(&states, &meas).unwrap();
            let target = rng.gen_range(0..class.len());
            let order: Vec<usize> = (0..3).flat_map(|_| 0..class.domain_size()).collect();
            let run = run_shadow_stream(&class, target as u64, &order, eps).unwrap();
            let bound = sfat_class(&class, 2.0 * eps / 5.0).unwrap().dimension;
            let max_err = run
                .transcript
                .rounds
                .iter()
                .filter(|r| r.feedback.is_none())
                .map(|r| (r.prediction - class.value(target, r.x)).abs())
                .fold(0.0, f64::max);
            (run.updates <= bound && max_err <= eps + TOL, run.updates, max_err)
        })
        .collect();
    let ok = results.iter().all(|r| r.0);
    let most = results.iter().map(|r| r.1).max().unwrap();
    let err = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let gentle = gentle_sample_complexity(1, 2, 0.5, 0.5, (-1.0f64).exp()).unwrap();
    verdict(
        ok && gentle == 16,
        format!("most updates {most}, worst silent error {err:.4}, gentle {gentle}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("mistake bound", mistake_bound),
        ("boolean agreement", boolean_agreement),
        ("adversarial forcing", adversarial_forcing),
        ("stability", stability),
        ("ext sampling cost", ext_cost),
        ("differential privacy", privacy),
        ("representation harvest", harvest),
        ("communication reduction", communication),
        ("holevo suite", holevo_suite),
        ("shadow stream", shadow),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name}: {} ({:.1?})", i + 1, v.detail, start.elapsed());
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
