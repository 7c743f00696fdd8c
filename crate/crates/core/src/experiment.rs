//! Batch experiment runner: a JSON configuration in, a JSON summary and an
//! optional CSV detail table out.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::communication::{
    baseline_eval_protocol, cc_lower_bound, run_batch, write_batch_csv, BatchRow,
    CorruptedProtocol,
};
use crate::concept::{binary_entropy, integer_reciprocal, Concept, ConceptClass, Distribution, LabeledExample};
use crate::dimensions::{fat, ldim_oracle, sfat_class, FAT_MAX_DOMAIN};
use crate::error::Error;
use crate::online::{
    run_game, run_online_game, run_shadow_stream, weak_adversary_from_tree, Adversary,
    ConstantLearner, CycleAdversary, FeedbackMode, GreedyAdversary, NoiseStrategy, Rsoa,
    Transcript, UniformAdversary, gentle_sample_complexity,
};
use crate::privacy::{discretize_hypotheses, dp_test, GenericPrivateLearner, MIN_DP_TRIALS};
use crate::quantum::{
    audenaert_bound, holevo_chi, margin_for_success, materialize_concept_class, max_holevo,
    nayak_inequality_check, sfat_holevo_bound, srac_from_tree, DensityMatrix, Ensemble,
    Measurement, DEFAULT_HOLEVO_TOL,
};
use crate::quantum::holevo::MAX_HOLEVO_STATES;
use crate::rng::rng_from_seed;
use crate::stability::{g_parameters, stability_experiment};

pub const SCHEMA_VERSION: u32 = 1;
const MAX_GENERATED_DOMAIN: usize = 8;
const MAX_GENERATED_CONCEPTS: usize = 64;
const MAX_ROUNDS: usize = 100_000;
const MAX_STABILITY_DRAWS: f64 = 1e10;
const MAX_COMM_RUNS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Dims,
    Online,
    Adversary,
    Stability,
    Privacy,
    Comm,
    Quantum,
    Shadow,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Dims => "dims",
            Kind::Online => "online",
            Kind::Adversary => "adversary",
            Kind::Stability => "stability",
            Kind::Privacy => "privacy",
            Kind::Comm => "comm",
            Kind::Quantum => "quantum",
            Kind::Shadow => "shadow",
        }
    }
}

/// Parameters of a random class on the ζ/5 grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub domain_size: usize,
    pub concepts: usize,
    pub zeta: f64,
}

/// States and measurements defining a class {Tr(E·ρ)}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSource {
    pub states: Vec<DensityMatrix>,
    pub measurements: Vec<Measurement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSource {
    /// Rows of values, one per concept.
    Table(Vec<Vec<f64>>),
    Constants { values: Vec<f64>, domain_size: usize },
    Generated(GeneratorSpec),
    Quantum(QuantumSource),
    /// Path to a JSON file holding a [`QuantumSource`], relative to the
    /// configuration file.
    QuantumFile(PathBuf),
}

/// Every tunable of every kind; each kind reads the fields it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub zeta: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub p: Option<f64>,
    pub tol: Option<f64>,
    pub rounds: Option<usize>,
    pub runs: Option<usize>,
    pub trials: Option<usize>,
    pub repeats: Option<usize>,
    pub passes: Option<usize>,
    pub depth: Option<usize>,
    pub m: Option<usize>,
    pub target: Option<u64>,
    pub noise: Option<String>,
    pub adversary: Option<String>,
    pub learner: Option<String>,
    pub failure: Option<f64>,
    pub distribution: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the kind named on the command line when present.
    #[serde(default)]
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub class: ClassSource,
    #[serde(default)]
    pub params: Params,
    /// Output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("experiment fault: {0}")]
    Fault(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for configuration errors, 1 for anything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Summary plus optional CSV detail of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub detail_csv: Option<Vec<u8>>,
}

impl RunOutput {
    pub fn summary_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("json values serialize");
        s.push('\n');
        s
    }

    /// Writes `summary.json` and, when present, `detail.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_text())?;
        if let Some(csv) = &self.detail_csv {
            fs::write(dir.join("detail.csv"), csv)?;
        }
        Ok(())
    }
}

/// A random class whose values lie on the ζ/5 grid {0, ζ/5, …, 1}.
pub fn generate_class(spec: &GeneratorSpec, seed: u64) -> crate::Result<ConceptClass> {
    if spec.domain_size > MAX_GENERATED_DOMAIN || spec.concepts > MAX_GENERATED_CONCEPTS {
        return Err(Error::TooLarge(format!(
            "generated classes are limited to {MAX_GENERATED_DOMAIN} points and \
             {MAX_GENERATED_CONCEPTS} concepts, got {} and {}",
            spec.domain_size, spec.concepts
        )));
    }
    if spec.domain_size == 0 || spec.concepts == 0 {
        return Err(Error::EmptyClass);
    }
    let steps = integer_reciprocal("zeta/5", spec.zeta / 5.0)?;
    let mut rng = rng_from_seed(seed);
    let rows = (0..spec.concepts)
        .map(|_| {
            (0..spec.domain_size)
                .map(|_| rng.gen_range(0..=steps) as f64 / steps as f64)
                .collect()
        })
        .collect();
    ConceptClass::from_rows(rows)
}

fn load_quantum(path: &Path, base: &Path) -> RunResult<QuantumSource> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    let text = fs::read_to_string(&full)
        .map_err(|e| config_err(format!("cannot read {}: {e}", full.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", full.display())))
}

struct Prepared {
    kind: Kind,
    seed: u64,
    class: ConceptClass,
    quantum: Option<QuantumSource>,
    params: Params,
}

fn need(value: Option<f64>, field: &'static str, kind: Kind) -> RunResult<f64> {
    value.ok_or_else(|| config_err(format!("params.{field} is required for kind {}", kind.name())))
}

fn reciprocal(value: f64, field: &'static str) -> RunResult<usize> {
    integer_reciprocal(field, value).map_err(|e| config_err(format!("params.{field}: {e}")))
}

fn positive(value: f64, field: &'static str) -> RunResult<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(config_err(format!("params.{field} = {value} must be positive")))
    }
}

fn open_unit(value: f64, field: &'static str) -> RunResult<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(config_err(format!("params.{field} = {value} must lie in (0, 1)")))
    }
}

fn target_of(class: &ConceptClass, params: &Params) -> RunResult<u64> {
    let id = params.target.unwrap_or(class.concept(0).id);
    class
        .index_of(id)
        .map_err(|e| config_err(format!("params.target: {e}")))?;
    Ok(id)
}

fn noise_of(params: &Params, zeta: f64, seed: u64) -> RunResult<NoiseStrategy> {
    let noise = match params.noise.as_deref().unwrap_or("exact") {
        "exact" => NoiseStrategy::Exact,
        "grid" => NoiseStrategy::RoundToGrid { step: zeta },
        "uniform" => NoiseStrategy::UniformWithin { zeta, seed },
        "extreme" => NoiseStrategy::AdversarialExtreme { zeta },
        other => {
            return Err(config_err(format!(
                "params.noise = {other:?}; expected exact, grid, uniform or extreme"
            )))
        }
    };
    noise.validate(zeta).map_err(|e| config_err(format!("params.noise: {e}")))?;
    Ok(noise)
}

fn distribution_of(class: &ConceptClass, params: &Params) -> RunResult<Distribution> {
    match &params.distribution {
        Some(p) => Distribution::new(p.clone())
            .and_then(|d| {
                if d.len() == class.domain_size() {
                    Ok(d)
                } else {
                    Err(Error::DomainMismatch {
                        expected: class.domain_size(),
                        actual: d.len(),
                    })
                }
            })
            .map_err(|e| config_err(format!("params.distribution: {e}"))),
        None => Distribution::uniform(class.domain_size())
            .map_err(|e| config_err(format!("params.distribution: {e}"))),
    }
}

fn prepare(
    kind: Kind,
    config: ExperimentConfig,
    seed_override: Option<u64>,
    base: &Path,
) -> RunResult<Prepared> {
    if let Some(k) = config.kind {
        if k != kind {
            return Err(config_err(format!(
                "kind: config says {} but {} was requested",
                k.name(),
                kind.name()
            )));
        }
    }
    let seed = seed_override
        .or(config.seed)
        .ok_or_else(|| config_err("seed is required"))?;
    let quantum = match &config.class {
        ClassSource::Quantum(q) => Some(q.clone()),
        ClassSource::QuantumFile(p) => Some(load_quantum(p, base)?),
        _ => None,
    };
    let class = match (&config.class, &quantum) {
        (_, Some(q)) => materialize_concept_class(&q.states, &q.measurements),
        (ClassSource::Table(rows), _) => ConceptClass::from_rows(rows.clone()),
        (ClassSource::Constants { values, domain_size }, _) => {
            ConceptClass::constants(values, *domain_size)
        }
        (ClassSource::Generated(spec), _) => generate_class(spec, seed),
        _ => unreachable!("quantum sources handled above"),
    }
    .map_err(|e| config_err(format!("class: {e}")))?;
    class.full_set().map_err(|e| config_err(format!("class: {e}")))?;
    let p = Prepared {
        kind,
        seed,
        class,
        quantum,
        params: config.params,
    };
    validate(&p)?;
    Ok(p)
}

/// Checks every parameter the kind will use before any work starts.
fn validate(p: &Prepared) -> RunResult<()> {
    let (kind, params, class) = (p.kind, &p.params, &p.class);
    match kind {
        Kind::Dims => {
            reciprocal(need(params.zeta, "zeta", kind)?, "zeta")?;
        }
        Kind::Online => {
            let zeta = need(params.zeta, "zeta", kind)?;
            reciprocal(zeta, "zeta")?;
            FeedbackMode::strong(noise_of(params, zeta, p.seed)?, zeta)
                .validate()
                .map_err(|e| config_err(format!("params.zeta: {e}")))?;
            target_of(class, params)?;
            check_rounds(params.rounds)?;
            match params.adversary.as_deref().unwrap_or("greedy") {
                "greedy" | "uniform" | "cycle" => {}
                other => {
                    return Err(config_err(format!(
                        "params.adversary = {other:?}; expected greedy, uniform or cycle"
                    )))
                }
            }
        }
        Kind::Adversary => {
            reciprocal(need(params.zeta, "zeta", kind)?, "zeta")?;
            learner_name(params)?;
        }
        Kind::Stability => {
            let zeta = need(params.zeta, "zeta", kind)?;
            reciprocal(zeta, "zeta")?;
            if zeta >= 0.5 {
                return Err(config_err("params.zeta must be below 1/2"));
            }
            positive(need(params.alpha, "alpha", kind)?, "alpha")?;
            target_of(class, params)?;
            distribution_of(class, params)?;
            let runs = params.runs.unwrap_or(100);
            if runs < 100 {
                return Err(config_err("params.runs must be at least 100"));
            }
            let g = g_parameters(class, zeta, params.alpha.unwrap_or(1.0)).map_err(config_err)?;
            if g.budget() as f64 * runs as f64 > MAX_STABILITY_DRAWS {
                return Err(config_err(format!(
                    "params: {runs} runs with a budget of {} draws each is too large",
                    g.budget()
                )));
            }
        }
        Kind::Privacy => {
            positive(need(params.epsilon, "epsilon", kind)?, "epsilon")?;
            let zeta = need(params.zeta, "zeta", kind)?;
            reciprocal(zeta, "zeta")?;
            discretize_hypotheses(class.domain_size(), zeta)
                .map_err(|e| config_err(format!("params.zeta: {e}")))?;
            if params.delta.is_some_and(|d| !(0.0..1.0).contains(&d)) {
                return Err(config_err("params.delta must lie in [0, 1)"));
            }
            if params.trials.unwrap_or(MIN_DP_TRIALS) < MIN_DP_TRIALS {
                return Err(config_err(format!("params.trials must be at least {MIN_DP_TRIALS}")));
            }
            if params.m == Some(0) {
                return Err(config_err("params.m must be positive"));
            }
            target_of(class, params)?;
        }
        Kind::Comm => {
            let zeta = need(params.zeta, "zeta", kind)?;
            reciprocal(zeta, "zeta")?;
            let failure = params.failure.unwrap_or(0.0);
            if !(0.0..=0.5).contains(&failure) {
                return Err(config_err("params.failure must lie in [0, 1/2]"));
            }
            let d = sfat_class(class, zeta).map_err(config_err)?.dimension;
            let depth = params.depth.unwrap_or(d);
            if depth > d {
                return Err(config_err(format!(
                    "params.depth = {depth} exceeds the class's sfat {d}"
                )));
            }
            let runs = (1usize << depth) * depth * params.repeats.unwrap_or(1);
            if runs > MAX_COMM_RUNS {
                return Err(config_err(format!("params: {runs} protocol runs is too many")));
            }
        }
        Kind::Quantum => {
            let q = p
                .quantum
                .as_ref()
                .ok_or_else(|| config_err("class: kind quantum needs a quantum class source"))?;
            if q.states.len() > MAX_HOLEVO_STATES {
                return Err(config_err(format!(
                    "class: at most {MAX_HOLEVO_STATES} states are supported"
                )));
            }
            let prob = params.p.unwrap_or(0.9);
            if !(prob > 0.5 && prob <= 1.0) {
                return Err(config_err("params.p must lie in (1/2, 1]"));
            }
            positive(params.tol.unwrap_or(DEFAULT_HOLEVO_TOL), "tol")?;
            if let Some(z) = params.zeta {
                positive(z, "zeta")?;
            }
        }
        Kind::Shadow => {
            open_unit(need(params.epsilon, "epsilon", kind)?, "epsilon")?;
            target_of(class, params)?;
            if params.passes == Some(0) {
                return Err(config_err("params.passes must be positive"));
            }
            if let (Some(a), Some(d)) = (params.alpha, params.delta) {
                positive(a, "alpha")?;
                open_unit(d, "delta")?;
                if class.domain_size() < 2 {
                    return Err(config_err("gentle sample complexity needs at least two measurements"));
                }
            }
        }
    }
    Ok(())
}

fn check_rounds(rounds: Option<usize>) -> RunResult<()> {
    if rounds.unwrap_or(200) > MAX_ROUNDS {
        return Err(config_err(format!("params.rounds is limited to {MAX_ROUNDS}")));
    }
    Ok(())
}

fn learner_name(params: &Params) -> RunResult<&str> {
    match params.learner.as_deref().unwrap_or("rsoa") {
        l @ ("rsoa" | "constant") => Ok(l),
        other => Err(config_err(format!(
            "params.learner = {other:?}; expected rsoa or constant"
        ))),
    }
}

fn transcript_csv(t: &Transcript) -> RunResult<Vec<u8>> {
    let mut out = Vec::new();
    t.write_csv(&mut out).map_err(csv_fault)?;
    Ok(out)
}

fn csv_fault(e: csv::Error) -> RunError {
    RunError::Io(std::io::Error::other(e))
}

fn header(p: &Prepared) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!(p.kind.name()));
    m.insert("seed".into(), json!(p.seed));
    m.insert("domain_size".into(), json!(p.class.domain_size()));
    m.insert("concepts".into(), json!(p.class.len()));
    m
}

fn execute(p: &Prepared) -> RunResult<RunOutput> {
    let mut s = header(p);
    let params = &p.params;
    let class = &p.class;
    let mut detail = None;
    match p.kind {
        Kind::Dims => {
            let zeta = params.zeta.expect("validated");
            let r = sfat_class(class, zeta)?;
            s.insert("zeta".into(), json!(zeta));
            s.insert("sfat".into(), json!(r.dimension));
            s.insert("witness".into(), serde_json::to_value(&r.witness).expect("tree"));
            if class.domain_size() <= FAT_MAX_DOMAIN {
                s.insert("fat".into(), json!(fat(class, zeta)?));
            }
            if let Ok(l) = ldim_oracle(class) {
                s.insert("ldim".into(), json!(l));
            }
        }
        Kind::Online => {
            let zeta = params.zeta.expect("validated");
            let target = target_of(class, params)?;
            let mode = FeedbackMode::strong(noise_of(params, zeta, p.seed)?, zeta);
            let rounds = params.rounds.unwrap_or(200);
            let mut adversary: Box<dyn Adversary> = match params.adversary.as_deref().unwrap_or("greedy") {
                "uniform" => Box::new(UniformAdversary),
                "cycle" => Box::new(CycleAdversary::new((0..class.domain_size()).collect())),
                _ => Box::new(GreedyAdversary),
            };
            let t = run_online_game(class, target, adversary.as_mut(), mode, rounds, p.seed)?;
            let bound = sfat_class(class, 2.0 * zeta)?.dimension;
            s.insert("zeta".into(), json!(zeta));
            s.insert("target".into(), json!(target));
            s.insert("rounds".into(), json!(t.rounds.len()));
            s.insert("mistakes".into(), json!(t.mistakes()));
            s.insert("feedback_rounds".into(), json!(t.feedback_rounds()));
            s.insert("sfat_2zeta".into(), json!(bound));
            s.insert("within_bound".into(), json!(t.mistakes() <= bound));
            detail = Some(transcript_csv(&t)?);
        }
        Kind::Adversary => {
            let zeta = params.zeta.expect("validated");
            let r = sfat_class(class, zeta)?;
            let mut adv = weak_adversary_from_tree(&r.witness);
            let rounds = r.dimension + 1;
            let t = match learner_name(params)? {
                "constant" => run_game(&mut ConstantLearner(0.5), class, None, &mut adv, FeedbackMode::Weak, rounds, p.seed)?,
                _ => {
                    let mut l = Rsoa::new(class, zeta / 2.0)?;
                    run_game(&mut l, class, None, &mut adv, FeedbackMode::Weak, rounds, p.seed)?
                }
            };
            s.insert("zeta".into(), json!(zeta));
            s.insert("learner".into(), json!(learner_name(params)?));
            s.insert("sfat".into(), json!(r.dimension));
            s.insert("claimed_mistakes".into(), json!(t.mistakes()));
            s.insert("committed_target".into(), json!(t.target_id));
            s.insert("forced".into(), json!(t.mistakes() >= r.dimension));
            detail = Some(transcript_csv(&t)?);
        }
        Kind::Stability => {
            let zeta = params.zeta.expect("validated");
            let alpha = params.alpha.expect("validated");
            let dist = distribution_of(class, params)?;
            let target = target_of(class, params)?;
            let runs = params.runs.unwrap_or(100);
            let rep = stability_experiment(class, target, &dist, zeta, alpha, runs, p.seed)?;
            s.insert("zeta".into(), json!(zeta));
            s.insert("target".into(), json!(target));
            s.insert("report".into(), serde_json::to_value(&rep).expect("report"));
            s.insert(
                "stable".into(),
                json!(rep.empirical_frequency >= rep.theoretical_floor - 3.0 * rep.sigma_hat),
            );
            s.insert("accurate".into(), json!(rep.center_loss <= alpha));
            let mut out = Vec::new();
            rep.write_hypotheses_csv(&mut out).map_err(csv_fault)?;
            detail = Some(out);
        }
        Kind::Privacy => {
            let epsilon = params.epsilon.expect("validated");
            let zeta = params.zeta.expect("validated");
            let delta = params.delta.unwrap_or(0.0);
            let trials = params.trials.unwrap_or(MIN_DP_TRIALS);
            let target = class.concept(class.index_of(target_of(class, params)?)?);
            let m = params.m.unwrap_or(class.domain_size());
            let sample: Vec<LabeledExample> = (0..m)
                .map(|i| {
                    let x = i % class.domain_size();
                    LabeledExample { x, y: target.at(x) }
                })
                .collect();
            let mut neighbor = sample.clone();
            neighbor[0].y = if sample[0].y < 0.5 { 1.0 } else { 0.0 };
            let learner = GenericPrivateLearner {
                collection: discretize_hypotheses(class.domain_size(), zeta)?,
                epsilon,
                zeta,
            };
            let rep = dp_test(&learner, &sample, &neighbor, epsilon, delta, trials, p.seed)?;
            s.insert("epsilon".into(), json!(epsilon));
            s.insert("delta".into(), json!(delta));
            s.insert("zeta".into(), json!(zeta));
            s.insert("trials".into(), json!(trials));
            s.insert("events".into(), json!(rep.events.len()));
            s.insert("max_violation".into(), json!(rep.max_violation));
            s.insert("confidence".into(), json!(rep.confidence));
            s.insert("passed".into(), json!(rep.passed));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["output", "freq_s", "freq_neighbor"]).map_err(csv_fault)?;
            for e in &rep.events {
                let out: Vec<String> = e.output.iter().map(f64::to_string).collect();
                w.write_record([out.join(" "), e.freq_s.to_string(), e.freq_neighbor.to_string()])
                    .map_err(csv_fault)?;
            }
            detail = Some(w.into_inner().map_err(|e| RunError::Io(e.into_error()))?);
        }
        Kind::Comm => {
            let zeta = params.zeta.expect("validated");
            let r = sfat_class(class, zeta)?;
            let depth = params.depth.unwrap_or(r.dimension);
            let failure = params.failure.unwrap_or(0.0);
            let repeats = params.repeats.unwrap_or(1);
            let base = baseline_eval_protocol(class);
            let rows: Vec<BatchRow> = if failure > 0.0 {
                let proto = CorruptedProtocol { inner: base, failure };
                run_batch(class, &r.witness, zeta, depth, &proto, repeats, p.seed)?
            } else {
                run_batch(class, &r.witness, zeta, depth, &base, repeats, p.seed)?
            };
            let successes = rows.iter().filter(|r| r.success).count();
            s.insert("zeta".into(), json!(zeta));
            s.insert("sfat".into(), json!(r.dimension));
            s.insert("depth".into(), json!(depth));
            s.insert("failure".into(), json!(failure));
            s.insert("bits".into(), json!(rows.first().map_or(0, |r| r.bits)));
            s.insert("runs".into(), json!(rows.len()));
            s.insert("successes".into(), json!(successes));
            s.insert(
                "success_rate".into(),
                json!(if rows.is_empty() { 1.0 } else { successes as f64 / rows.len() as f64 }),
            );
            s.insert("lower_bound".into(), json!(cc_lower_bound(r.dimension, failure, false)?));
            let mut out = Vec::new();
            write_batch_csv(&rows, &mut out).map_err(csv_fault)?;
            detail = Some(out);
        }
        Kind::Quantum => {
            let q = p.quantum.as_ref().expect("validated");
            let prob = params.p.unwrap_or(0.9);
            let tol = params.tol.unwrap_or(DEFAULT_HOLEVO_TOL);
            let best = max_holevo(&q.states, tol)?;
            let uniform = Ensemble::uniform(q.states.clone())?;
            let chi_uniform = holevo_chi(&uniform)?;
            let bound = sfat_holevo_bound(best.chi, prob)?;
            let sfat_p = sfat_class(class, margin_for_success(prob))?.dimension;
            let mut nayak = true;
            for i in 0..q.states.len() {
                for j in i + 1..q.states.len() {
                    nayak &= nayak_inequality_check(&q.states[i], &q.states[j])?;
                }
            }
            s.insert("p".into(), json!(prob));
            s.insert("chi_star".into(), json!(best.chi));
            s.insert("weights".into(), json!(best.weights));
            s.insert("iterations".into(), json!(best.iterations));
            s.insert("chi_uniform".into(), json!(chi_uniform));
            s.insert("audenaert_bound".into(), json!(audenaert_bound(&uniform)?));
            s.insert("holevo_bound".into(), json!(bound));
            s.insert("sfat_p".into(), json!(sfat_p));
            s.insert("bound_holds".into(), json!(sfat_p as f64 <= bound + 1e-9));
            s.insert("nayak_holds".into(), json!(nayak));
            if let Some(zeta) = params.zeta {
                let tree = sfat_class(class, zeta)?.witness;
                let code = srac_from_tree(&q.states, &q.measurements, &tree, zeta)?;
                let pc = code.decoding_probability(&q.states, &q.measurements)?;
                let chi_code = code.codeword_holevo(&q.states)?;
                let need_bits = code.k as f64 * (1.0 - binary_entropy(pc)?);
                s.insert(
                    "srac".into(),
                    json!({
                        "zeta": zeta,
                        "k": code.k,
                        "decoding_probability": pc,
                        "codeword_holevo": chi_code,
                        "chain_holds": need_bits <= chi_code + 1e-9 && chi_code <= best.chi + 1e-6,
                    }),
                );
            }
        }
        Kind::Shadow => {
            let epsilon = params.epsilon.expect("validated");
            let target_id = target_of(class, params)?;
            let target = class.concept(class.index_of(target_id)?);
            let passes = params.passes.unwrap_or(2);
            let order: Vec<usize> = (0..passes).flat_map(|_| 0..class.domain_size()).collect();
            let run = run_shadow_stream(class, target_id, &order, epsilon)?;
            let bound = sfat_class(class, 2.0 * epsilon / 5.0)?.dimension;
            let max_err = run
                .transcript
                .rounds
                .iter()
                .filter(|r| r.feedback.is_none())
                .map(|r| (r.prediction - target.at(r.x)).abs())
                .fold(0.0, f64::max);
            s.insert("epsilon".into(), json!(epsilon));
            s.insert("target".into(), json!(target_id));
            s.insert("rounds".into(), json!(order.len()));
            s.insert("updates".into(), json!(run.updates));
            s.insert("sfat_2eps_5".into(), json!(bound));
            s.insert("updates_within_bound".into(), json!(run.updates <= bound));
            s.insert("max_non_update_error".into(), json!(max_err));
            s.insert("estimates_within_epsilon".into(), json!(max_err <= epsilon + 1e-12));
            if let (Some(alpha), Some(delta)) = (params.alpha, params.delta) {
                s.insert(
                    "gentle_sample_complexity".into(),
                    json!(gentle_sample_complexity(bound, class.domain_size(), epsilon, alpha, delta)?),
                );
            }
            detail = Some(transcript_csv(&run.transcript)?);
        }
    }
    Ok(RunOutput {
        summary: Value::Object(s),
        detail_csv: detail,
    })
}

/// Validates and runs one experiment. `base` resolves relative paths inside
/// the configuration.
pub fn run(
    kind: Kind,
    config: ExperimentConfig,
    seed_override: Option<u64>,
    base: &Path,
) -> RunResult<RunOutput> {
    let prepared = prepare(kind, config, seed_override, base)?;
    execute(&prepared)
}

/// Reads a configuration file, mapping every failure to a configuration
/// error.
pub fn load_config(path: &Path) -> RunResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Whether every value of `c` lies on the ζ/5 grid.
pub fn on_grid(c: &Concept, zeta: f64) -> bool {
    let steps = 5.0 / zeta;
    c.values
        .iter()
        .all(|v| ((v * steps).round() - v * steps).abs() < 1e-9)
}
