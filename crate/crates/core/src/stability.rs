//! The mistake-injection sampler ext(D, k), the globally stable learner G
//! built on it, and the Monte Carlo harness measuring its stability.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concept::{
    cover_new, in_function_ball, loss, Concept, ConceptClass, Distribution, LabeledExample, TOL,
};
use crate::dimensions::SfatOracle;
use crate::error::{Error, Result};
use crate::online::Rsoa;
use crate::rng::{child_rng, child_seed, Rng};

/// Gap (in units of ζ) two hypotheses must exceed before a mistake example
/// is injected.
pub const SPLIT_GAP: f64 = 11.0;

/// One block of `m` examples followed by its injected mistake example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub block: Vec<LabeledExample>,
    pub mistake: LabeledExample,
}

/// A sample from ext(D, k): `k` blocks, each followed by a mistake example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtSample {
    pub k: usize,
    pub segments: Vec<Segment>,
    /// Examples drawn from D while generating the sample, discarded
    /// attempts included.
    pub draws_used: u64,
}

impl ExtSample {
    /// The sample as one sequence B₁ M₁ B₂ M₂ ... B_k M_k.
    pub fn examples(&self) -> Vec<LabeledExample> {
        flatten(&self.segments)
    }
}

fn flatten(segments: &[Segment]) -> Vec<LabeledExample> {
    let mut out = Vec::new();
    for s in segments {
        out.extend_from_slice(&s.block);
        out.push(s.mistake);
    }
    out
}

struct ExtSampler<'a> {
    target: &'a Concept,
    sampler: WeightedIndex<f64>,
    m: usize,
    zeta: f64,
    midpoints: Vec<f64>,
    cutoff: u64,
    draws: u64,
    learner: Rsoa<'a>,
}

impl<'a> ExtSampler<'a> {
    fn new(
        class: &'a ConceptClass,
        target: &'a Concept,
        dist: &Distribution,
        m: usize,
        zeta: f64,
        cutoff: u64,
    ) -> Result<Self> {
        if dist.len() != class.domain_size() {
            return Err(Error::DomainMismatch {
                expected: class.domain_size(),
                actual: dist.len(),
            });
        }
        let midpoints = cover_new(zeta)?.bin_midpoints;
        Ok(ExtSampler {
            target,
            sampler: dist.sampler(),
            m,
            zeta,
            midpoints,
            cutoff,
            draws: 0,
            learner: Rsoa::new(class, zeta)?,
        })
    }

    fn block(&mut self, rng: &mut Rng) -> Result<Vec<LabeledExample>> {
        self.draws += self.m as u64;
        if self.draws > self.cutoff {
            return Err(Error::CutoffExceeded {
                draws: self.draws,
                cutoff: self.cutoff,
            });
        }
        Ok((0..self.m)
            .map(|_| {
                let x = self.sampler.sample(rng);
                LabeledExample {
                    x,
                    y: self.target.at(x),
                }
            })
            .collect())
    }

    fn hypothesis(&mut self, prefix: &[Segment], block: &[LabeledExample]) -> Concept {
        self.learner.reset();
        self.learner.run_sample(&flatten(prefix));
        self.learner.run_sample(block)
    }

    fn ext(&mut self, k: usize, seed: u64) -> Result<Vec<Segment>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        for attempt in 0u64.. {
            let s0 = self.ext(k - 1, child_seed(seed, 4 * attempt))?;
            let s1 = self.ext(k - 1, child_seed(seed, 4 * attempt + 1))?;
            let mut rng = child_rng(seed, 4 * attempt + 2);
            let b0 = self.block(&mut rng)?;
            let b1 = self.block(&mut rng)?;
            let f0 = self.hypothesis(&s0, &b0);
            let f1 = self.hypothesis(&s1, &b1);
            let gap = SPLIT_GAP * self.zeta;
            let Some(x) = (0..f0.values.len()).find(|&x| (f0.at(x) - f1.at(x)).abs() > gap + TOL)
            else {
                continue;
            };
            let mut rng = child_rng(seed, 4 * attempt + 3);
            let alpha = self.midpoints[rng.gen_range(0..self.midpoints.len())];
            let mistake = LabeledExample { x, y: alpha };
            // append to the branch whose hypothesis is farther from α; ties keep branch 0
            let (mut chosen, block) = if (alpha - f0.at(x)).abs() < (alpha - f1.at(x)).abs() {
                (s1, b1)
            } else {
                (s0, b0)
            };
            chosen.push(Segment { block, mistake });
            return Ok(chosen);
        }
        unreachable!("attempt counter is unbounded")
    }
}

/// Draws a sample from ext(D, k) for target `target_id`, with blocks of `m`
/// examples and RSOA at accuracy `zeta`. Fails with `CutoffExceeded` once
/// more than `cutoff` examples have been drawn from D.
#[allow(clippy::too_many_arguments)]
pub fn sample_ext(
    class: &ConceptClass,
    target_id: u64,
    dist: &Distribution,
    k: usize,
    m: usize,
    zeta: f64,
    cutoff: u64,
    seed: u64,
) -> Result<ExtSample> {
    if cutoff == 0 {
        return Err(Error::OutOfRange {
            name: "cutoff",
            value: 0.0,
            reason: "cutoff must be positive",
        });
    }
    let target = class.concept(class.index_of(target_id)?);
    let mut sampler = ExtSampler::new(class, target, dist, m, zeta, cutoff)?;
    let segments = sampler.ext(k, seed)?;
    Ok(ExtSample {
        k,
        segments,
        draws_used: sampler.draws,
    })
}

/// Sample sizes used by G.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GParameters {
    /// sfat of the class at margin 2ζ.
    pub d: usize,
    /// Block size ⌈d·ln(1/ζ)/α⌉, at least 1.
    pub m: usize,
    /// Draw cutoff 2·(4/ζ)^(d+1)·m.
    pub cutoff: u64,
}

impl GParameters {
    /// Total examples G may consume: cutoff plus the final block.
    pub fn budget(&self) -> u64 {
        self.cutoff + self.m as u64
    }
}

/// Block size ⌈d·ln(1/ζ)/α⌉, raised to 1 so the final block is never empty.
pub fn g_block_size(d: usize, zeta: f64, alpha: f64) -> usize {
    let raw = d as f64 * (1.0 / zeta).ln() / alpha;
    ((raw - 1e-9).ceil() as usize).max(1)
}

/// Cutoff 2·(4/ζ)^(d+1)·m.
pub fn g_cutoff(d: usize, zeta: f64, m: usize) -> u64 {
    (2.0 * (4.0 / zeta).powi(d as i32 + 1) * m as f64).round() as u64
}

/// Stability floor ζ^d / (2(d+1)).
pub fn stability_floor(d: usize, zeta: f64) -> f64 {
    zeta.powi(d as i32) / (2.0 * (d as f64 + 1.0))
}

/// Computes d, m and the cutoff for class, accuracy and target loss.
pub fn g_parameters(class: &ConceptClass, zeta: f64, alpha: f64) -> Result<GParameters> {
    cover_new(zeta)?;
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            reason: "must be positive",
        });
    }
    let d = SfatOracle::new(class, 2.0 * zeta)?.dim(class.full_set()?) as usize;
    let m = g_block_size(d, zeta, alpha);
    Ok(GParameters {
        d,
        m,
        cutoff: g_cutoff(d, zeta, m),
    })
}

fn run_g(
    class: &ConceptClass,
    target: &Concept,
    dist: &Distribution,
    zeta: f64,
    params: GParameters,
    seed: u64,
) -> Result<Concept> {
    let mut rng = child_rng(seed, 0);
    let k = rng.gen_range(0..=params.d);
    let mut sampler = ExtSampler::new(class, target, dist, params.m, zeta, params.cutoff)?;
    let prefix = sampler.ext(k, child_seed(seed, 1))?;
    // the final block is drawn outside the cutoff accounting
    sampler.cutoff = u64::MAX;
    let block = sampler.block(&mut child_rng(seed, 2))?;
    Ok(sampler.hypothesis(&prefix, &block))
}

/// One run of G: draws k ∈ {0..d}, S ∼ ext(D, k) under the cutoff and
/// B ∼ D^m, and returns RSOA's final hypothesis on S∘B.
pub fn stable_learner_g(
    class: &ConceptClass,
    target_id: u64,
    dist: &Distribution,
    zeta: f64,
    alpha: f64,
    seed: u64,
) -> Result<Concept> {
    let params = g_parameters(class, zeta, alpha)?;
    let target = class.concept(class.index_of(target_id)?);
    run_g(class, target, dist, zeta, params, seed)
}

/// Short content hash of a hypothesis.
pub fn hypothesis_hash(h: &Concept) -> String {
    let mut hasher = Sha256::new();
    for v in &h.values {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Outcome of repeated runs of G.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub runs: usize,
    pub failures: usize,
    pub params: GParameters,
    /// Per-run hypothesis hash, `None` for runs that hit the cutoff.
    pub hypothesis_hashes: Vec<Option<String>>,
    #[serde(skip)]
    pub hypotheses: Vec<Option<Concept>>,
    pub best_ball_center: Option<Concept>,
    /// Fraction of runs landing in the 11ζ function ball around the center.
    pub empirical_frequency: f64,
    /// Binomial standard error of the frequency.
    pub sigma_hat: f64,
    pub theoretical_floor: f64,
    /// Loss_D(center, c, 12ζ).
    pub center_loss: f64,
    pub alpha: f64,
}

impl StabilityReport {
    /// Writes one row per run: run, hash, values...
    pub fn write_hypotheses_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, h) in self.hypotheses.iter().enumerate() {
            let mut row = vec![i.to_string()];
            match h {
                Some(h) => {
                    row.push(hypothesis_hash(h));
                    row.extend(h.values.iter().map(f64::to_string));
                }
                None => row.push("fail".into()),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs G `runs` times (in parallel, run `i` seeded by stream `i` of
/// `seed`), clusters the outputs by 11ζ function balls around each distinct
/// output and reports the most popular ball.
pub fn stability_experiment(
    class: &ConceptClass,
    target_id: u64,
    dist: &Distribution,
    zeta: f64,
    alpha: f64,
    runs: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if runs < 100 {
        return Err(Error::OutOfRange {
            name: "runs",
            value: runs as f64,
            reason: "at least 100 runs are needed for a frequency estimate",
        });
    }
    let params = g_parameters(class, zeta, alpha)?;
    let target = class.concept(class.index_of(target_id)?);
    let hypotheses = (0..runs)
        .into_par_iter()
        .map(|i| match run_g(class, target, dist, zeta, params, child_seed(seed, i as u64)) {
            Ok(h) => Ok(Some(h)),
            Err(Error::CutoffExceeded { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut distinct: Vec<(Concept, usize)> = Vec::new();
    for h in hypotheses.iter().flatten() {
        match distinct.iter_mut().find(|(c, _)| c.values == h.values) {
            Some((_, n)) => *n += 1,
            None => distinct.push((h.clone(), 1)),
        }
    }
    let radius = SPLIT_GAP * zeta;
    let mut best: Option<(Concept, usize)> = None;
    for (center, _) in &distinct {
        let mut members = 0;
        for (h, n) in &distinct {
            if in_function_ball(center, radius, h)? {
                members += n;
            }
        }
        if best.as_ref().map_or(true, |(_, b)| members > *b) {
            best = Some((center.clone(), members));
        }
    }
    let failures = hypotheses.iter().filter(|h| h.is_none()).count();
    let (center, members) = match best {
        Some((c, n)) => (Some(c), n),
        None => (None, 0),
    };
    let freq = members as f64 / runs as f64;
    let center_loss = match &center {
        Some(c) => loss(c, target, 12.0 * zeta, dist)?,
        None => 1.0,
    };
    Ok(StabilityReport {
        runs,
        failures,
        params,
        hypothesis_hashes: hypotheses
            .iter()
            .map(|h| h.as_ref().map(hypothesis_hash))
            .collect(),
        hypotheses,
        best_ball_center: center,
        empirical_frequency: freq,
        sigma_hat: (freq * (1.0 - freq) / runs as f64).sqrt(),
        theoretical_floor: stability_floor(params.d, zeta),
        center_loss,
        alpha,
    })
}
