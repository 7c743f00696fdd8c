//! The online game harness: feedback modes, noise strategies, learners and
//! the auditable transcript.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::concept::{integer_reciprocal, round_to_grid, Concept, ConceptClass, TOL};
use crate::error::{Error, Result};
use crate::online::adversary::{Adversary, AdversaryContext};
use crate::online::rsoa::Rsoa;
use crate::rng::{child_rng, Rng};

/// How strong-feedback values are perturbed away from the truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseStrategy {
    Exact,
    /// Nearest bin midpoint of the `step`-cover (error at most step/2).
    RoundToGrid { step: f64 },
    /// Uniform in the open interval of radius `zeta` around the truth,
    /// clipped to [0, 1].
    UniformWithin { zeta: f64, seed: u64 },
    /// Pushed to (just inside) truth ± `zeta`, on the side away from the
    /// learner's prediction.
    AdversarialExtreme { zeta: f64 },
}

/// Fraction of the radius used by the extreme strategy, keeping its output
/// strictly inside the open update ball.
const EXTREME_SHRINK: f64 = 1.0 - 1e-6;

impl NoiseStrategy {
    /// Checks that the strategy can honour accuracy `zeta`.
    pub fn validate(&self, zeta: f64) -> Result<()> {
        match *self {
            NoiseStrategy::Exact => Ok(()),
            NoiseStrategy::RoundToGrid { step } => {
                integer_reciprocal("step", step)?;
                if step / 2.0 >= zeta {
                    return Err(Error::OutOfRange {
                        name: "step",
                        value: step,
                        reason: "grid rounding error step/2 must be below the feedback accuracy",
                    });
                }
                Ok(())
            }
            NoiseStrategy::UniformWithin { zeta: z, .. }
            | NoiseStrategy::AdversarialExtreme { zeta: z } => {
                if !(z >= 0.0 && z <= zeta) {
                    return Err(Error::OutOfRange {
                        name: "noise zeta",
                        value: z,
                        reason: "noise radius must lie in [0, feedback accuracy]",
                    });
                }
                Ok(())
            }
        }
    }

    fn apply(&self, truth: f64, prediction: f64, rng: &mut Rng) -> Result<f64> {
        Ok(match *self {
            NoiseStrategy::Exact => truth,
            NoiseStrategy::RoundToGrid { step } => round_to_grid(truth, step)?,
            NoiseStrategy::UniformWithin { zeta, .. } => {
                let lo = (truth - zeta).max(0.0);
                let hi = (truth + zeta).min(1.0);
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    truth
                }
            }
            NoiseStrategy::AdversarialExtreme { zeta } => {
                let shift = zeta * EXTREME_SHRINK;
                let pushed = if prediction <= truth {
                    truth + shift
                } else {
                    truth - shift
                };
                pushed.clamp(0.0, 1.0)
            }
        })
    }

    fn stream_seed(&self) -> u64 {
        match *self {
            NoiseStrategy::UniformWithin { seed, .. } => seed,
            _ => 0,
        }
    }
}

/// What the adversary reveals each round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackMode {
    /// A ζ-accurate value every round; mistakes are misses by more than 5ζ.
    Strong { noise: NoiseStrategy, zeta: f64 },
    /// Only a claimed-mistake bit (and its direction); no values.
    Weak,
    /// An ε/10-accurate value only on rounds missing by more than ε.
    MistakeOnly { epsilon: f64, noise: NoiseStrategy },
}

impl FeedbackMode {
    /// Strong feedback at accuracy `zeta`.
    pub fn strong(noise: NoiseStrategy, zeta: f64) -> Self {
        FeedbackMode::Strong { noise, zeta }
    }

    /// Mistake-only feedback rounded to the ε/5 grid (error at most ε/10).
    pub fn mistake_only(epsilon: f64) -> Self {
        FeedbackMode::MistakeOnly {
            epsilon,
            noise: NoiseStrategy::RoundToGrid {
                step: epsilon / 5.0,
            },
        }
    }

    /// Miss size above which a round counts as a mistake (strict).
    pub fn mistake_threshold(&self) -> Option<f64> {
        match *self {
            FeedbackMode::Strong { zeta, .. } => Some(5.0 * zeta),
            FeedbackMode::MistakeOnly { epsilon, .. } => Some(epsilon),
            FeedbackMode::Weak => None,
        }
    }

    /// Largest allowed feedback error.
    pub fn accuracy(&self) -> Option<f64> {
        match *self {
            FeedbackMode::Strong { zeta, .. } => Some(zeta),
            FeedbackMode::MistakeOnly { epsilon, .. } => Some(epsilon / 10.0),
            FeedbackMode::Weak => None,
        }
    }

    fn noise(&self) -> Option<NoiseStrategy> {
        match *self {
            FeedbackMode::Strong { noise, .. } | FeedbackMode::MistakeOnly { noise, .. } => {
                Some(noise)
            }
            FeedbackMode::Weak => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FeedbackMode::Strong { noise, zeta } => {
                if !(zeta > 0.0 && zeta < 0.5) {
                    return Err(Error::OutOfRange {
                        name: "zeta",
                        value: zeta,
                        reason: "feedback accuracy must lie in (0, 1/2)",
                    });
                }
                noise.validate(zeta)
            }
            FeedbackMode::MistakeOnly { epsilon, noise } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(Error::OutOfRange {
                        name: "epsilon",
                        value: epsilon,
                        reason: "accuracy must lie in (0, 1)",
                    });
                }
                noise.validate(epsilon / 10.0 + TOL)
            }
            FeedbackMode::Weak => Ok(()),
        }
    }
}

/// An online learner as seen by the harness.
pub trait OnlineLearner {
    fn predict(&mut self, x: usize) -> Result<f64>;

    /// Called after every round; `feedback` is `None` when the mode reveals
    /// no value that round.
    fn observe(&mut self, round: usize, x: usize, feedback: Option<f64>) -> Result<()>;

    /// Size of the surviving set, for learners that keep one.
    fn surviving_count(&self) -> Option<usize> {
        None
    }

    /// Current hypothesis over the whole domain, if the learner has one.
    fn hypothesis(&mut self) -> Option<Concept> {
        None
    }
}

impl OnlineLearner for Rsoa<'_> {
    fn predict(&mut self, x: usize) -> Result<f64> {
        Rsoa::predict(self, x)
    }

    fn observe(&mut self, round: usize, x: usize, feedback: Option<f64>) -> Result<()> {
        if let Some(y) = feedback {
            if self.update(x, y).is_empty() {
                return Err(Error::InvalidFeedback {
                    round,
                    reason: format!("feedback {y} at point {x} eliminated every concept"),
                });
            }
        }
        Ok(())
    }

    fn surviving_count(&self) -> Option<usize> {
        Some(self.surviving().len())
    }

    fn hypothesis(&mut self) -> Option<Concept> {
        Some(Rsoa::hypothesis(self))
    }
}

/// A learner that always predicts the same value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantLearner(pub f64);

impl OnlineLearner for ConstantLearner {
    fn predict(&mut self, _x: usize) -> Result<f64> {
        Ok(self.0)
    }

    fn observe(&mut self, _round: usize, _x: usize, _feedback: Option<f64>) -> Result<()> {
        Ok(())
    }
}

/// One round of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: usize,
    pub x: usize,
    pub prediction: f64,
    pub feedback: Option<f64>,
    /// Miss beyond the mode's threshold, or a claimed mistake in weak mode.
    pub mistake: bool,
    pub surviving_before: Option<usize>,
    pub surviving_after: Option<usize>,
}

/// Full record of an online game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub mode: FeedbackMode,
    /// The target, fixed in advance or committed to by the adversary.
    pub target_id: Option<u64>,
    pub rounds: Vec<Round>,
    pub final_hypothesis: Option<Concept>,
}

impl Transcript {
    pub fn mistakes(&self) -> usize {
        self.rounds.iter().filter(|r| r.mistake).count()
    }

    /// Rounds where the learner received a value.
    pub fn feedback_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.feedback.is_some()).count()
    }

    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Summary CSV: round, x, prediction, feedback, mistake, surviving size.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "x", "prediction", "feedback", "mistake", "surviving"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.x.to_string(),
                r.prediction.to_string(),
                r.feedback.map(|f| f.to_string()).unwrap_or_default(),
                r.mistake.to_string(),
                r.surviving_after.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays `rounds` rounds of `learner` against `adversary`.
///
/// In strong and mistake-only modes the target is `target_id`; in weak mode
/// the adversary may commit to a target of its own, which is recorded when it
/// does. The game ends early if the adversary stops presenting points.
pub fn run_game<L: OnlineLearner + ?Sized, A: Adversary + ?Sized>(
    learner: &mut L,
    class: &ConceptClass,
    target_id: Option<u64>,
    adversary: &mut A,
    mode: FeedbackMode,
    rounds: usize,
    seed: u64,
) -> Result<Transcript> {
    mode.validate()?;
    let target = match (target_id, mode) {
        (Some(id), _) => Some(class.concept(class.index_of(id)?).clone()),
        (None, FeedbackMode::Weak) => None,
        (None, _) => {
            return Err(Error::OutOfRange {
                name: "target_id",
                value: f64::NAN,
                reason: "strong and mistake-only games need a target",
            })
        }
    };
    let mut noise_rng = child_rng(seed ^ mode.noise().map_or(0, |n| n.stream_seed()), 0);
    let mut adversary_rng = child_rng(seed, 1);
    let mut out = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let x = {
            let mut probe = |x: usize| learner.predict(x);
            let mut ctx = AdversaryContext {
                class,
                target: target.as_ref(),
                probe: &mut probe,
                rng: &mut adversary_rng,
            };
            match adversary.next_point(t, &mut ctx)? {
                Some(x) => x,
                None => break,
            }
        };
        class.check_point(x)?;
        let before = learner.surviving_count();
        let prediction = learner.predict(x)?;
        let (feedback, mistake) = match mode {
            FeedbackMode::Weak => (None, adversary.claim(x, prediction)?),
            _ => {
                let truth = target.as_ref().expect("checked above").at(x);
                let threshold = mode.mistake_threshold().expect("valued mode");
                let mistake = (prediction - truth).abs() > threshold + TOL;
                let reveal = matches!(mode, FeedbackMode::Strong { .. }) || mistake;
                let feedback = if reveal {
                    let noise = mode.noise().expect("valued mode");
                    let y = noise.apply(truth, prediction, &mut noise_rng)?;
                    let accuracy = mode.accuracy().expect("valued mode");
                    if !(0.0..=1.0).contains(&y) || (y - truth).abs() > accuracy + TOL {
                        return Err(Error::InvalidFeedback {
                            round: t,
                            reason: format!("feedback {y} is not within {accuracy} of {truth}"),
                        });
                    }
                    Some(y)
                } else {
                    None
                };
                (feedback, mistake)
            }
        };
        learner.observe(t, x, feedback)?;
        out.push(Round {
            round: t,
            x,
            prediction,
            feedback,
            mistake,
            surviving_before: before,
            surviving_after: learner.surviving_count(),
        });
    }
    let target_id = target_id.or_else(|| adversary.committed_target());
    Ok(Transcript {
        mode,
        target_id,
        rounds: out,
        final_hypothesis: learner.hypothesis(),
    })
}

/// Plays RSOA (or its mistake-only variant in that mode) against
/// `adversary` for `rounds` rounds.
pub fn run_online_game<A: Adversary + ?Sized>(
    class: &ConceptClass,
    target_id: u64,
    adversary: &mut A,
    mode: FeedbackMode,
    rounds: usize,
    seed: u64,
) -> Result<Transcript> {
    let mut learner = match mode {
        FeedbackMode::Strong { zeta, .. } => Rsoa::new(class, zeta)?,
        FeedbackMode::MistakeOnly { epsilon, .. } => Rsoa::mistake_only(class, epsilon)?,
        FeedbackMode::Weak => {
            return Err(Error::OutOfRange {
                name: "mode",
                value: f64::NAN,
                reason: "weak games take an explicit learner; use run_game",
            })
        }
    };
    run_game(
        &mut learner,
        class,
        Some(target_id),
        adversary,
        mode,
        rounds,
        seed,
    )
}
