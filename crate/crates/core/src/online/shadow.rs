//! The shadow-tomography stream: the mistake-only learner run over a fixed
//! order of measurements, plus the gentle sample-complexity calculator.

use crate::concept::ConceptClass;
use crate::error::{Error, Result};
use crate::online::adversary::CycleAdversary;
use crate::online::game::{run_online_game, FeedbackMode, Transcript};

/// Output of [`run_shadow_stream`].
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowRun {
    pub transcript: Transcript,
    /// The learner's estimate at each stream position.
    pub estimates: Vec<f64>,
    /// Rounds on which the learner received feedback and updated.
    pub updates: usize,
}

/// Streams the measurements `order` (domain indices of a materialized class)
/// past the mistake-only learner at accuracy `epsilon`, with feedback
/// rounded to the ε/5 grid.
pub fn run_shadow_stream(
    class: &ConceptClass,
    target_id: u64,
    order: &[usize],
    epsilon: f64,
) -> Result<ShadowRun> {
    if order.is_empty() {
        return Ok(ShadowRun {
            transcript: Transcript {
                mode: FeedbackMode::mistake_only(epsilon),
                target_id: Some(target_id),
                rounds: Vec::new(),
                final_hypothesis: None,
            },
            estimates: Vec::new(),
            updates: 0,
        });
    }
    let mut adversary = CycleAdversary::new(order.to_vec());
    let transcript = run_online_game(
        class,
        target_id,
        &mut adversary,
        FeedbackMode::mistake_only(epsilon),
        order.len(),
        0,
    )?;
    let estimates = transcript.rounds.iter().map(|r| r.prediction).collect();
    let updates = transcript.feedback_rounds();
    Ok(ShadowRun {
        transcript,
        estimates,
        updates,
    })
}

/// Copies of the state needed for gentle shadow tomography over `m`
/// measurements: ⌈sfat² · log₂²(m) · ln(1/δ) / (ε² · min(α², ε²))⌉ with
/// leading constant 1.
pub fn gentle_sample_complexity(
    sfat_dim: usize,
    m: usize,
    epsilon: f64,
    alpha: f64,
    delta: f64,
) -> Result<u64> {
    if m < 2 {
        return Err(Error::OutOfRange {
            name: "m",
            value: m as f64,
            reason: "at least two measurements are needed",
        });
    }
    for (name, v) in [("epsilon", epsilon), ("alpha", alpha)] {
        if !(v > 0.0) {
            return Err(Error::OutOfRange {
                name,
                value: v,
                reason: "must be positive",
            });
        }
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1)",
        });
    }
    let s = sfat_dim as f64;
    let lg = (m as f64).log2();
    let value = s * s * lg * lg * (1.0 / delta).ln() / (epsilon * epsilon * alpha.min(epsilon).powi(2));
    // absorb rounding noise in exact cases such as 16.000000000000004
    Ok((value * (1.0 - 1e-12)).ceil() as u64)
}
