//! Adversaries choosing the points of an online game.

use rand::Rng as _;

use crate::concept::{Concept, ConceptClass};
use crate::dimensions::ShatterTree;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// What an adversary may look at when choosing the next point.
pub struct AdversaryContext<'c> {
    pub class: &'c ConceptClass,
    /// The fixed target, absent in weak games.
    pub target: Option<&'c Concept>,
    /// Queries the learner's prediction at a point without advancing the game.
    pub probe: &'c mut dyn FnMut(usize) -> Result<f64>,
    pub rng: &'c mut Rng,
}

pub trait Adversary {
    /// Point for round `round`, or `None` to end the game.
    fn next_point(&mut self, round: usize, ctx: &mut AdversaryContext<'_>) -> Result<Option<usize>>;

    /// Weak feedback: whether to claim a mistake on `prediction` at `x`.
    fn claim(&mut self, _x: usize, _prediction: f64) -> Result<bool> {
        Ok(false)
    }

    /// The target the adversary has committed to, if any.
    fn committed_target(&self) -> Option<u64> {
        None
    }
}

/// Replays a fixed list of points cyclically.
#[derive(Clone, Debug)]
pub struct CycleAdversary {
    points: Vec<usize>,
}

impl CycleAdversary {
    pub fn new(points: Vec<usize>) -> Self {
        assert!(!points.is_empty(), "cycle adversary needs at least one point");
        CycleAdversary { points }
    }
}

impl Adversary for CycleAdversary {
    fn next_point(&mut self, round: usize, _ctx: &mut AdversaryContext<'_>) -> Result<Option<usize>> {
        Ok(Some(self.points[round % self.points.len()]))
    }
}

/// Draws each point uniformly from the domain.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformAdversary;

impl Adversary for UniformAdversary {
    fn next_point(&mut self, _round: usize, ctx: &mut AdversaryContext<'_>) -> Result<Option<usize>> {
        Ok(Some(ctx.rng.gen_range(0..ctx.class.domain_size())))
    }
}

/// Presents the point where the learner's current prediction is farthest
/// from the target (first such point on ties).
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyAdversary;

impl Adversary for GreedyAdversary {
    fn next_point(&mut self, _round: usize, ctx: &mut AdversaryContext<'_>) -> Result<Option<usize>> {
        let target = ctx.target.ok_or(Error::OutOfRange {
            name: "target",
            value: f64::NAN,
            reason: "greedy adversary needs a fixed target",
        })?;
        let mut best = (0, f64::NEG_INFINITY);
        for x in 0..ctx.class.domain_size() {
            let gap = ((ctx.probe)(x)? - target.at(x)).abs();
            if gap > best.1 {
                best = (x, gap);
            }
        }
        Ok(Some(best.0))
    }
}

/// The weak-feedback adversary walking a shatter tree: it always claims a
/// mistake, moves right when the prediction is below the node threshold and
/// left otherwise, and commits to the leaf concept at the bottom.
#[derive(Clone, Debug)]
pub struct TreeAdversary {
    node: ShatterTree,
    committed: Option<u64>,
    pending: bool,
}

/// Builds the tree-walking weak adversary for a validated witness.
pub fn weak_adversary_from_tree(witness: &ShatterTree) -> TreeAdversary {
    let mut adv = TreeAdversary {
        node: witness.clone(),
        committed: None,
        pending: false,
    };
    adv.commit_if_leaf();
    adv
}

impl TreeAdversary {
    fn commit_if_leaf(&mut self) {
        if let ShatterTree::Leaf { leaf } = self.node {
            self.committed = Some(leaf);
        }
    }

    /// Current node point, or `TreeExhausted` once committed.
    pub fn current_point(&self) -> Result<usize> {
        match &self.node {
            ShatterTree::Node { x, .. } => Ok(*x),
            ShatterTree::Leaf { .. } => Err(Error::TreeExhausted),
        }
    }

    /// Reacts to the learner's prediction at the current node.
    pub fn respond(&mut self, prediction: f64) -> Result<bool> {
        let next = match &self.node {
            ShatterTree::Leaf { .. } => return Err(Error::TreeExhausted),
            ShatterTree::Node { a, left, right, .. } => {
                if prediction < *a {
                    (**right).clone()
                } else {
                    (**left).clone()
                }
            }
        };
        self.node = next;
        self.commit_if_leaf();
        Ok(true)
    }
}

impl Adversary for TreeAdversary {
    fn next_point(&mut self, _round: usize, _ctx: &mut AdversaryContext<'_>) -> Result<Option<usize>> {
        if self.committed.is_some() {
            return Ok(None);
        }
        self.pending = true;
        self.current_point().map(Some)
    }

    fn claim(&mut self, x: usize, prediction: f64) -> Result<bool> {
        if !self.pending || self.current_point()? != x {
            return Err(Error::TreeExhausted);
        }
        self.pending = false;
        self.respond(prediction)
    }

    fn committed_target(&self) -> Option<u64> {
        self.committed
    }
}
