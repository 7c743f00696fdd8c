//! Online learning: the robust learner, adversaries, the game harness and
//! the shadow-tomography stream.

pub mod adversary;
pub mod game;
pub mod rsoa;
pub mod shadow;

pub use adversary::{
    weak_adversary_from_tree, Adversary, AdversaryContext, CycleAdversary, GreedyAdversary,
    TreeAdversary, UniformAdversary,
};
pub use game::{
    run_game, run_online_game, ConstantLearner, FeedbackMode, NoiseStrategy, OnlineLearner, Round,
    Transcript,
};
pub use rsoa::{rsoa_mistake_only_step, rsoa_predict, rsoa_update, MistakeOnlyStep, Prediction, Rsoa};
pub use shadow::{gentle_sample_complexity, run_shadow_stream, ShadowRun};
