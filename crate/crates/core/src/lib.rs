//! Desk-scale learning-theory laboratory over finite real-valued concept
//! classes: robust online learning, globally stable and private learners,
//! one-way communication reductions and Holevo-information bounds.

pub mod communication;
pub mod concept;
pub mod dimensions;
pub mod error;
pub mod experiment;
pub mod online;
pub mod privacy;
pub mod quantum;
pub mod rng;
pub mod stability;

pub use concept::{
    binary_entropy, cover_new, function_ball, loss, round_to_grid, superbin_members, Concept,
    ConceptClass, ConceptSet, Cover, Distribution, DomainPoint, LabeledExample, TOL,
};
pub use dimensions::{fat, ldim_oracle, sfat, sfat_class, sfat_empty_convention, DimensionResult, ShatterTree};
pub use error::{Error, Result};
