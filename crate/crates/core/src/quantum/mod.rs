//! Few-qubit states and measurements, Holevo information and the bounds it
//! gives on sequential fat-shattering.

pub mod holevo;
pub mod linalg;
pub mod srac;
pub mod state;

pub use holevo::{
    audenaert_bound, depolarizing_capacity_bound, helstrom_probability, holevo_chi, junta_bound,
    max_holevo, nayak_inequality_check, sfat_holevo_bound, trace_distance, von_neumann_entropy,
    HolevoMax, DEFAULT_HOLEVO_TOL,
};
pub use srac::{margin_for_success, quantum_ball_member, srac_from_tree, Codeword, DecodeRule, SracCode};
pub use state::{
    basis_measurements, expectation, materialize_concept_class, pauli_eigenprojectors,
    random_basis_measurements, random_density_matrix, random_pure_state, DensityMatrix, Ensemble,
    MatrixJson, Measurement,
};
