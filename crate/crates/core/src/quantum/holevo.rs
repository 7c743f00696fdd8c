//! Entropies, Holevo information and the dimension bounds built on them.
//! All logarithms are base 2.

use serde::{Deserialize, Serialize};

use super::linalg::{eigenvalues, log2_psd, spectrum_entropy, trace_norm, trace_product};
use super::state::{mixture, same_dims, DensityMatrix, Ensemble};
use crate::concept::binary_entropy;
use crate::error::{Error, Result};

pub const MAX_HOLEVO_STATES: usize = 16;
pub const MAX_HOLEVO_ITERATIONS: usize = 100_000;
pub const DEFAULT_HOLEVO_TOL: f64 = 1e-6;

/// S(ρ) = −Tr ρ log₂ ρ.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let eigs = rho.eigenvalues();
    if eigs[0] < -1e-10 {
        return Err(Error::NotPsd(eigs[0]));
    }
    Ok(spectrum_entropy(&eigs))
}

/// χ = S(ρ̄) − Σ p_i S(ρ_i), clamped at 0.
pub fn holevo_chi(ensemble: &Ensemble) -> Result<f64> {
    let mixed = spectrum_entropy(&eigenvalues(&ensemble.mixture()));
    let mut avg = 0.0;
    for (s, &w) in ensemble.states.iter().zip(&ensemble.weights) {
        avg += w * von_neumann_entropy(s)?;
    }
    Ok((mixed - avg).max(0.0))
}

/// Outcome of the Holevo maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolevoMax {
    pub chi: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

/// Maximizes χ over the weights of a fixed list of states with the
/// Blahut-Arimoto iteration q_i ← q_i·2^{D(ρ_i‖ρ̄)}/Z.
///
/// The gap max_i D(ρ_i‖ρ̄) − χ bounds the distance to the optimum, so the
/// loop stops once it drops below `tol`.
pub fn max_holevo(states: &[DensityMatrix], tol: f64) -> Result<HolevoMax> {
    if states.is_empty() || states.len() > MAX_HOLEVO_STATES {
        return Err(Error::OutOfRange {
            name: "states",
            value: states.len() as f64,
            reason: "between 1 and 16 states are supported",
        });
    }
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol",
            value: tol,
            reason: "tolerance must be positive",
        });
    }
    same_dims(states)?;
    let self_terms = states
        .iter()
        .map(von_neumann_entropy)
        .collect::<Result<Vec<_>>>()?;
    let n = states.len();
    let mut q = vec![1.0 / n as f64; n];
    for it in 0..MAX_HOLEVO_ITERATIONS {
        let log_bar = log2_psd(&mixture(states, &q));
        // D(ρ_i‖ρ̄) = −S(ρ_i) − Tr ρ_i log ρ̄
        let div: Vec<f64> = states
            .iter()
            .zip(&self_terms)
            .map(|(s, &h)| (-h - trace_product(s.matrix(), &log_bar)).max(0.0))
            .collect();
        let chi: f64 = q.iter().zip(&div).map(|(a, b)| a * b).sum();
        let top = div.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top - chi < tol {
            return Ok(HolevoMax {
                chi: chi.max(0.0),
                weights: q,
                iterations: it,
            });
        }
        // shift exponents by the max for stability
        for (qi, d) in q.iter_mut().zip(&div) {
            *qi *= (d - top).exp2();
        }
        let z: f64 = q.iter().sum();
        q.iter_mut().for_each(|qi| *qi /= z);
    }
    Err(Error::NonConvergence(MAX_HOLEVO_ITERATIONS))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            reason: "success probability must lie in (1/2, 1]",
        });
    }
    Ok(())
}

/// χ*/(1 − H(p)): the ceiling on the depth of a p-serial random access code
/// over the states, hence on the p-sequential fat-shattering dimension.
pub fn sfat_holevo_bound(chi_star: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(chi_star / (1.0 - binary_entropy(p)?))
}

/// log₂ d − S_min for the d-dimensional depolarizing channel with
/// parameter λ.
pub fn depolarizing_capacity_bound(d: usize, lam: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
            reason: "dimension must be at least 2",
        });
    }
    if !(0.0..=1.0).contains(&lam) {
        return Err(Error::OutOfRange {
            name: "lam",
            value: lam,
            reason: "depolarizing parameter must lie in [0, 1]",
        });
    }
    let df = d as f64;
    let top = lam + (1.0 - lam) / df;
    let rest = (1.0 - lam) / df;
    let plogp = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let s_min = -plogp(top) - (df - 1.0) * plogp(rest);
    Ok((df.log2() - s_min).max(0.0))
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dims(&[rho.clone(), sigma.clone()])?;
    Ok(0.5 * trace_norm(&(rho.matrix() - sigma.matrix())))
}

/// v_m·log₂|U| with v_m the largest pairwise trace distance.
pub fn audenaert_bound(ensemble: &Ensemble) -> Result<f64> {
    let s = &ensemble.states;
    let mut vm: f64 = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            vm = vm.max(trace_distance(&s[i], &s[j])?);
        }
    }
    Ok(vm * (s.len() as f64).log2())
}

/// log₂ k: the Holevo ceiling for states living in a common k-dimensional
/// subspace.
pub fn junta_bound(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange {
            name: "k",
            value: 0.0,
            reason: "subspace dimension must be at least 1",
        });
    }
    Ok((k as f64).log2())
}

/// Optimal single-shot success probability for telling σ₀ from σ₁.
pub fn helstrom_probability(sigma0: &DensityMatrix, sigma1: &DensityMatrix) -> Result<f64> {
    Ok(0.5 + 0.5 * trace_distance(sigma0, sigma1)?)
}

/// Checks S((σ₀+σ₁)/2) ≥ ½[S(σ₀)+S(σ₁)] + 1 − H(p) with p the Helstrom
/// probability, up to 1e-9.
pub fn nayak_inequality_check(sigma0: &DensityMatrix, sigma1: &DensityMatrix) -> Result<bool> {
    let p = helstrom_probability(sigma0, sigma1)?.min(1.0);
    let avg = mixture(&[sigma0.clone(), sigma1.clone()], &[0.5, 0.5]);
    let lhs = spectrum_entropy(&eigenvalues(&avg));
    let rhs = 0.5 * (von_neumann_entropy(sigma0)? + von_neumann_entropy(sigma1)?) + 1.0
        - binary_entropy(p)?;
    Ok(lhs >= rhs - 1e-9)
}
