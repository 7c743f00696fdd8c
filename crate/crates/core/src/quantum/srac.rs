//! Serial random access codes read off shatter trees, and the
//! measurement-ball membership test used for quantum stability.

use serde::{Deserialize, Serialize};

use super::holevo::holevo_chi;
use super::state::{expectation, materialize_concept_class, DensityMatrix, Ensemble, Measurement};
use crate::concept::TOL;
use crate::dimensions::ShatterTree;
use crate::error::{Error, Result};

/// Decoding instruction for the bit that follows `prefix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeRule {
    pub prefix: Vec<bool>,
    pub measurement: usize,
    pub threshold: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codeword {
    pub bits: Vec<bool>,
    pub state: usize,
}

/// A k-bit code: one state per bit string and, per tree node, the
/// measurement and threshold that recover the next bit.
///
/// Bits are stored in tree order: bit i is decoded knowing bits 1..i−1.
/// Reversing the strings gives the convention in which each bit may use the
/// bits after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SracCode {
    pub k: usize,
    pub codewords: Vec<Codeword>,
    pub rules: Vec<DecodeRule>,
}

fn collect_rules(tree: &ShatterTree, prefix: &mut Vec<bool>, margin: f64, out: &mut Vec<DecodeRule>) {
    if let ShatterTree::Node { x, a, left, right } = tree {
        out.push(DecodeRule {
            prefix: prefix.clone(),
            measurement: *x,
            threshold: *a,
            margin,
        });
        prefix.push(false);
        collect_rules(left, prefix, margin, out);
        prefix.pop();
        prefix.push(true);
        collect_rules(right, prefix, margin, out);
        prefix.pop();
    }
}

/// Builds the code whose codewords are the leaves of a validated shatter
/// tree over the class {Tr(E·ρ)} and checks its separation exactly.
pub fn srac_from_tree(
    states: &[DensityMatrix],
    measurements: &[Measurement],
    witness: &ShatterTree,
    zeta: f64,
) -> Result<SracCode> {
    let class = materialize_concept_class(states, measurements)?;
    witness.validate(&class, zeta)?;
    let k = witness.depth();
    let codewords = (0..1usize << k)
        .map(|mask| {
            let bits: Vec<bool> = (0..k).map(|j| mask >> (k - 1 - j) & 1 == 1).collect();
            let leaf = match witness.descend(&bits) {
                Some(ShatterTree::Leaf { leaf }) => *leaf,
                _ => unreachable!("validated trees are complete"),
            };
            Codeword {
                bits,
                state: leaf as usize,
            }
        })
        .collect();
    let mut rules = Vec::new();
    collect_rules(witness, &mut Vec::new(), zeta, &mut rules);
    let code = SracCode { k, codewords, rules };
    code.verify_separation(states, measurements)?;
    Ok(code)
}

impl SracCode {
    fn rule(&self, prefix: &[bool]) -> &DecodeRule {
        self.rules
            .iter()
            .find(|r| r.prefix == prefix)
            .expect("one rule per internal node")
    }

    /// Every codeword lies on the correct side of every ancestor threshold
    /// by at least the margin.
    pub fn verify_separation(&self, states: &[DensityMatrix], measurements: &[Measurement]) -> Result<()> {
        for cw in &self.codewords {
            for i in 0..self.k {
                let r = self.rule(&cw.bits[..i]);
                let v = expectation(&states[cw.state], &measurements[r.measurement])?;
                let ok = if cw.bits[i] {
                    v >= r.threshold + r.margin - TOL
                } else {
                    v <= r.threshold - r.margin + TOL
                };
                if !ok {
                    return Err(Error::InvalidTree(format!(
                        "codeword {:?} value {v} at level {i} is on the wrong side of {}",
                        cw.bits, r.threshold
                    )));
                }
            }
        }
        Ok(())
    }

    /// Decodes every bit of every codeword by comparing exact expectations
    /// with the thresholds; returns whether all bits come back.
    pub fn exact_decoding_succeeds(&self, states: &[DensityMatrix], measurements: &[Measurement]) -> Result<bool> {
        for cw in &self.codewords {
            let mut decoded = Vec::with_capacity(self.k);
            for _ in 0..self.k {
                let r = self.rule(&decoded);
                let v = expectation(&states[cw.state], &measurements[r.measurement])?;
                decoded.push(v > r.threshold);
            }
            if decoded != cw.bits {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Worst-case single-shot success probability of recovering a bit.
    ///
    /// A node with threshold a is decoded by measuring E once and then
    /// answering 1 with probability ½ + s·(outcome − a), which is a valid
    /// two-outcome measurement for slope s = 1/(2·max(a, 1−a)). A codeword
    /// with value v ≥ a + ζ then decodes correctly with probability
    /// ½ + s·(v − a).
    pub fn decoding_probability(&self, states: &[DensityMatrix], measurements: &[Measurement]) -> Result<f64> {
        let mut worst: f64 = 1.0;
        for cw in &self.codewords {
            for i in 0..self.k {
                let r = self.rule(&cw.bits[..i]);
                let a = r.threshold;
                let slope = 0.5 / a.max(1.0 - a);
                let v = expectation(&states[cw.state], &measurements[r.measurement])?;
                let g = (0.5 + slope * (v - a)).clamp(0.0, 1.0);
                worst = worst.min(if cw.bits[i] { g } else { 1.0 - g });
            }
        }
        Ok(worst)
    }

    /// χ of the uniform ensemble over the codeword states.
    pub fn codeword_holevo(&self, states: &[DensityMatrix]) -> Result<f64> {
        let code_states = self.codewords.iter().map(|c| states[c.state].clone()).collect();
        holevo_chi(&Ensemble::uniform(code_states)?)
    }
}

/// Margin at which a shatter tree yields decoding probability at least p
/// through [`SracCode::decoding_probability`]: 2p − 1.
pub fn margin_for_success(p: f64) -> f64 {
    2.0 * p - 1.0
}

/// Whether σ′ lies in the ball {σ′ : |Tr(Eσ) − Tr(Eσ′)| ≤ ε for every listed E}.
pub fn quantum_ball_member(
    sigma_prime: &DensityMatrix,
    sigma: &DensityMatrix,
    eps: f64,
    measurements: &[Measurement],
) -> Result<bool> {
    for e in measurements {
        let gap = (expectation(sigma, e)? - expectation(sigma_prime, e)?).abs();
        if gap > eps + TOL {
            return Ok(false);
        }
    }
    Ok(true)
}
