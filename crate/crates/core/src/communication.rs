//! One-way communication: the AugIndex-via-Eval reduction over a shatter
//! tree, a baseline Eval protocol, and the lower-bound calculator.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::concept::{binary_entropy, ConceptClass};
use crate::dimensions::ShatterTree;
use crate::error::{Error, Result};
use crate::rng::{child_rng, Rng};

/// Alice holds `x ∈ {0,1}^d`, Bob holds `x[..i-1]` and must output `x_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugIndexInstance {
    pub x: Vec<bool>,
    /// One-based index of the bit Bob must output.
    pub i: usize,
}

impl AugIndexInstance {
    pub fn new(x: Vec<bool>, i: usize) -> Result<Self> {
        if i == 0 || i > x.len() {
            return Err(Error::OutOfRange {
                name: "i",
                value: i as f64,
                reason: "index must lie in 1..=d",
            });
        }
        Ok(AugIndexInstance { x, i })
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn answer(&self) -> bool {
        self.x[self.i - 1]
    }

    /// Bit string as text, most significant (first) bit left.
    pub fn bits(&self) -> String {
        self.x.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Cost and outcome of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub bits_sent: usize,
    /// Bob's estimate b of f(z).
    pub estimate: f64,
    pub bob_output: bool,
    pub success: bool,
}

/// A one-way protocol for evaluating f(z): Alice knows f (by its position in
/// a shared class), Bob knows z.
pub trait EvalProtocol {
    fn bits_sent(&self) -> usize;

    /// Bob's estimate of f(z) after receiving Alice's message.
    fn evaluate(&self, concept: usize, z: usize, rng: &mut Rng) -> f64;
}

/// Alice sends the index of her concept; Bob evaluates it exactly.
#[derive(Clone, Debug)]
pub struct BaselineProtocol<'a> {
    class: &'a ConceptClass,
}

/// The exact index-sending protocol, costing ⌈log₂|C|⌉ bits.
pub fn baseline_eval_protocol(class: &ConceptClass) -> BaselineProtocol<'_> {
    BaselineProtocol { class }
}

impl EvalProtocol for BaselineProtocol<'_> {
    fn bits_sent(&self) -> usize {
        let n = self.class.len();
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }

    fn evaluate(&self, concept: usize, z: usize, _rng: &mut Rng) -> f64 {
        self.class.value(concept, z)
    }
}

/// Wraps a protocol so that with probability `failure` Bob's estimate is
/// replaced by its reflection 1 − b.
#[derive(Clone, Debug)]
pub struct CorruptedProtocol<P> {
    pub inner: P,
    pub failure: f64,
}

impl<P: EvalProtocol> EvalProtocol for CorruptedProtocol<P> {
    fn bits_sent(&self) -> usize {
        self.inner.bits_sent()
    }

    fn evaluate(&self, concept: usize, z: usize, rng: &mut Rng) -> f64 {
        let b = self.inner.evaluate(concept, z, rng);
        if rng.gen_bool(self.failure) {
            1.0 - b
        } else {
            b
        }
    }
}

/// Solves an AugIndex instance with one call to an Eval protocol, using a
/// shatter tree both parties agreed on beforehand.
///
/// Alice follows her string down the tree (bit j picks the child at level
/// j, false = left) and then the leftmost path to a leaf concept. Bob
/// follows his prefix to node w and asks for the leaf concept's value at
/// w's point; he outputs 1 iff the answer exceeds w's threshold.
pub fn augindex_via_eval<P: EvalProtocol + ?Sized>(
    class: &ConceptClass,
    tree: &ShatterTree,
    zeta: f64,
    instance: &AugIndexInstance,
    protocol: &P,
    rng: &mut Rng,
) -> Result<ProtocolRun> {
    tree.validate(class, zeta)?;
    let depth = tree.depth();
    if depth < instance.d() {
        return Err(Error::DepthMismatch {
            depth,
            d: instance.d(),
        });
    }
    let mut node = tree.descend(&instance.x).expect("depth checked");
    let leaf = loop {
        match node {
            ShatterTree::Leaf { leaf } => break *leaf,
            ShatterTree::Node { left, .. } => node = left,
        }
    };
    let alice = class.index_of(leaf)?;
    let (z, a) = match tree.descend(&instance.x[..instance.i - 1]) {
        Some(ShatterTree::Node { x, a, .. }) => (*x, *a),
        _ => unreachable!("prefix shorter than depth ends at an internal node"),
    };
    let estimate = protocol.evaluate(alice, z, rng);
    let bob_output = estimate > a;
    Ok(ProtocolRun {
        bits_sent: protocol.bits_sent(),
        estimate,
        bob_output,
        success: bob_output == instance.answer(),
    })
}

/// Every instance of length `d`: all strings, all indices.
pub fn all_instances(d: usize) -> Vec<AugIndexInstance> {
    let mut out = Vec::new();
    for mask in 0..1usize << d {
        let x: Vec<bool> = (0..d).map(|j| mask >> (d - 1 - j) & 1 == 1).collect();
        for i in 1..=d {
            out.push(AugIndexInstance { x: x.clone(), i });
        }
    }
    out
}

/// One row of a batch experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub instance: String,
    pub i: usize,
    pub bits: usize,
    pub success: bool,
}

/// Runs the reduction on every instance of length `d`, `repeats` times each,
/// run `r` of instance `k` using RNG stream `k·repeats + r` of `seed`.
pub fn run_batch<P: EvalProtocol + ?Sized>(
    class: &ConceptClass,
    tree: &ShatterTree,
    zeta: f64,
    d: usize,
    protocol: &P,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BatchRow>> {
    let mut rows = Vec::new();
    for (k, inst) in all_instances(d).iter().enumerate() {
        for r in 0..repeats {
            let mut rng = child_rng(seed, (k * repeats + r) as u64);
            let run = augindex_via_eval(class, tree, zeta, inst, protocol, &mut rng)?;
            rows.push(BatchRow {
                instance: inst.bits(),
                i: inst.i,
                bits: run.bits_sent,
                success: run.success,
            });
        }
    }
    Ok(rows)
}

/// Writes batch rows as CSV (instance, i, bits, success).
pub fn write_batch_csv<W: std::io::Write>(rows: &[BatchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Lower bound (1 − H(ε))·sfat on one-way communication for evaluating the
/// class with error ε. The same value bounds the classical and the quantum
/// cost; `quantum` only labels the call site.
pub fn cc_lower_bound(sfat_dim: usize, epsilon: f64, _quantum: bool) -> Result<f64> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            reason: "error rate must lie in [0, 1/2]",
        });
    }
    Ok((1.0 - binary_entropy(epsilon)?) * sfat_dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensions::sfat_class;
    use approx::assert_abs_diff_eq;

    #[test]
    fn baseline_bits() {
        let one = ConceptClass::constants(&[0.5], 1).unwrap();
        assert_eq!(baseline_eval_protocol(&one).bits_sent(), 0);
        let cube = ConceptClass::boolean_cube(4).unwrap();
        assert_eq!(baseline_eval_protocol(&cube).bits_sent(), 4);
        let five = ConceptClass::constants(&[0.1, 0.2, 0.3, 0.4, 0.5], 1).unwrap();
        assert_eq!(baseline_eval_protocol(&five).bits_sent(), 3);
    }

    #[test]
    fn depth_one_example() {
        let c = ConceptClass::constants(&[0.0, 1.0], 1).unwrap();
        let tree = sfat_class(&c, 0.25).unwrap().witness;
        let inst = AugIndexInstance::new(vec![true], 1).unwrap();
        let run = augindex_via_eval(
            &c,
            &tree,
            0.25,
            &inst,
            &baseline_eval_protocol(&c),
            &mut child_rng(0, 0),
        )
        .unwrap();
        assert!(run.bob_output && run.success);
        assert_eq!(run.bits_sent, 1);
    }

    #[test]
    fn exhaustive_on_cube() {
        let c = ConceptClass::boolean_cube(3).unwrap();
        let tree = sfat_class(&c, 0.25).unwrap().witness;
        let p = baseline_eval_protocol(&c);
        for d in 1..=3 {
            let rows = run_batch(&c, &tree, 0.25, d, &p, 1, 0).unwrap();
            assert_eq!(rows.len(), (1 << d) * d);
            assert!(rows.iter().all(|r| r.success && r.bits == 3));
        }
        let inst = AugIndexInstance::new(vec![true; 4], 2).unwrap();
        assert!(matches!(
            augindex_via_eval(&c, &tree, 0.25, &inst, &p, &mut child_rng(0, 0)),
            Err(Error::DepthMismatch { depth: 3, d: 4 })
        ));
    }

    #[test]
    fn lower_bound_values() {
        assert_abs_diff_eq!(cc_lower_bound(10, 0.0, false).unwrap(), 10.0);
        assert_abs_diff_eq!(cc_lower_bound(10, 0.5, true).unwrap(), 0.0);
        assert_abs_diff_eq!(cc_lower_bound(8, 0.11, false).unwrap(), 4.0007, epsilon = 1e-3);
        assert!(cc_lower_bound(1, 0.7, false).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(AugIndexInstance::new(vec![true], 0).is_err());
        assert!(AugIndexInstance::new(vec![true], 2).is_err());
        assert_eq!(all_instances(2).len(), 8);
    }

    #[test]
    fn batch_csv() {
        let c = ConceptClass::constants(&[0.0, 1.0], 1).unwrap();
        let tree = sfat_class(&c, 0.25).unwrap().witness;
        let rows = run_batch(&c, &tree, 0.25, 1, &baseline_eval_protocol(&c), 1, 0).unwrap();
        let mut out = Vec::new();
        write_batch_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("instance,i,bits,success"));
    }

    mod props {
        use super::*;
        use crate::dimensions::sfat_class;
        use proptest::prelude::*;

        fn class() -> impl Strategy<Value = ConceptClass> {
            (1usize..5, 1usize..17).prop_flat_map(|(n, k)| {
                prop::collection::vec(prop::collection::vec(0u8..=4, n), k).prop_map(|rows| {
                    ConceptClass::from_rows(
                        rows.into_iter()
                            .map(|r| r.into_iter().map(|v| v as f64 / 4.0).collect())
                            .collect(),
                    )
                    .unwrap()
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn exact_reduction_always_succeeds(c in class(), zeta in prop::sample::select(vec![0.1, 0.2, 0.25])) {
                let r = sfat_class(&c, zeta).unwrap();
                let baseline = baseline_eval_protocol(&c);
                for d in 1..=r.dimension.min(4) {
                    let rows = run_batch(&c, &r.witness, zeta, d, &baseline, 1, 0).unwrap();
                    prop_assert!(rows.iter().all(|row| row.success));
                    // the shared tree costs nothing on the wire
                    prop_assert!(rows.iter().all(|row| row.bits == baseline.bits_sent()));
                }
                let floor = cc_lower_bound(r.dimension, 0.0, false).unwrap();
                prop_assert!(baseline.bits_sent() as f64 >= floor);
            }
        }
    }
}
