//! The robust standard optimal algorithm and its mistake-only variant.

use crate::concept::{learner_superbins, superbin_members, Concept, ConceptClass, ConceptSet, TOL};
use crate::dimensions::{sfat_empty_convention, SfatOracle};
use crate::error::{Error, Result};

/// One prediction together with the argmax data it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// Super-bin midpoints achieving the maximal sfat.
    pub maximizers: Vec<f64>,
    /// The maximal sfat (−1 when every super-bin is empty).
    pub best_dim: i32,
}

/// Learner state: the surviving set plus a per-instance sfat memo.
///
/// With accuracy `zeta` the learner bins predictions on the multiples of 2ζ,
/// scores super-bins by sfat at margin 2ζ and keeps the concepts within ζ of
/// every feedback value.
#[derive(Debug)]
pub struct Rsoa<'a> {
    oracle: SfatOracle<'a>,
    zeta: f64,
    superbins: Vec<f64>,
    surviving: ConceptSet,
}

impl<'a> Rsoa<'a> {
    pub fn new(class: &'a ConceptClass, zeta: f64) -> Result<Self> {
        let superbins = learner_superbins(zeta)?;
        Ok(Rsoa {
            oracle: SfatOracle::new(class, 2.0 * zeta)?,
            zeta,
            superbins,
            surviving: class.full_set()?,
        })
    }

    /// Learner for the mistake-only protocol at accuracy `epsilon`: bins of
    /// width 2ε/5 and an update ball of radius ε/5.
    pub fn mistake_only(class: &'a ConceptClass, epsilon: f64) -> Result<Self> {
        Rsoa::new(class, epsilon / 5.0)
    }

    pub fn with_surviving(mut self, surviving: ConceptSet) -> Self {
        self.surviving = surviving;
        self
    }

    /// Restarts from the whole class, keeping the sfat memo.
    pub fn reset(&mut self) {
        self.surviving = ConceptSet::full(self.class().len());
    }

    pub fn class(&self) -> &'a ConceptClass {
        self.oracle.class()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn superbins(&self) -> &[f64] {
        &self.superbins
    }

    pub fn surviving(&self) -> ConceptSet {
        self.surviving
    }

    /// sfat at margin 2ζ of an arbitrary subset (−1 for the empty set).
    pub fn dim(&mut self, set: ConceptSet) -> i32 {
        self.oracle.dim(set)
    }

    fn argmax(&mut self, x: usize) -> Prediction {
        let class = self.oracle.class();
        let mut best_dim = i32::MIN;
        let mut maximizers = Vec::new();
        for &r in &self.superbins {
            let bin = superbin_members(class, self.surviving, r, x, self.zeta);
            let d = if bin.is_empty() {
                sfat_empty_convention()
            } else {
                self.oracle.dim(bin)
            };
            if d > best_dim {
                best_dim = d;
                maximizers.clear();
            }
            if d == best_dim {
                maximizers.push(r);
            }
        }
        let value = maximizers.iter().sum::<f64>() / maximizers.len() as f64;
        Prediction {
            value,
            maximizers,
            best_dim,
        }
    }

    /// Prediction at `x` with its argmax data.
    pub fn predict_detail(&mut self, x: usize) -> Result<Prediction> {
        if self.surviving.is_empty() {
            return Err(Error::EmptySurvivingSet);
        }
        self.class().check_point(x)?;
        Ok(self.argmax(x))
    }

    pub fn predict(&mut self, x: usize) -> Result<f64> {
        Ok(self.predict_detail(x)?.value)
    }

    /// Prediction that stays defined after the surviving set empties (which
    /// only contract-violating feedback can cause): every super-bin then ties
    /// and the mean of all midpoints is returned.
    pub fn predict_lenient(&mut self, x: usize) -> f64 {
        self.argmax(x).value
    }

    /// Keeps the survivors strictly within ζ of `feedback` at `x`.
    pub fn update(&mut self, x: usize, feedback: f64) -> ConceptSet {
        self.surviving = update_set(self.class(), self.surviving, x, feedback, self.zeta);
        self.surviving
    }

    /// The final hypothesis: the prediction rule evaluated at every point.
    pub fn hypothesis(&mut self) -> Concept {
        let values = (0..self.class().domain_size())
            .map(|x| self.predict_lenient(x))
            .collect();
        Concept { id: 0, values }
    }

    /// Runs the learner over a labelled sample and returns its final
    /// hypothesis.
    pub fn run_sample(&mut self, sample: &[crate::concept::LabeledExample]) -> Concept {
        for ex in sample {
            self.update(ex.x, ex.y);
        }
        self.hypothesis()
    }
}

fn update_set(
    class: &ConceptClass,
    surviving: ConceptSet,
    x: usize,
    feedback: f64,
    zeta: f64,
) -> ConceptSet {
    surviving.filter(|i| (class.value(i, x) - feedback).abs() < zeta - TOL)
}

/// Stateless prediction: RSOA at accuracy `zeta` on the surviving set.
pub fn rsoa_predict(
    class: &ConceptClass,
    surviving: ConceptSet,
    x: usize,
    zeta: f64,
) -> Result<f64> {
    Rsoa::new(class, zeta)?.with_surviving(surviving).predict(x)
}

/// Stateless update: keeps the members of `surviving` strictly within `zeta`
/// of `feedback` at `x`. May return the empty set.
pub fn rsoa_update(
    class: &ConceptClass,
    surviving: ConceptSet,
    x: usize,
    feedback: f64,
    zeta: f64,
) -> Result<ConceptSet> {
    if !(0.0..=1.0).contains(&feedback) {
        return Err(Error::OutOfRange {
            name: "feedback",
            value: feedback,
            reason: "feedback must lie in [0, 1]",
        });
    }
    class.check_point(x)?;
    Ok(update_set(class, surviving, x, feedback, zeta))
}

/// Outcome of one mistake-only step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MistakeOnlyStep {
    pub prediction: f64,
    pub mistake: bool,
    pub surviving: ConceptSet,
}

/// One round of the mistake-only learner at accuracy `epsilon`: predict, and
/// only when the prediction misses `truth` by more than ε apply the update
/// with `feedback`.
pub fn rsoa_mistake_only_step(
    class: &ConceptClass,
    surviving: ConceptSet,
    x: usize,
    epsilon: f64,
    truth: f64,
    feedback: f64,
) -> Result<MistakeOnlyStep> {
    let mut learner = Rsoa::mistake_only(class, epsilon)?.with_surviving(surviving);
    let prediction = learner.predict(x)?;
    let mistake = (prediction - truth).abs() > epsilon + TOL;
    let surviving = if mistake {
        rsoa_update(class, surviving, x, feedback, epsilon / 5.0)?
    } else {
        surviving
    };
    Ok(MistakeOnlyStep {
        prediction,
        mistake,
        surviving,
    })
}
