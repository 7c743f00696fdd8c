//! Finite domains, real-valued concept classes, covers and the scalar
//! helpers every learner in the crate shares.
//!
//! Concepts are materialized tables: a concept is the vector of its values on
//! the domain points `0..domain_size`. Sets of surviving concepts are bitmasks
//! over positions in a [`ConceptClass`], which limits bitmask-based algorithms
//! to classes of at most 64 concepts.

use rand::distributions::WeightedIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used for every comparison against a ball or cover boundary.
///
/// All values handled by the crate live on rational grids with small
/// denominators, so a tie in exact arithmetic shows up as a difference well
/// below this tolerance in floating point.
pub const TOL: f64 = 1e-12;

/// Largest class size supported by [`ConceptSet`].
pub const MAX_SET_SIZE: usize = 64;

/// Returns `1/value` as an integer when it is one (within 1e-9).
pub fn integer_reciprocal(name: &'static str, value: f64) -> Result<usize> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::OutOfRange {
            name,
            value,
            reason: "must lie strictly between 0 and 1",
        });
    }
    let reciprocal = 1.0 / value;
    let rounded = reciprocal.round();
    if (reciprocal - rounded).abs() > 1e-9 {
        return Err(Error::NonIntegerReciprocal {
            param: name,
            reciprocal,
        });
    }
    Ok(rounded as usize)
}

/// A point of a finite domain, optionally tagged with a human-readable label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainPoint {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl DomainPoint {
    pub fn new(index: usize) -> Self {
        DomainPoint { index, label: None }
    }
}

/// A real-valued function on the domain, stored as its value table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: u64,
    pub values: Vec<f64>,
}

impl Concept {
    pub fn new(id: u64, values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange { id, value: bad });
        }
        Ok(Concept { id, values })
    }

    /// Concept taking the same value everywhere.
    pub fn constant(id: u64, value: f64, domain_size: usize) -> Result<Self> {
        Concept::new(id, vec![value; domain_size])
    }

    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Largest pointwise distance to `other`.
    pub fn sup_distance(&self, other: &Concept) -> Result<f64> {
        check_domain(self.values.len(), other.values.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_domain(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DomainMismatch { expected, actual });
    }
    Ok(())
}

/// Bitmask over concept positions of a class with at most 64 members.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptSet(pub u64);

impl ConceptSet {
    pub const EMPTY: ConceptSet = ConceptSet(0);

    pub fn full(n: usize) -> ConceptSet {
        debug_assert!(n <= MAX_SET_SIZE);
        if n == 64 {
            ConceptSet(u64::MAX)
        } else {
            ConceptSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> ConceptSet {
        ConceptSet(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> ConceptSet {
        ConceptSet(iter.into_iter().fold(0u64, |acc, i| acc | (1u64 << i)))
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: ConceptSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn first(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn filter(self, mut keep: impl FnMut(usize) -> bool) -> ConceptSet {
        ConceptSet::from_indices(self.iter().filter(|&i| keep(i)))
    }
}

#[derive(Deserialize)]
struct RawClass {
    domain_size: usize,
    concepts: Vec<Concept>,
}

/// A nonempty finite table of concepts over a shared domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClass")]
pub struct ConceptClass {
    domain_size: usize,
    concepts: Vec<Concept>,
}

impl TryFrom<RawClass> for ConceptClass {
    type Error = Error;

    fn try_from(raw: RawClass) -> Result<Self> {
        ConceptClass::new(raw.domain_size, raw.concepts)
    }
}

impl ConceptClass {
    pub fn new(domain_size: usize, concepts: Vec<Concept>) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::EmptyClass);
        }
        let mut seen = std::collections::HashSet::new();
        for c in &concepts {
            check_domain(domain_size, c.values.len())?;
            if let Some(&bad) = c.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::ValueOutOfRange { id: c.id, value: bad });
            }
            if !seen.insert(c.id) {
                return Err(Error::DuplicateId(c.id));
            }
        }
        Ok(ConceptClass {
            domain_size,
            concepts,
        })
    }

    /// Builds a class from value rows, numbering ids from zero.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let domain_size = rows.first().map(Vec::len).ok_or(Error::EmptyClass)?;
        let concepts = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Concept::new(i as u64, values))
            .collect::<Result<Vec<_>>>()?;
        ConceptClass::new(domain_size, concepts)
    }

    /// Class of constant functions on a domain of `domain_size` points.
    pub fn constants(values: &[f64], domain_size: usize) -> Result<Self> {
        ConceptClass::from_rows(values.iter().map(|&v| vec![v; domain_size]).collect())
    }

    /// All `2^d` Boolean functions on `d` points.
    pub fn boolean_cube(d: usize) -> Result<Self> {
        let rows = (0..1usize << d)
            .map(|mask| (0..d).map(|x| (mask >> x & 1) as f64).collect())
            .collect();
        ConceptClass::from_rows(rows)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    #[inline]
    pub fn concept(&self, index: usize) -> &Concept {
        &self.concepts[index]
    }

    #[inline]
    pub fn value(&self, index: usize, x: usize) -> f64 {
        self.concepts[index].values[x]
    }

    pub fn index_of(&self, id: u64) -> Result<usize> {
        self.concepts
            .iter()
            .position(|c| c.id == id)
            .ok_or(Error::UnknownConcept(id))
    }

    pub fn ids(&self, set: ConceptSet) -> Vec<u64> {
        set.iter().map(|i| self.concepts[i].id).collect()
    }

    /// Every concept of the class as a bitmask; fails beyond 64 concepts.
    pub fn full_set(&self) -> Result<ConceptSet> {
        if self.len() > MAX_SET_SIZE {
            return Err(Error::TooLarge(format!(
                "class has {} concepts; set-based algorithms support at most {MAX_SET_SIZE}",
                self.len()
            )));
        }
        Ok(ConceptSet::full(self.len()))
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x >= self.domain_size {
            return Err(Error::OutOfRange {
                name: "x",
                value: x as f64,
                reason: "domain point index beyond domain size",
            });
        }
        Ok(())
    }
}

/// A ζ-cover of [0,1] together with its interleaved cover.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cover {
    pub zeta: f64,
    pub bins: usize,
    /// Bin midpoints ζ/2, 3ζ/2, ..., 1 − ζ/2.
    pub bin_midpoints: Vec<f64>,
    /// Super-bin midpoints ζ, 2ζ, ..., 1 − ζ.
    pub superbin_midpoints: Vec<f64>,
}

/// Builds the ζ-cover; `1/zeta` must be an integer.
pub fn cover_new(zeta: f64) -> Result<Cover> {
    let n = integer_reciprocal("zeta", zeta)?;
    let nf = n as f64;
    Ok(Cover {
        zeta,
        bins: n,
        bin_midpoints: (0..n).map(|k| (2 * k + 1) as f64 / (2.0 * nf)).collect(),
        superbin_midpoints: (1..n).map(|k| k as f64 / nf).collect(),
    })
}

/// Super-bin midpoints used by a robust learner running at accuracy `zeta`:
/// the multiples of 2ζ strictly inside (0, 1).
///
/// When `1/(2ζ)` is an integer these are exactly the interleaved cover
/// midpoints of the 2ζ-cover.
pub fn learner_superbins(zeta: f64) -> Result<Vec<f64>> {
    if !(zeta > 0.0 && zeta < 0.5) {
        return Err(Error::OutOfRange {
            name: "zeta",
            value: zeta,
            reason: "learner accuracy must lie in (0, 1/2)",
        });
    }
    let width = 2.0 * zeta;
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let r = k as f64 * width;
        if r >= 1.0 - TOL {
            break;
        }
        out.push(r);
        k += 1;
    }
    Ok(out)
}

#[inline]
fn in_superbin(value: f64, r: f64, zeta: f64) -> bool {
    let dist = (value - r).abs();
    let radius = 2.0 * zeta;
    // the outermost super-bins are closed at the ends of [0, 1]
    dist < radius - TOL || ((value == 0.0 || value == 1.0) && dist <= radius + TOL)
}

/// Members of `subset` whose value at `x` falls in the super-bin around `r`:
/// the open ball of radius 2ζ, closed at the endpoints 0 and 1 of the range.
pub fn superbin_members(
    class: &ConceptClass,
    subset: ConceptSet,
    r: f64,
    x: usize,
    zeta: f64,
) -> ConceptSet {
    subset.filter(|i| in_superbin(class.value(i, x), r, zeta))
}

/// A labelled example `(x, y)` with `y` the (possibly noisy) label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: usize,
    pub y: f64,
}

impl LabeledExample {
    pub fn new(x: usize, y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange {
                name: "y",
                value: y,
                reason: "labels must lie in [0, 1]",
            });
        }
        Ok(LabeledExample { x, y })
    }
}

#[derive(Deserialize)]
struct RawDistribution {
    p: Vec<f64>,
}

/// A probability vector over the domain points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct Distribution {
    p: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Distribution::new(raw.p)
    }
}

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("no points".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("negative mass {bad}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Distribution { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("no points".into()));
        }
        Ok(Distribution {
            p: vec![1.0 / n as f64; n],
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.p).expect("validated distribution has positive mass")
    }
}

/// Probability mass of `{x : |h(x) − c(x)| > r}` under `dist`.
pub fn loss(h: &Concept, c: &Concept, r: f64, dist: &Distribution) -> Result<f64> {
    check_domain(h.values.len(), c.values.len())?;
    check_domain(h.values.len(), dist.len())?;
    Ok(h.values
        .iter()
        .zip(&c.values)
        .zip(dist.probabilities())
        .filter(|((a, b), _)| (*a - *b).abs() > r + TOL)
        .fold(0.0, |acc, (_, p)| acc + p))
}

/// Positions in `pool` of the functions strictly within `r` of `center` at
/// every domain point.
pub fn function_ball(center: &Concept, r: f64, pool: &[Concept]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, f) in pool.iter().enumerate() {
        if in_function_ball(center, r, f)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Whether `f` lies in the function ball of radius `r` around `center`.
pub fn in_function_ball(center: &Concept, r: f64, f: &Concept) -> Result<bool> {
    Ok(center.sup_distance(f)? < r - TOL)
}

/// Base-2 binary entropy, with H(0) = H(1) = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            reason: "binary entropy needs a probability",
        });
    }
    Ok(-xlog2x(p) - xlog2x(1.0 - p))
}

#[inline]
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Rounds `y` to the nearest bin midpoint of the `step`-cover; ties go to the
/// lower midpoint.
pub fn round_to_grid(y: f64, step: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            reason: "only values in [0, 1] can be rounded to the grid",
        });
    }
    let n = integer_reciprocal("step", step)?;
    let nf = n as f64;
    let midpoint = |j: usize| (2 * j + 1) as f64 / (2.0 * nf);
    let lower = ((y * nf - 0.5).floor().max(0.0) as usize).min(n - 1);
    let upper = (lower + 1).min(n - 1);
    let (dl, du) = ((y - midpoint(lower)).abs(), (y - midpoint(upper)).abs());
    Ok(if du < dl - TOL {
        midpoint(upper)
    } else {
        midpoint(lower)
    })
}
