//! Density matrices, two-outcome measurements, ensembles and the concept
//! class f_ρ(E) = Tr(Eρ) they induce.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{eigenvalues, hermitian_defect, symmetrize, trace_product, CMatrix, C64, MAX_DIM};
use crate::concept::ConceptClass;
use crate::error::{Error, Result};
use crate::rng::Rng;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const WEIGHT_TOL: f64 = 1e-12;

/// JSON form shared by states and measurements.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    fn to_matrix(&self) -> Result<CMatrix> {
        let d = self.dim;
        let square = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !square(&self.re) || !square(&self.im) {
            return Err(Error::InvalidQuantum(format!("entries are not {d}x{d}")));
        }
        Ok(CMatrix::from_fn(d, d, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }

    fn from_matrix(m: &CMatrix) -> Self {
        let d = m.nrows();
        MatrixJson {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM || !d.is_power_of_two() {
        return Err(Error::InvalidQuantum(format!(
            "dimension {d} is not a power of two in 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

fn hermitian(m: &CMatrix, what: &str) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::InvalidQuantum(format!("{what} is not square")));
    }
    check_dim(m.nrows())?;
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidQuantum(format!(
            "{what} is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(symmetrize(m))
}

/// A quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let matrix = hermitian(&matrix, "density matrix")?;
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidQuantum(format!("trace is {tr}, not 1")));
        }
        let min = eigenvalues(&matrix)[0];
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(DensityMatrix { matrix })
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) amplitude vector.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        DensityMatrix::new(projector(amplitudes)?)
    }

    /// I/d.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        DensityMatrix::new(CMatrix::identity(dim, dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(&self.matrix)
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;
    fn try_from(raw: MatrixJson) -> Result<Self> {
        DensityMatrix::new(raw.to_matrix()?)
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        MatrixJson::from_matrix(&rho.matrix)
    }
}

/// Effect operator E of a two-outcome measurement, 0 ⪯ E ⪯ I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Measurement {
    effect: CMatrix,
}

impl Measurement {
    pub fn new(effect: CMatrix) -> Result<Self> {
        let effect = hermitian(&effect, "effect")?;
        let eigs = eigenvalues(&effect);
        let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
        if lo < -PSD_TOL {
            return Err(Error::NotPsd(lo));
        }
        if hi > 1.0 + PSD_TOL {
            return Err(Error::InvalidQuantum(format!(
                "effect eigenvalue {hi} exceeds 1"
            )));
        }
        Ok(Measurement { effect })
    }

    /// Projector onto the span of one vector.
    pub fn rank_one(v: &[C64]) -> Result<Self> {
        Measurement::new(projector(v)?)
    }

    pub fn dim(&self) -> usize {
        self.effect.nrows()
    }

    pub fn effect(&self) -> &CMatrix {
        &self.effect
    }
}

impl TryFrom<MatrixJson> for Measurement {
    type Error = Error;
    fn try_from(raw: MatrixJson) -> Result<Self> {
        Measurement::new(raw.to_matrix()?)
    }
}

impl From<Measurement> for MatrixJson {
    fn from(m: Measurement) -> Self {
        MatrixJson::from_matrix(&m.effect)
    }
}

fn projector(v: &[C64]) -> Result<CMatrix> {
    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::InvalidQuantum("zero vector".into()));
    }
    let d = v.len();
    Ok(CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / norm2))
}

/// A finite ensemble {p_i, ρ_i}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub states: Vec<DensityMatrix>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(states: Vec<DensityMatrix>, weights: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidQuantum("empty ensemble".into()));
        }
        if states.len() != weights.len() {
            return Err(Error::DimMismatch(format!(
                "{} states but {} weights",
                states.len(),
                weights.len()
            )));
        }
        same_dims(&states)?;
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidDistribution("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Ensemble { states, weights })
    }

    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let n = states.len().max(1);
        Ensemble::new(states, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The average state Σ p_i ρ_i.
    pub fn mixture(&self) -> CMatrix {
        mixture(&self.states, &self.weights)
    }
}

pub(crate) fn mixture(states: &[DensityMatrix], weights: &[f64]) -> CMatrix {
    let d = states[0].dim();
    let mut m = CMatrix::zeros(d, d);
    for (s, &w) in states.iter().zip(weights) {
        m += s.matrix().scale(w);
    }
    m
}

pub(crate) fn same_dims(states: &[DensityMatrix]) -> Result<usize> {
    let d = states.first().map(DensityMatrix::dim).unwrap_or(0);
    if let Some(s) = states.iter().find(|s| s.dim() != d) {
        return Err(Error::DimMismatch(format!("dimension {} vs {d}", s.dim())));
    }
    Ok(d)
}

/// Tr(Eρ), clamped into [0, 1].
pub fn expectation(rho: &DensityMatrix, e: &Measurement) -> Result<f64> {
    if rho.dim() != e.dim() {
        return Err(Error::DimMismatch(format!(
            "state has dimension {} but measurement {}",
            rho.dim(),
            e.dim()
        )));
    }
    let v = trace_product(e.effect(), rho.matrix());
    if !(-1e-9..=1.0 + 1e-9).contains(&v) {
        return Err(Error::InvalidQuantum(format!("expectation {v} outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// The class {f_ρ} on the listed measurements: concept i is state i, point j
/// is measurement j.
pub fn materialize_concept_class(
    states: &[DensityMatrix],
    measurements: &[Measurement],
) -> Result<ConceptClass> {
    if states.is_empty() {
        return Err(Error::EmptyClass);
    }
    if measurements.is_empty() {
        return Err(Error::InvalidQuantum("no measurements".into()));
    }
    let rows = states
        .iter()
        .map(|s| measurements.iter().map(|e| expectation(s, e)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ConceptClass::from_rows(rows)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Computational basis projectors |k⟩⟨k|.
pub fn basis_measurements(dim: usize) -> Result<Vec<Measurement>> {
    check_dim(dim)?;
    (0..dim)
        .map(|k| {
            let v: Vec<C64> = (0..dim).map(|i| c(if i == k { 1.0 } else { 0.0 }, 0.0)).collect();
            Measurement::rank_one(&v)
        })
        .collect()
}

/// The "+" eigenprojectors of X, Y and Z on one qubit.
pub fn pauli_eigenprojectors() -> Vec<Measurement> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [c(h, 0.), c(h, 0.)],
        [c(h, 0.), c(0., h)],
        [c(1., 0.), c(0., 0.)],
    ]
    .iter()
    .map(|v| Measurement::rank_one(v).expect("unit vectors"))
    .collect()
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random state of the given rank: G G†/Tr for a complex Gaussian d×rank G.
pub fn random_density_matrix(dim: usize, rank: usize, rng: &mut Rng) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if rank == 0 || rank > dim {
        return Err(Error::OutOfRange {
            name: "rank",
            value: rank as f64,
            reason: "rank must lie in 1..=dim",
        });
    }
    let g = gaussian_matrix(dim, rank, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr))
}

/// Random pure state, uniform under the unitary group.
pub fn random_pure_state(dim: usize, rng: &mut Rng) -> Result<DensityMatrix> {
    random_density_matrix(dim, 1, rng)
}

/// The d rank-one projectors of a Haar-random orthonormal basis.
pub fn random_basis_measurements(dim: usize, rng: &mut Rng) -> Result<Vec<Measurement>> {
    check_dim(dim)?;
    let q = gaussian_matrix(dim, dim, rng).qr().q();
    (0..dim)
        .map(|j| Measurement::rank_one(q.column(j).as_slice()))
        .collect()
}
