//! Hermitian-matrix helpers on top of nalgebra's eigen-decomposition.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Largest allowed dimension (four qubits).
pub const MAX_DIM: usize = 16;

/// Eigenvalues at or below this count as zero in logarithms.
const LOG_FLOOR: f64 = 1e-14;

/// Largest entry of |M − M†|.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// (M + M†)/2.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// f(M) for Hermitian M, applied through the spectral decomposition.
pub fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let mut out = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = f(lam);
        out.column_mut(j).scale_mut(s);
    }
    out * eig.eigenvectors.adjoint()
}

/// log₂ with zero-eigenvalue directions mapped to 0.
pub fn log2_psd(m: &CMatrix) -> CMatrix {
    spectral_map(m, |l| if l > LOG_FLOOR { l.log2() } else { 0.0 })
}

/// Re Tr(AB) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// −Σ λ log₂ λ over a spectrum, treating tiny and negative eigenvalues as 0.
pub fn spectrum_entropy(eigs: &[f64]) -> f64 {
    -eigs
        .iter()
        .filter(|&&l| l > LOG_FLOOR)
        .map(|&l| l * l.log2())
        .sum::<f64>()
}

/// Schatten 1-norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    eigenvalues(m).iter().map(|l| l.abs()).sum()
}
