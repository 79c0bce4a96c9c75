//! Small dense helpers on top of nalgebra for Hermitian matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `(X + X^H) / 2`.
pub fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()).scale(0.5)
}

/// Largest absolute entry of `X - X^H`.
pub fn hermitian_defect(x: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Real trace of a Hermitian matrix.
pub fn real_trace(x: &CMatrix) -> f64 {
    x.diagonal().iter().map(|z| z.re).sum()
}

/// `tr(A B)` for Hermitian `A`, `B`, computed without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

/// `v^H A v` for Hermitian `A`.
pub fn quadratic_form(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(x: &CMatrix) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(x)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetrizes `x` and clips negative eigenvalues at zero.
pub fn psd_repair(x: &CMatrix) -> CMatrix {
    let h = hermitian_part(x);
    if h.nrows() == 0 {
        return h;
    }
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return h;
    }
    let clipped = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0), 0.0));
    let u = &eig.eigenvectors;
    hermitian_part(&(u * CMatrix::from_diagonal(&clipped) * u.adjoint()))
}

/// Hermitian square root `X^{1/2}` via eigendecomposition, so exactly
/// singular (e.g. zero) matrices are supported.
pub fn hermitian_sqrt(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    if n == 0 {
        return x.clone();
    }
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return CMatrix::zeros(n, n);
    }
    let eig = hermitian_part(x).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    let u = &eig.eigenvectors;
    u * CMatrix::from_diagonal(&roots) * u.adjoint()
}
