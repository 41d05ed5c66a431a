//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// `x^H y`.
pub fn inner(x: &CVec, y: &CVec) -> C64 {
    x.dotc(y)
}

pub fn norm_sq(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// `x^H M x`, real part only (M is assumed Hermitian).
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    x.dotc(&(m * x)).re
}

/// `x x^H`.
pub fn outer(x: &CVec) -> CMat {
    x * x.adjoint()
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves `M x = b` for Hermitian positive definite `M`.
pub fn solve_hpd(m: &CMat, b: &CVec) -> Result<CVec> {
    let chol = Cholesky::new(hermitian_part(m))
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn real_symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
///
/// Ties resolve to the eigenvector the sort places last among equal values,
/// which is deterministic for a given input. The returned vector's largest
/// entry is rotated onto the positive real axis.
pub fn dominant_eigenpair(m: &CMat) -> (f64, CVec) {
    let (values, vectors) = hermitian_eigen(m);
    let n = values.len();
    let mut v: CVec = vectors.column(n - 1).into_owned();
    normalize_phase(&mut v);
    (values[n - 1], v)
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
pub fn normalize_phase(v: &mut CVec) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 + 1e-14 { (i, z.norm()) } else { best })
        .0;
    let p = v[pivot];
    if p.norm() > 0.0 {
        let rot = p.conj() / p.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Nuclear norm minus spectral norm of a Hermitian PSD matrix.
///
/// Computed as the sum of all but the largest eigenvalue, clamped at zero,
/// which avoids the cancellation of `trace - lambda_max`.
pub fn rank_one_residual(m: &CMat) -> f64 {
    let (values, _) = hermitian_eigen(m);
    values[..values.len().saturating_sub(1)].iter().map(|v| v.max(0.0)).sum()
}
