//! Complex Hermitian matrix variables through the real embedding
//! `X ↦ [[Re X, −Im X], [Im X, Re X]]`.
//!
//! An `n × n` block stores `n²` reals: the upper triangle of `Re X`
//! (diagonal included) followed by the strict upper triangle of `Im X`.

use nalgebra::DMatrix;

use super::{triangle_index, ConeConstraint, ConicProblem, LinExpr};
use crate::linalg::{hermitian_part, CMat, C64};

/// Trace of the real embedding divided by the complex trace.
pub const REAL_TRACE_FACTOR: f64 = 2.0;

pub fn embed_hermitian(m: &CMat) -> DMatrix<f64> {
    let h = hermitian_part(m);
    let n = h.nrows();
    let mut y = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            y[(i, j)] = z.re;
            y[(i, n + j)] = -z.im;
            y[(n + i, j)] = z.im;
            y[(n + i, n + j)] = z.re;
        }
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianBlock {
    pub n: usize,
    pub start: usize,
}

impl HermitianBlock {
    pub fn alloc(p: &mut ConicProblem, name: &str, n: usize) -> Self {
        let start = p.add_vars(name, n * n);
        p.blocks.last_mut().expect("block just added").trace_factor = Some(REAL_TRACE_FACTOR);
        Self { n, start }
    }

    pub fn n_vars(&self) -> usize {
        self.n * self.n
    }

    fn re_var(&self, i: usize, j: usize) -> usize {
        self.start + triangle_index(i.min(j), i.max(j))
    }

    fn im_var(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        self.start + self.n * (self.n + 1) / 2 + j * (j - 1) / 2 + i
    }

    pub fn re(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::var(self.re_var(i, j))
    }

    /// `Im X_ij`, using `Im X_ji = −Im X_ij`.
    pub fn im(&self, i: usize, j: usize) -> LinExpr {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => LinExpr::var(self.im_var(i, j)),
            std::cmp::Ordering::Greater => LinExpr::term(self.im_var(j, i), -1.0),
            std::cmp::Ordering::Equal => LinExpr::default(),
        }
    }

    pub fn diag(&self, k: usize) -> LinExpr {
        self.re(k, k)
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::default();
        for k in 0..self.n {
            e = e.add_term(self.re_var(k, k), 1.0);
        }
        e
    }

    /// `tr(B X)` for Hermitian `B` (symmetrised first).
    ///
    /// Equals `Σ B_ii X_ii + 2 Σ_{i<j} (Re B_ij Re X_ij + Im B_ij Im X_ij)`.
    pub fn linear_functional(&self, b: &CMat) -> LinExpr {
        let b = hermitian_part(b);
        let mut e = LinExpr::default();
        for j in 0..self.n {
            e = e.add_term(self.re_var(j, j), b[(j, j)].re);
            for i in 0..j {
                let z = b[(i, j)];
                e = e.add_term(self.re_var(i, j), 2.0 * z.re);
                e = e.add_term(self.im_var(i, j), 2.0 * z.im);
            }
        }
        e
    }

    /// Entry `(r, c)` of the real embedding.
    pub fn embedded_entry(&self, r: usize, c: usize) -> LinExpr {
        let n = self.n;
        match (r < n, c < n) {
            (true, true) => self.re(r, c),
            (true, false) => self.im(r, c - n).scaled(-1.0),
            (false, true) => self.im(r - n, c),
            (false, false) => self.re(r - n, c - n),
        }
    }

    /// `X ⪰ 0`, as PSD-ness of the `2n × 2n` embedding.
    pub fn psd_constraint(&self) -> ConeConstraint {
        ConeConstraint::psd(2 * self.n, |r, c| self.embedded_entry(r, c))
    }

    pub fn recover(&self, x: &[f64]) -> CMat {
        let n = self.n;
        CMat::from_fn(n, n, |i, j| {
            C64::new(self.re(i, j).eval(x), self.im(i, j).eval(x))
        })
    }

    /// Writes `m` into the variable slice (used for initial points and tests).
    pub fn store(&self, m: &CMat, x: &mut [f64]) {
        let h = hermitian_part(m);
        for j in 0..self.n {
            for i in 0..=j {
                x[self.re_var(i, j)] = h[(i, j)].re;
                if i < j {
                    x[self.im_var(i, j)] = h[(i, j)].im;
                }
            }
        }
    }
}
