//! Conic programs over a real variable vector.
//!
//! A [`ConicProblem`] minimizes `c^T x` subject to a list of constraints of
//! the form `A x + b ∈ K`, where `K` is a zero, nonnegative, second-order,
//! 3-D power or PSD cone. Problems are solved by the Clarabel interior-point
//! solver; [`verify`] re-checks cone membership without touching the solver.
//!
//! PSD constraints are written in scaled triangular form: the upper triangle
//! of the symmetric matrix in column-major order, off-diagonal entries
//! multiplied by √2 so that the inner product is preserved.

mod cbf;
mod hermitian;

pub use cbf::write_cbf;
pub use hermitian::{embed_hermitian, HermitianBlock, REAL_TRACE_FACTOR};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::real_symmetric_eigenvalues;

/// Affine function `Σ a_k x_{i_k} + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(i: usize, a: f64) -> Self {
        Self { terms: vec![(i, a)], constant: 0.0 }
    }

    pub fn add_term(mut self, i: usize, a: f64) -> Self {
        self.terms.push((i, a));
        self
    }

    pub fn add_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cone {
    Zero,
    Nonnegative,
    /// `(t, z)` with `t ≥ ‖z‖`.
    SecondOrder,
    /// `(x, y, z)` with `x^α y^{1−α} ≥ |z|`, `x, y ≥ 0`.
    Power3 { alpha: f64 },
    /// Scaled upper triangle of a `dim × dim` PSD matrix.
    Psd { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<LinExpr>,
}

/// Position of `(r, c)`, `r ≤ c`, in the scaled triangle.
pub fn triangle_index(r: usize, c: usize) -> usize {
    debug_assert!(r <= c);
    c * (c + 1) / 2 + r
}

impl ConeConstraint {
    pub fn zero(rows: Vec<LinExpr>) -> Self {
        Self { cone: Cone::Zero, rows }
    }

    pub fn nonnegative(rows: Vec<LinExpr>) -> Self {
        Self { cone: Cone::Nonnegative, rows }
    }

    /// `t ≥ ‖z‖`.
    pub fn second_order(t: LinExpr, z: Vec<LinExpr>) -> Self {
        let mut rows = vec![t];
        rows.extend(z);
        Self { cone: Cone::SecondOrder, rows }
    }

    /// `‖z‖² ≤ s`, as `‖(2z, s − 1)‖ ≤ s + 1`.
    pub fn squared_norm_bound(z: Vec<LinExpr>, s: LinExpr) -> Self {
        let head = s.clone().add_constant(1.0);
        let mut tail: Vec<LinExpr> = z.into_iter().map(|e| e.scaled(2.0)).collect();
        tail.push(s.add_constant(-1.0));
        Self::second_order(head, tail)
    }

    pub fn power3(x: LinExpr, y: LinExpr, z: LinExpr, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "power-cone exponent must lie in (0, 1)");
        Self { cone: Cone::Power3 { alpha }, rows: vec![x, y, z] }
    }

    /// PSD constraint on the symmetric matrix whose upper-triangle entry
    /// `(r, c)` is `entry(r, c)`.
    pub fn psd(dim: usize, mut entry: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut rows = Vec::with_capacity(dim * (dim + 1) / 2);
        for c in 0..dim {
            for r in 0..=c {
                let e = entry(r, c);
                rows.push(if r == c { e } else { e.scaled(sqrt2) });
            }
        }
        Self { cone: Cone::Psd { dim }, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `t ≥ c r³` and `r ≥ 0`, through the power cone on `(t/c, 1, r)`.
pub fn cubic_power_constraint(r: LinExpr, t: LinExpr, c: f64) -> [ConeConstraint; 2] {
    assert!(c > 0.0, "cubic coefficient must be positive");
    [
        ConeConstraint::power3(t.scaled(1.0 / c), LinExpr::constant(1.0), r.clone(), 1.0 / 3.0),
        ConeConstraint::nonnegative(vec![r]),
    ]
}

/// Named slice of the variable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
    /// Multiplier that maps the block's real trace back to the complex model
    /// quantity, when the block is a Hermitian embedding.
    pub trace_factor: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<ConeConstraint>,
    pub blocks: Vec<VarBlock>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends `len` variables with zero objective weight; returns the first index.
    pub fn add_vars(&mut self, name: &str, len: usize) -> usize {
        let start = self.objective.len();
        self.objective.resize(start + len, 0.0);
        self.blocks.push(VarBlock { name: name.to_owned(), start, len, trace_factor: None });
        start
    }

    pub fn add_var(&mut self, name: &str) -> usize {
        self.add_vars(name, 1)
    }

    pub fn add(&mut self, c: ConeConstraint) {
        self.constraints.push(c);
    }

    pub fn add_all(&mut self, cs: impl IntoIterator<Item = ConeConstraint>) {
        self.constraints.extend(cs);
    }

    /// Adds the linear part of `e` to the objective.
    pub fn minimize_term(&mut self, e: &LinExpr) {
        for &(i, a) in &e.terms {
            self.objective[i] += a;
        }
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.iter().map(ConeConstraint::len).sum()
    }

    fn check(&self) {
        let n = self.n_vars();
        for c in &self.constraints {
            for row in &c.rows {
                assert!(row.terms.iter().all(|&(i, _)| i < n), "constraint references unknown variable");
            }
            let expected = match c.cone {
                Cone::Zero | Cone::Nonnegative => None,
                Cone::SecondOrder => None,
                Cone::Power3 { .. } => Some(3),
                Cone::Psd { dim } => Some(dim * (dim + 1) / 2),
            };
            if let Some(len) = expected {
                assert_eq!(c.rows.len(), len, "cone rows do not match cone dimension");
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped early or at reduced accuracy; the iterate may still be usable.
    NumericalLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    /// Relative duality gap.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers, one per constraint row, in the dual cone.
    pub dual: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: u32,
    pub objective: f64,
    /// Backend status text, for diagnostics.
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 200 }
    }
}

pub fn solve(p: &ConicProblem) -> ConicSolution {
    solve_with(p, &SolverSettings::default())
}

pub fn solve_with(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    p.check();
    let n = p.n_vars();
    let m = p.n_rows();
    let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::with_capacity(m);
    let mut cones = Vec::with_capacity(p.constraints.len());
    let mut row = 0;
    for c in &p.constraints {
        for e in &c.rows {
            for &(j, a) in &e.terms {
                // Clarabel's slack is s = b − A x, ours is G x + h.
                ri.push(row);
                ci.push(j);
                vals.push(-a);
            }
            b.push(e.constant);
            row += 1;
        }
        cones.push(match c.cone {
            Cone::Zero => SupportedConeT::ZeroConeT(c.len()),
            Cone::Nonnegative => SupportedConeT::NonnegativeConeT(c.len()),
            Cone::SecondOrder => SupportedConeT::SecondOrderConeT(c.len()),
            Cone::Power3 { alpha } => SupportedConeT::PowerConeT(alpha),
            Cone::Psd { dim } => SupportedConeT::PSDTriangleConeT(dim),
        });
    }
    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vals);
    let pmat = CscMatrix::zeros((n, n));
    let opts = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(settings.tol_feas)
        .tol_gap_abs(settings.tol_gap)
        .tol_gap_rel(settings.tol_gap)
        .max_iter(settings.max_iter)
        .max_threads(1)
        .chordal_decomposition_enable(false)
        .build()
        .expect("static solver settings are valid");
    let mut solver = match DefaultSolver::new(&pmat, &p.objective, &a, &b, &cones, opts) {
        Ok(s) => s,
        Err(_) => {
            return ConicSolution {
                status: SolveStatus::NumericalLimit,
                x: vec![0.0; n],
                dual: vec![0.0; m],
                residuals: Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY },
                iterations: 0,
                objective: f64::NAN,
                detail: "setup failed".into(),
            }
        }
    };
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalLimit,
    };
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
    ConicSolution {
        status,
        x: sol.x.clone(),
        dual: sol.z.clone(),
        residuals: Residuals { primal: sol.r_prim, dual: sol.r_dual, gap },
        iterations: sol.iterations,
        objective: sol.obj_val,
        detail: format!("{:?}", sol.status),
    }
}

/// Worst cone-membership violation of `x`, computed independently of the solver.
///
/// Zero and nonnegative rows report `|g|` and `max(−g, 0)`; second-order and
/// power cones the amount by which the inequality fails; PSD blocks the
/// negated smallest eigenvalue.
pub fn verify(p: &ConicProblem, x: &[f64]) -> f64 {
    p.constraints.iter().map(|c| constraint_violation(c, x)).fold(0.0, f64::max)
}

pub fn constraint_violation(c: &ConeConstraint, x: &[f64]) -> f64 {
    let v: Vec<f64> = c.rows.iter().map(|e| e.eval(x)).collect();
    match c.cone {
        Cone::Zero => v.iter().map(|g| g.abs()).fold(0.0, f64::max),
        Cone::Nonnegative => v.iter().map(|g| (-g).max(0.0)).fold(0.0, f64::max),
        Cone::SecondOrder => {
            let tail = v[1..].iter().map(|g| g * g).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0)
        }
        Cone::Power3 { alpha } => {
            let (a, b, z) = (v[0], v[1], v[2]);
            let neg = (-a).max(0.0).max((-b).max(0.0));
            let lhs = a.max(0.0).powf(alpha) * b.max(0.0).powf(1.0 - alpha);
            neg.max((z.abs() - lhs).max(0.0))
        }
        Cone::Psd { dim } => {
            let m = unpack_triangle(dim, &v);
            let min = real_symmetric_eigenvalues(&m).first().copied().unwrap_or(0.0);
            (-min).max(0.0)
        }
    }
}

/// Symmetric matrix from its scaled upper triangle.
pub fn unpack_triangle(dim: usize, v: &[f64]) -> DMatrix<f64> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        for r in 0..=c {
            let val = v[triangle_index(r, c)];
            if r == c {
                m[(r, c)] = val;
            } else {
                m[(r, c)] = val * inv;
                m[(c, r)] = val * inv;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::seeded_rng;
    use rand::Rng;

    #[test]
    fn scalar_lower_bound() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x");
        p.objective[x] = 1.0;
        p.add(ConeConstraint::nonnegative(vec![LinExpr::var(x).add_constant(-3.0)]));
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[x] - 3.0).abs() < 1e-7);
        assert!(verify(&p, &s.x) < 1e-7);
    }

    #[test]
    fn unit_diagonal_sdp() {
        // min tr X, X ⪰ 0, diag X = 1.
        let mut p = ConicProblem::new();
        let x0 = p.add_vars("X", 3);
        let idx = |r: usize, c: usize| x0 + triangle_index(r, c);
        p.objective[idx(0, 0)] = 1.0;
        p.objective[idx(1, 1)] = 1.0;
        p.add(ConeConstraint::psd(2, |r, c| LinExpr::var(idx(r, c))));
        p.add(ConeConstraint::zero(vec![
            LinExpr::var(idx(0, 0)).add_constant(-1.0),
            LinExpr::var(idx(1, 1)).add_constant(-1.0),
        ]));
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-7);
        assert!(verify(&p, &s.x) < 1e-7);
    }

    #[test]
    fn cubic_cone_minimum() {
        // min t s.t. t ≥ 8 r³, r = 0.5 → t = 1.
        let mut p = ConicProblem::new();
        let r = p.add_var("r");
        let t = p.add_var("t");
        p.objective[t] = 1.0;
        p.add_all(cubic_power_constraint(LinExpr::var(r), LinExpr::var(t), 8.0));
        p.add(ConeConstraint::zero(vec![LinExpr::var(r).add_constant(-0.5)]));
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[t] - 1.0).abs() < 1e-6, "{}", s.x[t]);
    }

    #[test]
    fn cubic_cone_membership() {
        let [pow, nonneg] = cubic_power_constraint(LinExpr::var(0), LinExpr::var(1), 1.0);
        let viol = |r: f64, t: f64| constraint_violation(&pow, &[r, t]).max(constraint_violation(&nonneg, &[r, t]));
        assert_eq!(viol(1.0, 1.0), 0.0);
        assert!(viol(1.0, 0.9) > 0.0);
        assert_eq!(viol(0.0, 0.0), 0.0);
        assert_eq!(viol(0.0, 5.0), 0.0);
        assert!(viol(-0.5, 5.0) > 0.0);
    }

    #[test]
    fn squared_norm_bound_is_tight() {
        let c = ConeConstraint::squared_norm_bound(vec![LinExpr::var(0), LinExpr::var(1)], LinExpr::var(2));
        assert!(constraint_violation(&c, &[3.0, 4.0, 25.0]) < 1e-12);
        assert!(constraint_violation(&c, &[3.0, 4.0, 24.9]) > 0.0);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x");
        p.add(ConeConstraint::nonnegative(vec![
            LinExpr::var(x).add_constant(-1.0),
            LinExpr::term(x, -1.0),
        ]));
        assert_eq!(solve(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x");
        p.objective[x] = -1.0;
        p.add(ConeConstraint::nonnegative(vec![LinExpr::var(x)]));
        assert_eq!(solve(&p).status, SolveStatus::Unbounded);
    }

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        (&a + a.transpose()) * 0.5
    }

    fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5).qr().q()
    }

    #[test]
    fn sdp_from_planted_primal_dual_pair() {
        // Plant X* = Q diag(d, 0) Q^T and S* = Q diag(0, e) Q^T, which are
        // complementary, then choose C = Σ y_i A_i + S* and b_i = <A_i, X*>.
        // (X*, y, S*) satisfies the KKT system, so X* is optimal with value b^T y.
        let mut rng = seeded_rng(11);
        let n = 4;
        let rank = 2;
        let n_eq = 5;
        let q = random_orthogonal(n, &mut rng);
        let mut dx = DMatrix::zeros(n, n);
        let mut ds = DMatrix::zeros(n, n);
        for k in 0..n {
            if k < rank {
                dx[(k, k)] = 0.5 + rng.random::<f64>();
            } else {
                ds[(k, k)] = 0.5 + rng.random::<f64>();
            }
        }
        let x_star = &q * dx * q.transpose();
        let s_star = &q * ds * q.transpose();
        let a: Vec<DMatrix<f64>> = (0..n_eq).map(|_| random_symmetric(n, &mut rng)).collect();
        let y: Vec<f64> = (0..n_eq).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut c = s_star.clone();
        for (ai, yi) in a.iter().zip(&y) {
            c += ai * *yi;
        }
        let inner = |m: &DMatrix<f64>, x: &DMatrix<f64>| m.component_mul(x).sum();
        let b: Vec<f64> = a.iter().map(|ai| inner(ai, &x_star)).collect();
        let dual_value: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();

        let mut p = ConicProblem::new();
        let x0 = p.add_vars("X", n * (n + 1) / 2);
        let idx = |r: usize, c: usize| x0 + triangle_index(r.min(c), r.max(c));
        // <M, X> over the upper triangle: diagonal once, off-diagonal twice.
        let functional = |m: &DMatrix<f64>| {
            let mut e = LinExpr::default();
            for cc in 0..n {
                for r in 0..=cc {
                    let w = if r == cc { 1.0 } else { 2.0 };
                    e = e.add_term(idx(r, cc), w * m[(r, cc)]);
                }
            }
            e
        };
        for (i, coef) in functional(&c).terms {
            p.objective[i] += coef;
        }
        p.add(ConeConstraint::psd(n, |r, cc| LinExpr::var(idx(r, cc))));
        p.add(ConeConstraint::zero(
            a.iter().zip(&b).map(|(ai, bi)| functional(ai).add_constant(-bi)).collect(),
        ));
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - dual_value).abs() <= 1e-7 * dual_value.abs().max(1.0));
        let mut x = DMatrix::zeros(n, n);
        for cc in 0..n {
            for r in 0..n {
                x[(r, cc)] = s.x[idx(r, cc)];
            }
        }
        // Complementarity with the planted dual slack.
        assert!(inner(&x, &s_star).abs() < 1e-7);
        assert!((x - x_star).norm() < 1e-3);
        assert!(verify(&p, &s.x) < 1e-7);
    }

    #[test]
    fn triangle_round_trip() {
        let mut rng = seeded_rng(3);
        let m = random_symmetric(5, &mut rng);
        let c = ConeConstraint::psd(5, |r, cc| LinExpr::constant(m[(r, cc)]));
        let v: Vec<f64> = c.rows.iter().map(|e| e.constant).collect();
        assert!((unpack_triangle(5, &v) - m).norm() < 1e-14);
    }
}
