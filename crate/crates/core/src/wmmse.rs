//! Beamformer and rate design for a fixed surface configuration.
//!
//! The sensing constraint is replaced by the capacity of an equivalent
//! point-to-point link, and both that capacity and each robot's uplink
//! rate are lower-bounded by their weighted-MSE forms. For fixed receivers
//! and weights the bounds are concave quadratics in `w`, so the
//! rate/power step is a conic program. Receivers and weights then have
//! closed-form updates.
//!
//! After every conic step the sensing beam is rescaled to the smallest
//! power that still meets the sensing threshold, and the rest of the
//! budget goes to the compute rates by exact water-filling on the true link
//! capacities. The step direction is then extrapolated while this true
//! objective keeps improving, and a few quasi-Newton steps on the beam
//! direction follow. None of these moves leaves the feasible set or lowers
//! the objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::conic::{
    cubic_power_constraint, solve, verify, ConeConstraint, ConicProblem, LinExpr, SolveStatus,
};
use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenpair, inner, norm_sq, solve_hpd, CVec, C64};
use crate::metrics::{
    compute_rate_for_power, link_capacity, max_sensing_sinr, max_uplink_sinr, mse_dr, mse_rad,
    CovarianceBundle,
};
use crate::model::{effective_uplink_channels, BeamformerSet, ChannelSet, RateAllocation, StarCoefficients};

/// Whether the sensing constraint is part of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    Required,
    /// No sensing: `w = 0` and the whole budget goes to computation.
    Off,
}

/// Fraction of the budget given to the initial sensing beam.
pub const W_INIT_POWER_FRACTION: f64 = 0.9;

/// Accepted cone violation of a reduced-accuracy solve, in scaled units.
const VERIFY_TOL: f64 = 1e-7;

/// `√(0.9 P_b)` times the dominant right singular vector of `A_0`.
pub fn default_w_init(ch: &ChannelSet, cfg: &SystemConfig) -> CVec {
    let gram = ch.a_target.adjoint() * &ch.a_target;
    let (_, v) = dominant_eigenpair(&gram);
    v * C64::from((W_INIT_POWER_FRACTION * cfg.p_bs_watt).sqrt())
}

/// MMSE receivers `u = R_1^{-1} A_0 w` and `u_l = √P_u R_2^{-1} g_l`.
pub fn mmse_receivers(
    w: &CVec,
    gains: &[CVec],
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(CVec, Vec<CVec>)> {
    let cov = CovarianceBundle::build(w, gains, ch, cfg);
    let u = solve_hpd(&cov.r_equiv, &(&ch.a_target * w))?;
    let scale = C64::from(cfg.p_dr_watt.sqrt());
    let u_dr = gains
        .iter()
        .map(|g| solve_hpd(&cov.r_total_rx, g).map(|x| x * scale))
        .collect::<Result<Vec<_>>>()?;
    Ok((u, u_dr))
}

/// `λ = 1/e_rad`, `λ_l = 1/e_l`.
pub fn auxiliary_weights(e_rad: f64, e_dr: &[f64]) -> Result<(f64, Vec<f64>)> {
    let inv = |e: f64| {
        if e > 0.0 && e.is_finite() {
            Ok(1.0 / e)
        } else {
            Err(Error::Numerical(format!("mean-square error must be positive, got {e}")))
        }
    };
    Ok((inv(e_rad)?, e_dr.iter().map(|&e| inv(e)).collect::<Result<_>>()?))
}

/// `η = ln λ − λ e + 1`.
pub fn weighted_mse_bound(lambda: f64, e: f64) -> f64 {
    lambda.ln() - lambda * e + 1.0
}

/// Required transmit power if the whole budget could be steered at the
/// target with no clutter: `σ² Γ_rad / |α_0|²`.
pub fn sensing_power_floor(ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let a0 = ch.alpha_coeffs.first().map(|a| a.norm_sqr()).unwrap_or(0.0);
    if a0 > 0.0 {
        cfg.noise_watt * cfg.gamma_rad_linear / a0
    } else {
        f64::INFINITY
    }
}

fn infeasible_sensing(ch: &ChannelSet, cfg: &SystemConfig) -> Error {
    Error::InfeasibleSensing { required_watt: sensing_power_floor(ch, cfg), budget_watt: cfg.p_bs_watt }
}

/// Real and imaginary parts of `a^H w` as affine functions of the stacked
/// real variables `[Re w; Im w]` starting at `w0`, times `scale`.
fn inner_rows(a: &CVec, w0: usize, scale: f64) -> [LinExpr; 2] {
    let n = a.len();
    let mut re = LinExpr::default();
    let mut im = LinExpr::default();
    for k in 0..n {
        let (ar, ai) = (a[k].re * scale, a[k].im * scale);
        re = re.add_term(w0 + k, ar).add_term(w0 + n + k, ai);
        im = im.add_term(w0 + n + k, ar).add_term(w0 + k, -ai);
    }
    [re, im]
}

/// Inputs of the rate/power step that stay fixed during one solve.
pub struct SubproblemInput<'a> {
    pub u: &'a CVec,
    pub lambda: f64,
    pub u_dr: &'a [CVec],
    pub lambda_dr: &'a [f64],
    pub gains: &'a [CVec],
    pub mode: SensingMode,
}

/// Maximizes `Σ r_l` over `(w, r)` with receivers and weights held fixed.
///
/// Constraints: `ln(1+Γ_rad) ≤ η(w)`, `r_l ln(base)/B ≤ η_l(w)` and
/// `‖w‖² + Σ κ(φ r_l)³ ≤ P_b`. Internally `w` is measured in units of
/// `√P_b` and rates in units of `(P_b/(κφ³))^{1/3}`.
pub fn rate_power_subproblem(
    inp: &SubproblemInput,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(CVec, Vec<f64>)> {
    let n_tx = ch.n_tx();
    let n_dr = inp.gains.len();
    let w_scale = cfg.p_bs_watt.sqrt();
    let r_scale = (cfg.p_bs_watt / cfg.compute_coeff()).cbrt();
    let sensing = inp.mode == SensingMode::Required;

    let mut p = ConicProblem::new();
    let w0 = if sensing { p.add_vars("w", 2 * n_tx) } else { 0 };
    let r0 = p.add_vars("r", n_dr);
    let t0 = p.add_vars("t", n_dr);
    for l in 0..n_dr {
        p.objective[r0 + l] = -1.0;
    }

    if sensing {
        // λ(|a0^H w|² + |aI^H w|² − 2Re a0^H w) ≤ ln λ + 1 − ln(1+Γ) − λ(σ²‖u‖² + 1),
        // divided through by λ.
        let a0 = ch.a_target.ad_mul(inp.u);
        let ai = ch.a_interf.ad_mul(inp.u);
        let lam = inp.lambda;
        let rhs = (lam.ln() + 1.0 - cfg.sensing_rate_nats()) / lam - cfg.noise_watt * norm_sq(inp.u) - 1.0;
        let [a0r, a0i] = inner_rows(&a0, w0, w_scale);
        let [air, aii] = inner_rows(&ai, w0, w_scale);
        let s = a0r.clone().scaled(2.0).add_constant(rhs);
        p.add(ConeConstraint::squared_norm_bound(vec![a0r, a0i, air, aii], s));
    }

    let ln_base = cfg.rate_log_base.ln_base();
    for l in 0..n_dr {
        // λ_l |u_l^H A w|² + r_l ln(base)/B ≤ ln λ_l + 1 − λ_l c_l, divided by λ_l.
        let u_l = &inp.u_dr[l];
        let lam = inp.lambda_dr[l];
        let mut c_l = cfg.noise_watt * norm_sq(u_l) + 1.0
            - 2.0 * cfg.p_dr_watt.sqrt() * inner(u_l, &inp.gains[l]).re;
        for g in inp.gains {
            c_l += cfg.p_dr_watt * inner(u_l, g).norm_sqr();
        }
        let rhs = (lam.ln() + 1.0) / lam - c_l;
        let s = LinExpr::term(r0 + l, -r_scale * ln_base / (cfg.bandwidth_hz * lam)).add_constant(rhs);
        let z = if sensing {
            let b = ch.a_total.ad_mul(u_l);
            inner_rows(&b, w0, w_scale).to_vec()
        } else {
            Vec::new()
        };
        p.add(ConeConstraint::squared_norm_bound(z, s));
        p.add_all(cubic_power_constraint(LinExpr::var(r0 + l), LinExpr::var(t0 + l), 1.0));
    }

    let mut budget = LinExpr::constant(1.0);
    for l in 0..n_dr {
        budget = budget.add_term(t0 + l, -1.0);
    }
    let w_rows: Vec<LinExpr> = if sensing { (0..2 * n_tx).map(|k| LinExpr::var(w0 + k)).collect() } else { Vec::new() };
    p.add(ConeConstraint::squared_norm_bound(w_rows, budget));

    let sol = solve(&p);
    let usable = match sol.status {
        SolveStatus::Optimal => true,
        SolveStatus::NumericalLimit => verify(&p, &sol.x) <= VERIFY_TOL,
        SolveStatus::Infeasible | SolveStatus::Unbounded => false,
    };
    if !usable {
        return if sensing && sol.status == SolveStatus::Infeasible {
            Err(infeasible_sensing(ch, cfg))
        } else {
            Err(Error::Solver(format!("rate/power step ended with status {:?}", sol.status)))
        };
    }
    let w = if sensing {
        CVec::from_fn(n_tx, |k, _| C64::new(sol.x[w0 + k], sol.x[w0 + n_tx + k]) * w_scale)
    } else {
        CVec::zeros(n_tx)
    };
    let r = (0..n_dr).map(|l| sol.x[r0 + l].max(0.0) * r_scale).collect();
    Ok((w, r))
}

/// Smallest multiple `s w`, `s > 0`, whose best-receiver sensing SINR
/// reaches `Γ_rad` without exceeding the power budget.
///
/// The SINR grows monotonically with `s`, so the multiple is found by
/// bisection. Returns `None` when even the full budget along `w` falls short.
pub fn fit_sensing_power(w: &CVec, ch: &ChannelSet, cfg: &SystemConfig) -> Result<Option<CVec>> {
    let target = cfg.gamma_rad_linear;
    let norm = norm_sq(w);
    if norm == 0.0 {
        return Ok(None);
    }
    let s_max = (cfg.p_bs_watt / norm).sqrt();
    let at = |s: f64| max_sensing_sinr(&(w * C64::from(s)), ch, cfg);
    if at(s_max)? < target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, s_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Some(w * C64::from(hi)))
}

/// Link capacities `B log(1 + γ_l)` with MMSE receivers at `w`.
pub fn link_capacities(w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<Vec<f64>> {
    (0..gains.len())
        .map(|l| max_uplink_sinr(l, w, gains, ch, cfg).map(|g| link_capacity(g, cfg)))
        .collect()
}

/// Maximizes `Σ r_l` subject to `r_l ≤ caps[l]` and `Σ κ(φ r_l)³ ≤ budget`.
///
/// The optimum is `r_l = min(caps[l], μ)` with the water level `μ` found by
/// bisection.
pub fn water_fill_rates(caps: &[f64], budget: f64, cfg: &SystemConfig) -> Vec<f64> {
    let c = cfg.compute_coeff();
    let caps: Vec<f64> = caps.iter().map(|&x| x.max(0.0)).collect();
    if budget <= 0.0 {
        return vec![0.0; caps.len()];
    }
    let cost = |mu: f64| caps.iter().map(|&cap| c * cap.min(mu).powi(3)).sum::<f64>();
    let top = caps.iter().copied().fold(0.0, f64::max);
    if cost(top) <= budget {
        return caps;
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cost(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    caps.iter().map(|&cap| cap.min(lo)).collect()
}

/// Best rates for a fixed sensing beam.
pub fn best_rates_for_beam(w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<Vec<f64>> {
    let caps = link_capacities(w, gains, ch, cfg)?;
    let budget = cfg.p_bs_watt - norm_sq(w);
    Ok(water_fill_rates(&caps, budget, cfg))
}

/// Longest extrapolation tried along one inner step.
const MAX_EXTRAPOLATION: f64 = 64.0;

/// Line search on `w + s (w_step − w)`, `s = 1, 2, 4, …`, each candidate
/// refitted to the sensing threshold and scored with water-filled rates.
/// Stops at the first candidate that does not improve.
fn extrapolate(
    w: &CVec,
    w_step: CVec,
    gains: &[CVec],
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(CVec, Vec<f64>)> {
    let mut best_r = best_rates_for_beam(&w_step, gains, ch, cfg)?;
    let mut best_obj: f64 = best_r.iter().sum();
    let mut best_w = w_step.clone();
    if norm_sq(w) == 0.0 {
        return Ok((best_w, best_r));
    }
    // Directions only matter up to scale: compare unit-norm beams.
    let unit = |v: &CVec| v / C64::from(v.norm());
    let (from, to) = (unit(w), unit(&w_step));
    let mut s = 2.0;
    while s <= MAX_EXTRAPOLATION {
        let cand = &from + (&to - &from) * C64::from(s);
        let Some(fitted) = fit_sensing_power(&cand, ch, cfg)? else { break };
        let r = best_rates_for_beam(&fitted, gains, ch, cfg)?;
        let obj: f64 = r.iter().sum();
        if obj <= best_obj {
            break;
        }
        best_obj = obj;
        best_r = r;
        best_w = fitted;
        s *= 2.0;
    }
    Ok((best_w, best_r))
}

/// Quasi-Newton steps spent on the sensing beam per iteration.
pub const REFINE_STEPS: usize = 30;
/// Central-difference step on the unit-norm beam coordinates.
const REFINE_FD_STEP: f64 = 1e-6;

/// Sum rate reachable with beam direction `x` (real and imaginary parts
/// stacked): refitted to the sensing threshold, then water-filled.
fn beam_value(x: &DVector<f64>, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let n = x.len() / 2;
    let w = CVec::from_fn(n, |k, _| C64::new(x[k], x[n + k]));
    Ok(match fit_sensing_power(&w, ch, cfg)? {
        Some(fitted) => best_rates_for_beam(&fitted, gains, ch, cfg)?.iter().sum(),
        None => f64::NEG_INFINITY,
    })
}

fn beam_gradient(x: &DVector<f64>, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += REFINE_FD_STEP;
        b[i] -= REFINE_FD_STEP;
        let (fa, fb) = (beam_value(&a, gains, ch, cfg)?, beam_value(&b, gains, ch, cfg)?);
        if !(fa.is_finite() && fb.is_finite()) {
            return Ok(DVector::zeros(x.len()));
        }
        g[i] = (fa - fb) / (2.0 * REFINE_FD_STEP);
    }
    Ok(g)
}

/// BFGS ascent on the beam direction with Armijo backtracking.
///
/// The value only depends on the direction of `w`, so iterates are kept at
/// unit norm. Every accepted step strictly raises the sum rate.
pub fn refine_beam(
    w: &CVec,
    rates: Vec<f64>,
    gains: &[CVec],
    ch: &ChannelSet,
    cfg: &SystemConfig,
    max_steps: usize,
) -> Result<(CVec, Vec<f64>)> {
    let n = w.len();
    let norm = w.norm();
    if norm == 0.0 || max_steps == 0 {
        return Ok((w.clone(), rates));
    }
    let mut x = DVector::from_fn(2 * n, |i, _| if i < n { w[i].re } else { w[i - n].im }) / norm;
    let mut f = beam_value(&x, gains, ch, cfg)?;
    let start: f64 = rates.iter().sum();
    if !(f.is_finite() && f >= start) {
        return Ok((w.clone(), rates));
    }
    let mut g = beam_gradient(&x, gains, ch, cfg)?;
    if g.norm() == 0.0 {
        return Ok((w.clone(), rates));
    }
    let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut h = &eye * (0.1 / g.norm());
    let mut moved = false;
    for _ in 0..max_steps {
        let d = &h * &g;
        let slope = g.dot(&d);
        if !(slope > 0.0) {
            h = &eye * (0.1 / g.norm());
            continue;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &x + &d * step;
            let cand = &cand / cand.norm();
            let fc = beam_value(&cand, gains, ch, cfg)?;
            if fc > f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = beam_gradient(&xn, gains, ch, cfg)?;
        // Curvature pair for the ascent problem (minimizing −f).
        let s = &xn - &x;
        let y = &g - &gn;
        let sy = s.dot(&y);
        if sy > 0.0 {
            let rho = 1.0 / sy;
            h = (&eye - &s * y.transpose() * rho) * &h * (&eye - &y * s.transpose() * rho) + &s * s.transpose() * rho;
        }
        let gain = fnew - f;
        x = xn;
        f = fnew;
        g = gn;
        moved = true;
        if gain <= 1e-12 * f.abs() || g.norm() == 0.0 {
            break;
        }
    }
    if !moved {
        return Ok((w.clone(), rates));
    }
    let dir = CVec::from_fn(n, |k, _| C64::new(x[k], x[n + k]));
    let fitted = fit_sensing_power(&dir, ch, cfg)?.expect("accepted directions meet the sensing threshold");
    let r = best_rates_for_beam(&fitted, gains, ch, cfg)?;
    Ok((fitted, r))
}

/// Outcome of the inner solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WmmseState {
    pub bf: BeamformerSet,
    pub rates: RateAllocation,
    /// Sum rate after every accepted iteration (first entry is the incumbent
    /// when one was supplied).
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Receivers and weights at `w`, packed into a [`BeamformerSet`].
pub fn beamformers_at(w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<BeamformerSet> {
    let (u, u_dr) = mmse_receivers(w, gains, ch, cfg)?;
    let e_rad = mse_rad(&u, w, ch, cfg);
    let e_dr: Vec<f64> = (0..gains.len()).map(|l| mse_dr(l, &u_dr[l], w, gains, ch, cfg)).collect();
    let (lambda_rad, lambda_dr) = auxiliary_weights(e_rad, &e_dr)?;
    Ok(BeamformerSet {
        w: w.iter().copied().collect(),
        u: u.iter().copied().collect(),
        u_dr: u_dr.iter().map(|v| v.iter().copied().collect()).collect(),
        lambda_rad,
        lambda_dr,
    })
}

/// Runs the inner solver with sensing required and no incumbent.
pub fn algorithm1(w_init: &CVec, star: &StarCoefficients, ch: &ChannelSet, cfg: &SystemConfig) -> Result<WmmseState> {
    algorithm1_with(w_init, star, ch, cfg, SensingMode::Required, None)
}

/// Inner solver.
///
/// `incumbent` holds rates that are feasible together with `w_init` for
/// this surface; the returned trajectory then starts at their sum and
/// every accepted iterate is at least as good.
pub fn algorithm1_with(
    w_init: &CVec,
    star: &StarCoefficients,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    mode: SensingMode,
    incumbent: Option<&[f64]>,
) -> Result<WmmseState> {
    if norm_sq(w_init) > cfg.p_bs_watt * (1.0 + 1e-9) {
        return Err(Error::Config("initial sensing beam exceeds the power budget".into()));
    }
    let gains = effective_uplink_channels(ch, star);
    let mut w = match mode {
        SensingMode::Required => w_init.clone(),
        SensingMode::Off => CVec::zeros(ch.n_tx()),
    };
    let mut rates: Vec<f64> = match incumbent {
        Some(r) => r.to_vec(),
        None => vec![0.0; gains.len()],
    };
    let mut trajectory = Vec::new();
    let mut best = if incumbent.is_some() {
        let s = rates.iter().sum::<f64>();
        trajectory.push(s);
        s
    } else {
        f64::NEG_INFINITY
    };
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.wmmse_max_iter {
        iterations += 1;
        let bf = beamformers_at(&w, &gains, ch, cfg)?;
        let u = bf.u_vec();
        let u_dr: Vec<CVec> = (0..gains.len()).map(|l| bf.u_dr_vec(l)).collect();
        let inp = SubproblemInput {
            u: &u,
            lambda: bf.lambda_rad,
            u_dr: &u_dr,
            lambda_dr: &bf.lambda_dr,
            gains: &gains,
            mode,
        };
        let (w_new, _) = match rate_power_subproblem(&inp, ch, cfg) {
            Ok(v) => v,
            Err(e @ Error::InfeasibleSensing { .. }) if iterations == 1 && incumbent.is_none() => return Err(e),
            // A later failure leaves the incumbent in place.
            Err(e) if iterations > 1 || incumbent.is_some() => {
                log::warn!("inner solver stopped early: {e}");
                converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let (w_new, r_new) = match mode {
            SensingMode::Required => {
                let Some(fitted) = fit_sensing_power(&w_new, ch, cfg)? else {
                    if best.is_finite() {
                        converged = true;
                        break;
                    }
                    return Err(infeasible_sensing(ch, cfg));
                };
                let (w_ex, r_ex) = extrapolate(&w, fitted, &gains, ch, cfg)?;
                refine_beam(&w_ex, r_ex, &gains, ch, cfg, REFINE_STEPS)?
            }
            SensingMode::Off => {
                let r = best_rates_for_beam(&w_new, &gains, ch, cfg)?;
                (w_new, r)
            }
        };
        let obj: f64 = r_new.iter().sum();
        if obj < best {
            converged = true;
            break;
        }
        let prev = best;
        best = obj;
        w = w_new;
        rates = r_new;
        trajectory.push(obj);
        let gain = if prev.is_finite() { obj - prev } else { obj };
        if gain <= cfg.wmmse_tol * obj.abs() {
            converged = true;
            break;
        }
    }

    let bf = beamformers_at(&w, &gains, ch, cfg)?;
    let rates = RateAllocation::new(rates, norm_sq(&w), cfg);
    Ok(WmmseState { bf, rates, trajectory, iterations, converged })
}

/// Largest compute rate of one robot when the link never binds: `(P/κ)^{1/3}/φ`.
pub fn unconstrained_compute_rate(power: f64, cfg: &SystemConfig) -> f64 {
    compute_rate_for_power(power, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, draw_instance, seeded_rng};
    use crate::config::SideSplit;
    use crate::linalg::ONE;

    fn instance(cfg: &SystemConfig, seed: u64) -> (ChannelSet, StarCoefficients) {
        let (_, ch) = draw_instance(cfg, seed).unwrap();
        let mut rng = seeded_rng(seed + 1000);
        let n = cfg.n_ris;
        let ph = complex_gaussian(2 * n, 1, &mut rng);
        let star = StarCoefficients::equal_split(
            (0..n).map(|k| ph[k].arg()).collect(),
            (0..n).map(|k| ph[n + k].arg()).collect(),
        )
        .unwrap();
        (ch, star)
    }

    fn random_w(cfg: &SystemConfig, seed: u64) -> CVec {
        let mut rng = seeded_rng(seed);
        let w = complex_gaussian(cfg.n_tx, 1, &mut rng).column(0).into_owned();
        let scale = (0.3 * cfg.p_bs_watt / norm_sq(&w)).sqrt();
        w * C64::from(scale)
    }

    #[test]
    fn scalar_receiver_matches_hand_formula() {
        let cfg = SystemConfig { n_tx: 1, n_rx: 1, n_ris: 2, n_dr: 0, n_interferer: 1, dr_split: SideSplit::AllTransmission, ..SystemConfig::desk() };
        let (_, ch) = draw_instance(&cfg, 3).unwrap();
        let w = CVec::from_element(1, C64::new(0.3, -0.2));
        let (u, _) = mmse_receivers(&w, &[], &ch, &cfg).unwrap();
        let s = ch.a_target[(0, 0)] * w[0];
        let i = ch.a_interf[(0, 0)] * w[0];
        let expected = s / (s.norm_sqr() + i.norm_sqr() + cfg.noise_watt);
        assert!((u[0] - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn zero_beam_gives_zero_receiver() {
        let cfg = SystemConfig::desk();
        let (ch, star) = instance(&cfg, 1);
        let gains = effective_uplink_channels(&ch, &star);
        let (u, _) = mmse_receivers(&CVec::zeros(cfg.n_tx), &gains, &ch, &cfg).unwrap();
        assert_eq!(norm_sq(&u), 0.0);
    }

    fn fd_gradient(f: impl Fn(&CVec) -> f64, u: &CVec) -> f64 {
        // Central differences are exact on quadratics, so a large step only
        // reduces round-off.
        let h = 1e-2 * u.norm().max(1e-300);
        let mut g2 = 0.0;
        for k in 0..u.len() {
            for dir in [ONE, C64::new(0.0, 1.0)] {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[k] += dir * h;
                dn[k] -= dir * h;
                g2 += ((f(&up) - f(&dn)) / (2.0 * h)).powi(2);
            }
        }
        g2.sqrt()
    }

    #[test]
    fn receivers_are_stationary_points_of_the_mse() {
        let cfg = SystemConfig::desk();
        for seed in 0..5 {
            let (ch, star) = instance(&cfg, seed);
            let gains = effective_uplink_channels(&ch, &star);
            let w = random_w(&cfg, seed + 50);
            let (u, u_dr) = mmse_receivers(&w, &gains, &ch, &cfg).unwrap();
            let f_rad = |v: &CVec| mse_rad(v, &w, &ch, &cfg);
            let probe = |like: &CVec, k: u64| {
                let mut rng = seeded_rng(seed * 31 + k);
                let v = complex_gaussian(like.len(), 1, &mut rng).column(0).into_owned();
                &v * C64::from(like.norm() / v.norm())
            };
            let reference = fd_gradient(f_rad, &probe(&u, 0));
            assert!(fd_gradient(f_rad, &u) <= 1e-6 * reference);
            for l in 0..gains.len() {
                let f = |v: &CVec| mse_dr(l, v, &w, &gains, &ch, &cfg);
                let reference = fd_gradient(f, &probe(&u_dr[l], 1 + l as u64));
                let at_opt = fd_gradient(f, &u_dr[l]);
                assert!(at_opt <= 1e-6 * reference, "{at_opt} vs {reference}");
            }
        }
    }

    #[test]
    fn weights_examples() {
        assert_eq!(auxiliary_weights(1.0, &[0.5]).unwrap(), (1.0, vec![2.0]));
        assert!(auxiliary_weights(0.0, &[]).is_err());
        assert!(auxiliary_weights(0.5, &[-1.0]).is_err());
        for e in [1e-6, 0.01, 0.3, 1.0] {
            let (lam, _) = auxiliary_weights(e, &[]).unwrap();
            assert!((weighted_mse_bound(lam, e) - (1.0 / e).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_are_tight_at_closed_form_optimum() {
        let cfg = SystemConfig::desk();
        for seed in 0..10 {
            let (ch, star) = instance(&cfg, seed);
            let gains = effective_uplink_channels(&ch, &star);
            let w = random_w(&cfg, seed + 77);
            let bf = beamformers_at(&w, &gains, &ch, &cfg).unwrap();
            let e_rad = mse_rad(&bf.u_vec(), &w, &ch, &cfg);
            let eta = weighted_mse_bound(bf.lambda_rad, e_rad);
            let r_rad = max_sensing_sinr(&w, &ch, &cfg).unwrap().ln_1p();
            assert!((eta - r_rad).abs() < 1e-8, "{eta} vs {r_rad}");
            for l in 0..gains.len() {
                let e = mse_dr(l, &bf.u_dr_vec(l), &w, &gains, &ch, &cfg);
                let eta_l = weighted_mse_bound(bf.lambda_dr[l], e);
                let r_l = max_uplink_sinr(l, &w, &gains, &ch, &cfg).unwrap().ln_1p();
                assert!((eta_l - r_l).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn water_fill_examples() {
        let cfg = SystemConfig::paper();
        let c = cfg.compute_coeff();
        let r = water_fill_rates(&[1e9, 1e9], 1.0, &cfg);
        let expected = (0.5 / c).cbrt();
        assert!((r[0] / expected - 1.0).abs() < 1e-12 && (r[1] / expected - 1.0).abs() < 1e-12);
        let r = water_fill_rates(&[1e3, 1e9], 1.0, &cfg);
        assert_eq!(r[0], 1e3);
        assert!((c * 1e9 + c * r[1].powi(3) - 1.0).abs() < 1e-9);
        assert_eq!(water_fill_rates(&[0.0, 0.0], 1.0, &cfg), vec![0.0, 0.0]);
        assert_eq!(water_fill_rates(&[5.0], 0.0, &cfg), vec![0.0]);
    }

    #[test]
    fn trajectory_monotone_and_feasible() {
        let cfg = SystemConfig::desk();
        for seed in 0..4 {
            let (ch, star) = instance(&cfg, seed);
            let w0 = default_w_init(&ch, &cfg);
            let st = algorithm1(&w0, &star, &ch, &cfg).unwrap();
            for pair in st.trajectory.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9);
            }
            assert!(st.rates.total_power() <= cfg.p_bs_watt * (1.0 + 1e-6));
            let w = st.bf.w_vec();
            assert!(max_sensing_sinr(&w, &ch, &cfg).unwrap() >= cfg.gamma_rad_linear * (1.0 - 1e-6));
            let gains = effective_uplink_channels(&ch, &star);
            for l in 0..gains.len() {
                let cap = link_capacity(max_uplink_sinr(l, &w, &gains, &ch, &cfg).unwrap(), &cfg);
                assert!(st.rates.r_dr[l] <= cap * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn refinement_never_loses_rate() {
        let cfg = SystemConfig::desk();
        for seed in 0..4 {
            let (ch, star) = instance(&cfg, 40 + seed);
            let gains = effective_uplink_channels(&ch, &star);
            let w = fit_sensing_power(&random_w(&cfg, seed), &ch, &cfg).unwrap().unwrap();
            let r0 = best_rates_for_beam(&w, &gains, &ch, &cfg).unwrap();
            let before: f64 = r0.iter().sum();
            let (w1, r1) = refine_beam(&w, r0, &gains, &ch, &cfg, 10).unwrap();
            assert!(r1.iter().sum::<f64>() >= before);
            assert!(max_sensing_sinr(&w1, &ch, &cfg).unwrap() >= cfg.gamma_rad_linear * (1.0 - 1e-9));
            assert!(norm_sq(&w1) + r1.iter().map(|&r| crate::metrics::compute_power(r, &cfg)).sum::<f64>() <= cfg.p_bs_watt * (1.0 + 1e-9));
        }
    }

    #[test]
    fn single_iteration_cap() {
        let cfg = SystemConfig { wmmse_max_iter: 1, ..SystemConfig::desk() };
        let (ch, star) = instance(&cfg, 2);
        let st = algorithm1(&default_w_init(&ch, &cfg), &star, &ch, &cfg).unwrap();
        assert_eq!(st.iterations, 1);
        assert_eq!(st.trajectory.len(), 1);
    }

    #[test]
    fn cube_root_split_without_sensing_or_link_limits() {
        let base = SystemConfig { bandwidth_hz: 1e12, gamma_rad_linear: 1e-9, ..SystemConfig::desk() };
        for (n_dr, split) in [(1, SideSplit::AllTransmission), (2, SideSplit::Equal)] {
            let cfg = SystemConfig { n_dr, dr_split: split, ..base.clone() };
            let (ch, star) = instance(&cfg, 5);
            let st = algorithm1(&default_w_init(&ch, &cfg), &star, &ch, &cfg).unwrap();
            let expected = (cfg.p_bs_watt / (n_dr as f64 * cfg.kappa)).cbrt() / cfg.phi_cycles_per_bit;
            for r in &st.rates.r_dr {
                assert!((r / expected - 1.0).abs() < 1e-4, "{r} vs {expected}");
            }
        }
    }

    #[test]
    fn zero_uplink_gives_zero_rates() {
        let cfg = SystemConfig::desk();
        let (mut ch, star) = instance(&cfg, 6);
        ch.h_ris_dr.iter_mut().for_each(|h| h.fill(C64::from(0.0)));
        let st = algorithm1(&default_w_init(&ch, &cfg), &star, &ch, &cfg).unwrap();
        assert!(st.rates.r_dr.iter().all(|&r| r == 0.0));
        assert!(st.converged);
    }

    #[test]
    fn offloading_only_uses_whole_budget() {
        let cfg = SystemConfig { n_dr: 1, dr_split: SideSplit::AllTransmission, bandwidth_hz: 1e12, ..SystemConfig::desk() };
        let (ch, star) = instance(&cfg, 7);
        let st = algorithm1_with(&CVec::zeros(cfg.n_tx), &star, &ch, &cfg, SensingMode::Off, None).unwrap();
        assert_eq!(st.rates.p_sense, 0.0);
        let expected = (cfg.p_bs_watt / cfg.kappa).cbrt() / cfg.phi_cycles_per_bit;
        assert!((st.rates.r_dr[0] / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unreachable_threshold_is_reported() {
        let cfg = SystemConfig { gamma_rad_linear: 1e12, ..SystemConfig::desk() };
        let (ch, star) = instance(&cfg, 8);
        match algorithm1(&default_w_init(&ch, &cfg), &star, &ch, &cfg) {
            Err(Error::InfeasibleSensing { required_watt, budget_watt }) => assert!(required_watt > budget_watt),
            other => panic!("expected InfeasibleSensing, got {other:?}"),
        }
    }

    #[test]
    fn default_beam_uses_ninety_percent() {
        let cfg = SystemConfig::desk();
        let (ch, _) = instance(&cfg, 9);
        let w = default_w_init(&ch, &cfg);
        assert!((norm_sq(&w) - 0.9 * cfg.p_bs_watt).abs() < 1e-12);
    }
}
