//! Domain types and the deterministic constructions of the system model.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64, ZERO};

/// Largest tolerated violation of `amp_t + amp_r = 1`.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Transmission,
    Reflection,
}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Uniform linear array response with unit norm:
/// entry `k` is `exp(j k sin θ) / √n`.
pub fn steering_vector(theta: f64, n: usize) -> CVec {
    let s = theta.sin();
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |k, _| cis(k as f64 * s) * scale)
}

/// Per-element transmission and reflection coefficients of the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCoefficients {
    pub amp_t: Vec<f64>,
    pub amp_r: Vec<f64>,
    pub phase_t: Vec<f64>,
    pub phase_r: Vec<f64>,
}

impl StarCoefficients {
    pub fn new(amp_t: Vec<f64>, amp_r: Vec<f64>, phase_t: Vec<f64>, phase_r: Vec<f64>) -> Result<Self> {
        let c = Self {
            amp_t,
            amp_r,
            phase_t: phase_t.into_iter().map(wrap_phase).collect(),
            phase_r: phase_r.into_iter().map(wrap_phase).collect(),
        };
        c.validate()?;
        Ok(c)
    }

    /// Equal energy split with the given phases on both sides.
    pub fn equal_split(phase_t: Vec<f64>, phase_r: Vec<f64>) -> Result<Self> {
        let n = phase_t.len();
        Self::new(vec![0.5; n], vec![0.5; n], phase_t, phase_r)
    }

    /// Builds coefficients from the complex diagonals `v_t`, `v_r`.
    ///
    /// The squared magnitudes are renormalised per element so that energy
    /// conservation holds exactly; an element with zero energy on both sides
    /// is split equally.
    pub fn from_diagonals(v_t: &CVec, v_r: &CVec) -> Result<Self> {
        if v_t.len() != v_r.len() {
            return Err(Error::InvalidCoefficients("side lengths differ".into()));
        }
        let n = v_t.len();
        let mut amp_t = Vec::with_capacity(n);
        let mut amp_r = Vec::with_capacity(n);
        for k in 0..n {
            let (et, er) = (v_t[k].norm_sqr(), v_r[k].norm_sqr());
            let total = et + er;
            let t = if total > 0.0 { et / total } else { 0.5 };
            amp_t.push(t);
            amp_r.push(1.0 - t);
        }
        let phase = |z: &C64| if z.norm() > 0.0 { z.arg() } else { 0.0 };
        Self::new(amp_t, amp_r, v_t.iter().map(phase).collect(), v_r.iter().map(phase).collect())
    }

    pub fn len(&self) -> usize {
        self.amp_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp_t.is_empty()
    }

    pub fn max_energy_violation(&self) -> f64 {
        self.amp_t
            .iter()
            .zip(&self.amp_r)
            .map(|(t, r)| (t + r - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.amp_t.len();
        if self.amp_r.len() != n || self.phase_t.len() != n || self.phase_r.len() != n {
            return Err(Error::InvalidCoefficients("coefficient vectors differ in length".into()));
        }
        for (k, (&t, &r)) in self.amp_t.iter().zip(&self.amp_r).enumerate() {
            if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidCoefficients(format!("amplitude outside [0,1] at element {k}")));
            }
            if (t + r - 1.0).abs() > ENERGY_TOL {
                return Err(Error::InvalidCoefficients(format!(
                    "energy not conserved at element {k}: {t} + {r} != 1"
                )));
            }
        }
        let in_range = |p: &f64| (0.0..TAU).contains(p);
        if !self.phase_t.iter().all(in_range) || !self.phase_r.iter().all(in_range) {
            return Err(Error::InvalidCoefficients("phase outside [0, 2π)".into()));
        }
        Ok(())
    }

    /// Diagonal of `Φ_side`: `√ρ_n e^{jθ_n}`.
    pub fn diagonal(&self, side: Side) -> CVec {
        let (amp, phase) = match side {
            Side::Transmission => (&self.amp_t, &self.phase_t),
            Side::Reflection => (&self.amp_r, &self.phase_r),
        };
        CVec::from_iterator(amp.len(), amp.iter().zip(phase).map(|(a, p)| cis(*p) * a.sqrt()))
    }
}

/// Transmission and reflection matrices `(Φ_t, Φ_r)`.
pub fn star_matrices(c: &StarCoefficients) -> Result<(CMat, CMat)> {
    c.validate()?;
    Ok((
        CMat::from_diagonal(&c.diagonal(Side::Transmission)),
        CMat::from_diagonal(&c.diagonal(Side::Reflection)),
    ))
}

/// Sensing channels between the base-station arrays and the scatterers.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingChannels {
    pub a_target: CMat,
    pub a_interf: CMat,
    pub a_total: CMat,
}

/// `A_0 = α_0 a_r(θ_0) a_t(θ_0)^H`, `A_I = Σ_m α_m a_r(θ_m) a_t(θ_m)^H`.
///
/// `alphas[0]` belongs to the target and `alphas[1..]` to the interferers,
/// in the order of `thetas_interf`.
pub fn build_sensing_channels(
    theta_target: f64,
    thetas_interf: &[f64],
    alphas: &[C64],
    n_rx: usize,
    n_tx: usize,
) -> Result<SensingChannels> {
    if alphas.len() != thetas_interf.len() + 1 {
        return Err(Error::Config(format!(
            "expected {} sensing coefficients, got {}",
            thetas_interf.len() + 1,
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Config("sensing coefficients must be finite".into()));
    }
    let term = |theta: f64, alpha: C64| -> CMat {
        steering_vector(theta, n_rx) * steering_vector(theta, n_tx).adjoint() * alpha
    };
    let a_target = term(theta_target, alphas[0]);
    let mut a_interf = CMat::zeros(n_rx, n_tx);
    for (theta, alpha) in thetas_interf.iter().zip(&alphas[1..]) {
        a_interf += term(*theta, *alpha);
    }
    let a_total = &a_target + &a_interf;
    Ok(SensingChannels { a_target, a_interf, a_total })
}

/// One realization of every propagation matrix in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS–surface channel `H`, `N × Nr`.
    pub h_bs_ris: CMat,
    /// Robot–surface channels `h_{u,l}`, each of length `N`.
    pub h_ris_dr: Vec<CVec>,
    pub side: Vec<Side>,
    pub a_target: CMat,
    pub a_interf: CMat,
    pub a_total: CMat,
    /// `α_0` followed by the interferer coefficients.
    pub alpha_coeffs: Vec<C64>,
}

impl ChannelSet {
    pub fn n_dr(&self) -> usize {
        self.h_ris_dr.len()
    }

    pub fn n_ris(&self) -> usize {
        self.h_bs_ris.nrows()
    }

    pub fn n_rx(&self) -> usize {
        self.h_bs_ris.ncols()
    }

    pub fn n_tx(&self) -> usize {
        self.a_target.ncols()
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        let ok = self.n_ris() == cfg.n_ris
            && self.n_rx() == cfg.n_rx
            && self.n_tx() == cfg.n_tx
            && self.n_dr() == cfg.n_dr
            && self.side.len() == cfg.n_dr
            && self.h_ris_dr.iter().all(|h| h.len() == cfg.n_ris)
            && self.a_target.nrows() == cfg.n_rx;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("channel dimensions do not match the configuration".into()))
        }
    }
}

/// `g_l = H^H Φ(l) h_{u,l}`, with `Φ(l)` picked by the robot's side.
pub fn effective_uplink_channel(ch: &ChannelSet, c: &StarCoefficients, l: usize) -> CVec {
    let v = c.diagonal(ch.side[l]);
    let weighted = v.component_mul(&ch.h_ris_dr[l]);
    ch.h_bs_ris.ad_mul(&weighted)
}

pub fn effective_uplink_channels(ch: &ChannelSet, c: &StarCoefficients) -> Vec<CVec> {
    (0..ch.n_dr()).map(|l| effective_uplink_channel(ch, c, l)).collect()
}

/// Receive processing state of the base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub w: Vec<C64>,
    pub u: Vec<C64>,
    pub u_dr: Vec<Vec<C64>>,
    pub lambda_rad: f64,
    pub lambda_dr: Vec<f64>,
}

impl BeamformerSet {
    pub fn w_vec(&self) -> CVec {
        CVec::from_column_slice(&self.w)
    }

    pub fn u_vec(&self) -> CVec {
        CVec::from_column_slice(&self.u)
    }

    pub fn u_dr_vec(&self, l: usize) -> CVec {
        CVec::from_column_slice(&self.u_dr[l])
    }

    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self {
            w: vec![ZERO; cfg.n_tx],
            u: vec![ZERO; cfg.n_rx],
            u_dr: vec![vec![ZERO; cfg.n_rx]; cfg.n_dr],
            lambda_rad: 1.0,
            lambda_dr: vec![1.0; cfg.n_dr],
        }
    }
}

/// Offloaded compute rates and the power they cost at the edge server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    /// bit/s (or nat/s in natural-log mode) per robot.
    pub r_dr: Vec<f64>,
    pub p_compute: Vec<f64>,
    pub p_sense: f64,
    pub sum_rate: f64,
}

impl RateAllocation {
    pub fn new(r_dr: Vec<f64>, p_sense: f64, cfg: &SystemConfig) -> Self {
        let p_compute = r_dr.iter().map(|&r| crate::metrics::compute_power(r, cfg)).collect();
        let sum_rate = r_dr.iter().sum();
        Self { r_dr, p_compute, p_sense, sum_rate }
    }

    pub fn total_power(&self) -> f64 {
        self.p_sense + self.p_compute.iter().sum::<f64>()
    }

    pub fn zero(n_dr: usize) -> Self {
        Self { r_dr: vec![0.0; n_dr], p_compute: vec![0.0; n_dr], p_sense: 0.0, sum_rate: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_sq, ONE};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn steering_broadside_is_flat() {
        let a = steering_vector(0.0, 4);
        for z in a.iter() {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_endfire_two_elements() {
        let a = steering_vector(FRAC_PI_2, 2);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((a[1] - cis(1.0) * s).norm() < 1e-15);
    }

    #[test]
    fn sensing_channel_without_interferers() {
        let sc = build_sensing_channels(0.0, &[], &[ONE], 2, 2).unwrap();
        assert_eq!(sc.a_interf, CMat::zeros(2, 2));
        assert_eq!(sc.a_total, sc.a_target);
        for z in sc.a_target.iter() {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn sensing_target_frobenius_is_alpha() {
        let alpha = C64::new(0.3, -1.2);
        let sc = build_sensing_channels(0.4, &[-0.5, 1.0], &[alpha, ONE, ONE], 5, 3).unwrap();
        assert!((sc.a_target.norm() - alpha.norm()).abs() < 1e-12);
        assert_eq!(sc.a_total, &sc.a_target + &sc.a_interf);
        assert!(build_sensing_channels(0.0, &[0.1], &[ONE], 2, 2).is_err());
    }

    #[test]
    fn star_matrix_examples() {
        let c = StarCoefficients::equal_split(vec![0.0; 3], vec![0.0; 3]).unwrap();
        let (pt, pr) = star_matrices(&c).unwrap();
        for k in 0..3 {
            assert!((pt[(k, k)].re - 0.5f64.sqrt()).abs() < 1e-15);
            assert!((pr[(k, k)].re - 0.5f64.sqrt()).abs() < 1e-15);
        }
        let c = StarCoefficients::new(vec![1.0; 2], vec![0.0; 2], vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let (_, pr) = star_matrices(&c).unwrap();
        assert_eq!(pr, CMat::zeros(2, 2));
    }

    #[test]
    fn star_rejects_energy_violation() {
        let bad = StarCoefficients {
            amp_t: vec![0.6],
            amp_r: vec![0.6],
            phase_t: vec![0.0],
            phase_r: vec![0.0],
        };
        assert!(matches!(star_matrices(&bad), Err(Error::InvalidCoefficients(_))));
    }

    #[test]
    fn phases_are_wrapped() {
        let c = StarCoefficients::equal_split(vec![-PI / 2.0, 2.0 * PI], vec![7.0, 0.1]).unwrap();
        assert!((c.phase_t[0] - 1.5 * PI).abs() < 1e-12);
        assert_eq!(c.phase_t[1], 0.0);
        assert!((c.phase_r[0] - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn scalar_effective_channel() {
        let ch = ChannelSet {
            h_bs_ris: CMat::from_element(1, 1, C64::new(2.0, 0.0)),
            h_ris_dr: vec![CVec::from_element(1, C64::new(3.0, 0.0))],
            side: vec![Side::Transmission],
            a_target: CMat::zeros(1, 1),
            a_interf: CMat::zeros(1, 1),
            a_total: CMat::zeros(1, 1),
            alpha_coeffs: vec![ZERO],
        };
        let full_t = StarCoefficients::new(vec![1.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        assert!((effective_uplink_channel(&ch, &full_t, 0)[0] - C64::new(6.0, 0.0)).norm() < 1e-14);
        let full_r = StarCoefficients::new(vec![0.0], vec![1.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(norm_sq(&effective_uplink_channel(&ch, &full_r, 0)), 0.0);
    }

    #[test]
    fn from_diagonals_renormalises() {
        let vt = CVec::from_vec(vec![C64::new(0.0, 0.9), ZERO, C64::new(0.1, 0.0)]);
        let vr = CVec::from_vec(vec![C64::new(0.3, 0.0), ZERO, ZERO]);
        let c = StarCoefficients::from_diagonals(&vt, &vr).unwrap();
        assert!(c.max_energy_violation() <= 1e-15);
        assert!((c.amp_t[0] - 0.81 / 0.9).abs() < 1e-12);
        assert_eq!((c.amp_t[1], c.amp_r[1]), (0.5, 0.5));
        assert_eq!((c.amp_t[2], c.amp_r[2]), (1.0, 0.0));
        assert!((c.phase_t[0] - PI / 2.0).abs() < 1e-12);
    }
}
