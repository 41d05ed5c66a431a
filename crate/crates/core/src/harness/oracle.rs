//! Brute-force reference optimum for the smallest instance
//! (`Nt = Nr = N = 2`, one robot, one clutter source).
//!
//! Written against the raw channel matrices with explicit inverses, so it
//! shares no code with the solvers it checks. For a fixed beam direction
//! the smallest power meeting the sensing threshold is optimal, since
//! extra power both adds echo at the uplink receiver and leaves less for
//! computing. Unit amplitudes on the robot's side are optimal because the
//! MMSE SINR is a convex function of the surface diagonal. That leaves
//! three angles: beam direction `(a, b)` and the relative surface phase.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{dbm_to_watt, SideSplit, SystemConfig};
use crate::error::{Error, Result};
use crate::model::ChannelSet;

type M2 = Matrix2<Complex64>;
type V2 = Vector2<Complex64>;

/// The instance the oracle handles, at a link-limited budget.
pub fn tiny_config() -> SystemConfig {
    SystemConfig {
        n_tx: 2,
        n_rx: 2,
        n_ris: 2,
        n_dr: 1,
        n_interferer: 1,
        dr_split: SideSplit::AllTransmission,
        p_bs_watt: dbm_to_watt(40.0),
        ..SystemConfig::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best sum rate after local polishing of the best grid points.
    pub value: f64,
    pub grid_best: f64,
    pub grid_points: usize,
    /// Beam direction angles and relative surface phase of the optimum.
    pub argmax: [f64; 3],
}

struct Tiny {
    a0: M2,
    ai: M2,
    at: M2,
    hh: M2,
    h: V2,
    cfg: SystemConfig,
}

fn mat2(m: &crate::linalg::CMat) -> M2 {
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn quad_inv(r: &M2, x: &V2) -> f64 {
    let inv = r.try_inverse().unwrap_or_else(M2::zeros);
    (x.adjoint() * inv * x)[(0, 0)].re
}

impl Tiny {
    fn noise(&self) -> M2 {
        M2::identity() * Complex64::from(self.cfg.noise_watt)
    }

    fn sensing(&self, p: f64, d: &V2) -> f64 {
        let t = self.a0 * d;
        let e = self.ai * d;
        let r = e * e.adjoint() * Complex64::from(p) + self.noise();
        p * quad_inv(&r, &t)
    }

    fn value(&self, x: [f64; 3]) -> f64 {
        let [a, b, phi] = x;
        let d = V2::new(Complex64::from(a.cos()), Complex64::from_polar(a.sin(), b));
        let (pb, gamma) = (self.cfg.p_bs_watt, self.cfg.gamma_rad_linear);
        if self.sensing(pb, &d) < gamma {
            return f64::NEG_INFINITY;
        }
        let (mut lo, mut hi) = (0.0, pb);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sensing(mid, &d) >= gamma {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * pb {
                break;
            }
        }
        let p = hi;
        let v = V2::new(Complex64::from(1.0), Complex64::from_polar(1.0, phi));
        let g = self.hh * v.component_mul(&self.h);
        let echo = self.at * d;
        let r = echo * echo.adjoint() * Complex64::from(p) + self.noise();
        let snr = self.cfg.p_dr_watt * quad_inv(&r, &g);
        let cap = self.cfg.bandwidth_hz * snr.ln_1p() / self.cfg.rate_log_base.ln_base();
        let comp = ((pb - p).max(0.0) / self.cfg.kappa).cbrt() / self.cfg.phi_cycles_per_bit;
        cap.min(comp)
    }
}

/// Grid search over `per_axis³` points followed by compass-search polishing
/// of the best few.
pub fn grid_oracle(cfg: &SystemConfig, ch: &ChannelSet, per_axis: usize) -> Result<OracleResult> {
    if (cfg.n_tx, cfg.n_rx, cfg.n_ris, cfg.n_dr) != (2, 2, 2, 1) || per_axis < 2 {
        return Err(Error::Config("the grid oracle needs Nt = Nr = N = 2 and a single robot".into()));
    }
    ch.check_dims(cfg)?;
    let tiny = Tiny {
        a0: mat2(&ch.a_target),
        ai: mat2(&ch.a_interf),
        at: mat2(&ch.a_total),
        hh: mat2(&ch.h_bs_ris.adjoint()),
        h: V2::new(ch.h_ris_dr[0][0], ch.h_ris_dr[0][1]),
        cfg: cfg.clone(),
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let tau = std::f64::consts::TAU;
    let step = [half_pi / (per_axis - 1) as f64, tau / per_axis as f64, tau / per_axis as f64];
    let mut scored = Vec::with_capacity(per_axis.pow(3));
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let x = [i as f64 * step[0], j as f64 * step[1], k as f64 * step[2]];
                scored.push((tiny.value(x), x));
            }
        }
    }
    let grid_points = scored.len();
    scored.sort_by(|p, q| q.0.total_cmp(&p.0));
    let grid_best = scored[0].0;
    if grid_best == f64::NEG_INFINITY {
        return Err(Error::InfeasibleSensing { required_watt: f64::INFINITY, budget_watt: cfg.p_bs_watt });
    }
    let mut best = (grid_best, scored[0].1);
    for &(f0, x0) in scored.iter().take(4) {
        let (mut f, mut x, mut h) = (f0, x0, step);
        while h[0] > 1e-10 {
            let mut moved = false;
            for c in 0..3 {
                for s in [1.0, -1.0] {
                    let mut y = x;
                    y[c] += s * h[c];
                    let fy = tiny.value(y);
                    if fy > f {
                        (f, x, moved) = (fy, y, true);
                    }
                }
            }
            if !moved {
                h = h.map(|v| v * 0.5);
            }
        }
        if f > best.0 {
            best = (f, x);
        }
    }
    Ok(OracleResult { value: best.0, grid_best, grid_points, argmax: best.1 })
}
