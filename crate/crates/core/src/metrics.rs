//! Closed-form performance quantities.

use crate::config::{LogBase, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sq, outer, quad_form, solve_hpd, CMat, CVec, C64};
use crate::model::{effective_uplink_channels, steering_vector, BeamformerSet, ChannelSet, StarCoefficients};

/// Received-signal covariances for one `(w, surface)` pair.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    /// `R_l`: interference plus noise seen by robot `l`.
    pub r_interf_dr: Vec<CMat>,
    /// `R_2`: full uplink receive covariance.
    pub r_total_rx: CMat,
    /// `R_1`: covariance of the equivalent sensing link.
    pub r_equiv: CMat,
    /// `R_rad = A_I w w^H A_I^H + σ² I`.
    pub r_rad_noise: CMat,
}

impl CovarianceBundle {
    /// `gains` are the effective uplink channels `g_l`.
    pub fn build(w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Self {
        let n_rx = ch.n_rx();
        let noise = CMat::identity(n_rx, n_rx) * C64::from(cfg.noise_watt);
        let echo_target = &ch.a_target * w;
        let echo_interf = &ch.a_interf * w;
        let echo_total = &ch.a_total * w;
        let r_rad_noise = outer(&echo_interf) + &noise;
        let r_equiv = outer(&echo_target) + &r_rad_noise;
        let mut r_total_rx = outer(&echo_total) + &noise;
        for g in gains {
            r_total_rx += outer(g) * C64::from(cfg.p_dr_watt);
        }
        let r_interf_dr = gains
            .iter()
            .map(|g| &r_total_rx - outer(g) * C64::from(cfg.p_dr_watt))
            .collect();
        Self { r_interf_dr, r_total_rx, r_equiv, r_rad_noise }
    }

    pub fn all(&self) -> impl Iterator<Item = &CMat> {
        self.r_interf_dr
            .iter()
            .chain([&self.r_total_rx, &self.r_equiv, &self.r_rad_noise])
    }
}

/// `γ_{u,l}` for an arbitrary receiver `u_l`.
pub fn uplink_sinr_with(
    l: usize,
    u_l: &CVec,
    w: &CVec,
    gains: &[CVec],
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<f64> {
    let u_norm = norm_sq(u_l);
    if u_norm == 0.0 {
        return Err(Error::DegenerateReceiver);
    }
    let signal = cfg.p_dr_watt * inner(u_l, &gains[l]).norm_sqr();
    let multiuser: f64 = gains
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != l)
        .map(|(_, g)| inner(u_l, g).norm_sqr())
        .sum::<f64>()
        * cfg.p_dr_watt;
    let echo = inner(u_l, &(&ch.a_total * w)).norm_sqr();
    Ok(signal / (multiuser + echo + cfg.noise_watt * u_norm))
}

/// `γ_{u,l}` with the receivers held in `bf`.
pub fn uplink_sinr(
    l: usize,
    bf: &BeamformerSet,
    ch: &ChannelSet,
    star: &StarCoefficients,
    cfg: &SystemConfig,
) -> Result<f64> {
    let gains = effective_uplink_channels(ch, star);
    uplink_sinr_with(l, &bf.u_dr_vec(l), &bf.w_vec(), &gains, ch, cfg)
}

/// Largest achievable `γ_{u,l}`: `P_u g_l^H R_l^{-1} g_l`, attained by the MMSE receiver.
pub fn max_uplink_sinr(l: usize, w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let cov = CovarianceBundle::build(w, gains, ch, cfg);
    let x = solve_hpd(&cov.r_interf_dr[l], &gains[l])?;
    Ok(cfg.p_dr_watt * inner(&gains[l], &x).re.max(0.0))
}

/// `γ_rad = |u^H A_0 w|² / (|u^H A_I w|² + σ²‖u‖²)`.
pub fn sensing_sinr(u: &CVec, w: &CVec, ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let u_norm = norm_sq(u);
    if u_norm == 0.0 {
        return Err(Error::DegenerateReceiver);
    }
    let signal = inner(u, &(&ch.a_target * w)).norm_sqr();
    let interf = inner(u, &(&ch.a_interf * w)).norm_sqr();
    Ok(signal / (interf + cfg.noise_watt * u_norm))
}

/// `w^H A_0^H R_rad^{-1} A_0 w`: the sensing SINR of the best receiver.
pub fn max_sensing_sinr(w: &CVec, ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let cov = CovarianceBundle::build(w, &[], ch, cfg);
    let echo = &ch.a_target * w;
    let x = solve_hpd(&cov.r_rad_noise, &echo)?;
    Ok(inner(&echo, &x).re.max(0.0))
}

/// Spectral efficiency `log_base(1 + γ)`.
pub fn rate_from_sinr(gamma: f64, base: LogBase) -> f64 {
    gamma.ln_1p() / base.ln_base()
}

/// Inverse of [`rate_from_sinr`] for a link of bandwidth `bandwidth`:
/// `Γ = base^{r/B} − 1`.
pub fn sinr_from_rate(r: f64, bandwidth: f64, base: LogBase) -> f64 {
    (r / bandwidth * base.ln_base()).exp_m1()
}

/// Offloading capacity `B log_base(1 + γ)`.
pub fn link_capacity(gamma: f64, cfg: &SystemConfig) -> f64 {
    cfg.bandwidth_hz * rate_from_sinr(gamma, cfg.rate_log_base)
}

/// Edge-server power for computing at rate `r`: `κ (φ r)³`.
pub fn compute_power(r: f64, cfg: &SystemConfig) -> f64 {
    cfg.kappa * (cfg.phi_cycles_per_bit * r).powi(3)
}

/// Rate that exactly consumes `p` watts of compute power.
pub fn compute_rate_for_power(p: f64, cfg: &SystemConfig) -> f64 {
    (p.max(0.0) / cfg.kappa).cbrt() / cfg.phi_cycles_per_bit
}

/// `e_rad = u^H R_1 u − 2 Re(u^H A_0 w) + 1`.
pub fn mse_rad(u: &CVec, w: &CVec, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let cov = CovarianceBundle::build(w, &[], ch, cfg);
    quad_form(&cov.r_equiv, u) - 2.0 * inner(u, &(&ch.a_target * w)).re + 1.0
}

/// `e_l = u_l^H R_2 u_l − 2√P_u Re(u_l^H g_l) + 1`.
pub fn mse_dr(l: usize, u_l: &CVec, w: &CVec, gains: &[CVec], ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    let cov = CovarianceBundle::build(w, gains, ch, cfg);
    quad_form(&cov.r_total_rx, u_l) - 2.0 * cfg.p_dr_watt.sqrt() * inner(u_l, &gains[l]).re + 1.0
}

/// Normalized sensing beampattern `|u^H a_r(θ) a_t(θ)^H w|² / max`.
pub fn beampattern(u: &CVec, w: &CVec, theta_grid: &[f64]) -> Result<Vec<f64>> {
    if theta_grid.is_empty() {
        return Err(Error::DegeneratePattern);
    }
    let raw: Vec<f64> = theta_grid
        .iter()
        .map(|&t| {
            let rx = inner(u, &steering_vector(t, u.len()));
            let tx = inner(&steering_vector(t, w.len()), w);
            (rx * tx).norm_sqr()
        })
        .collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::DegeneratePattern);
    }
    Ok(raw.into_iter().map(|g| g / peak).collect())
}
