//! Physical and algorithmic parameters.
//!
//! Everything is stored in linear SI units. Decibel quantities are
//! converted exactly once, when a profile is built or a config file is
//! loaded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Logarithm base of the achievable-rate expressions.
///
/// `Two` gives rates in bit/s, which is what the cycles-per-bit compute
/// model expects. `E` reproduces the natural-log expressions literally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    pub fn ln_base(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }
}

/// How decision robots are distributed over the two sides of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSplit {
    /// Half of the robots in the transmission region, half in the reflection region.
    Equal,
    AllTransmission,
    AllReflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small instance sized for CI and the acceptance suite.
    Desk,
    /// The full-size simulation setup.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_ris: usize,
    pub n_dr: usize,
    pub n_interferer: usize,
    pub dr_split: SideSplit,

    pub bandwidth_hz: f64,
    pub p_dr_watt: f64,
    pub p_bs_watt: f64,
    pub noise_watt: f64,
    pub gamma_rad_linear: f64,
    /// Effective switched capacitance of the edge CPU, W·s³/cycle³.
    pub kappa: f64,
    pub phi_cycles_per_bit: f64,

    pub rician_factor_linear: f64,
    pub pathloss_exp: f64,
    /// Path loss at the 1 m reference distance.
    pub ref_loss_linear: f64,

    /// Rank penalty weight, shared by both sides of the surface.
    pub penalty_rho: f64,
    /// Weight of the SINR-margin reward in the surface program, relative to
    /// `penalty_rho`. Zero turns the program into a pure feasibility search.
    pub slack_weight: f64,

    pub wmmse_tol: f64,
    pub wmmse_max_iter: usize,
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    pub ao_tol: f64,
    pub ao_max_iter: usize,
    /// Penalty residual accepted as rank one, relative to the trace.
    pub rank_tol_rel: f64,
    /// Relative shrink applied to the SINR targets of the surface program.
    pub target_cushion: f64,

    pub rate_log_base: LogBase,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SystemConfig {
    /// Full-size setup: 8×8 base station, 40 elements, 4 robots, 4 clutter sources.
    pub fn paper() -> Self {
        Self {
            n_tx: 8,
            n_rx: 8,
            n_ris: 40,
            n_dr: 4,
            n_interferer: 4,
            dr_split: SideSplit::Equal,
            bandwidth_hz: 20e6,
            p_dr_watt: dbm_to_watt(10.0),
            p_bs_watt: dbm_to_watt(30.0),
            noise_watt: dbm_to_watt(-90.0),
            gamma_rad_linear: db_to_linear(30.0),
            kappa: 1e-26,
            phi_cycles_per_bit: 3e3,
            rician_factor_linear: db_to_linear(3.0),
            pathloss_exp: 2.2,
            ref_loss_linear: db_to_linear(-30.0),
            penalty_rho: 1e3,
            slack_weight: 10.0,
            wmmse_tol: 1e-4,
            wmmse_max_iter: 50,
            sca_tol: 1e-4,
            sca_max_iter: 30,
            ao_tol: 1e-3,
            ao_max_iter: 20,
            rank_tol_rel: 1e-6,
            target_cushion: 1e-6,
            rate_log_base: LogBase::Two,
            rng_seed: 1,
        }
    }

    /// Desk-scale setup used by CI. Same physics as [`SystemConfig::paper`]
    /// on a smaller array, with a narrower offloading band so that link
    /// capacity and compute power compete inside the swept budget range.
    pub fn desk() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            n_ris: 8,
            n_dr: 2,
            n_interferer: 2,
            bandwidth_hz: DESK_BANDWIDTH_HZ,
            ..Self::paper()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Sensing threshold expressed as an equivalent-link rate in nats.
    pub fn sensing_rate_nats(&self) -> f64 {
        self.gamma_rad_linear.ln_1p()
    }

    /// κφ³: watts needed per (bit/s)³ of computation.
    pub fn compute_coeff(&self) -> f64 {
        self.kappa * self.phi_cycles_per_bit.powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("n_ris", self.n_ris),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("p_dr_watt", self.p_dr_watt),
            ("p_bs_watt", self.p_bs_watt),
            ("noise_watt", self.noise_watt),
            ("gamma_rad_linear", self.gamma_rad_linear),
            ("kappa", self.kappa),
            ("phi_cycles_per_bit", self.phi_cycles_per_bit),
            ("ref_loss_linear", self.ref_loss_linear),
            ("penalty_rho", self.penalty_rho),
            ("wmmse_tol", self.wmmse_tol),
            ("sca_tol", self.sca_tol),
            ("ao_tol", self.ao_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.rician_factor_linear >= 0.0) || !(self.pathloss_exp >= 0.0) {
            return Err(Error::Config("rician factor and path-loss exponent must be >= 0".into()));
        }
        if !(self.slack_weight >= 0.0) || !(self.target_cushion >= 0.0) || !(self.rank_tol_rel > 0.0) {
            return Err(Error::Config("slack_weight, target_cushion must be >= 0 and rank_tol_rel > 0".into()));
        }
        if self.wmmse_max_iter == 0 || self.sca_max_iter == 0 || self.ao_max_iter == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if self.n_interferer > crate::channel::INTERFERER_ANGLES.len() {
            return Err(Error::Config(format!(
                "at most {} interferers are supported",
                crate::channel::INTERFERER_ANGLES.len()
            )));
        }
        if self.dr_split == SideSplit::Equal && self.n_dr % 2 != 0 {
            return Err(Error::Config(format!(
                "equal side split needs an even robot count, got {}",
                self.n_dr
            )));
        }
        Ok(())
    }
}

/// Offloading bandwidth of the desk profile.
pub const DESK_BANDWIDTH_HZ: f64 = 40e3;
