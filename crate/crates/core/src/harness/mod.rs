//! Experiment plumbing: config files, Monte Carlo sweeps, CSV export and
//! the validation runner.

mod experiments;
pub mod oracle;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SchemeKind;
use crate::config::{db_to_linear, dbm_to_watt, LogBase, Profile, SideSplit, SystemConfig};
use crate::error::{Error, Result};

pub use experiments::{
    init_rng, run_beampattern, run_convergence, run_sweep, summarize, write_beampattern, write_convergence, write_summary,
    write_sweep, write_timings, BeampatternRow, ConvergenceRow, ResultRow, SummaryRow,
};
pub use validate::{check_energy, run_validate, Check, ValidationReport};

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// BS power budget, values in dBm.
    PBs,
    /// Sensing threshold, values in dB.
    GammaRad,
    /// Surface element count.
    NRis,
    /// No sweep: outer-iteration trajectories instead.
    None,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PBs => "p_bs",
            Self::GammaRad => "gamma_rad",
            Self::NRis => "n_ris",
            Self::None => "none",
        }
    }

    /// `cfg` with the swept quantity set to `value`.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = cfg.clone();
        match self {
            Self::PBs => c.p_bs_watt = dbm_to_watt(value),
            Self::GammaRad => c.gamma_rad_linear = db_to_linear(value),
            Self::NRis => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("n_ris values must be positive integers, got {value}")));
                }
                c.n_ris = value as usize;
            }
            Self::None => {}
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub draws: usize,
    /// Draw `d` uses channel seed `seed + d`.
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.draws == 0 {
            return Err(Error::Config("sweep needs at least one draw".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one scheme".into()));
        }
        Ok(())
    }
}

/// `(L, P_u)` pairs traced by [`run_convergence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub n_dr: Vec<usize>,
    pub p_dr_dbm: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
}

impl ConvergenceSpec {
    pub fn default_with_seed(seed: u64) -> Self {
        Self { n_dr: vec![4, 8], p_dr_dbm: vec![10.0, 15.0], draws: 1, seed }
    }
}

/// Everything a CLI invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub sweep: Option<SweepSpec>,
    pub convergence: ConvergenceSpec,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let system = SystemConfig::for_profile(profile);
        let seed = system.rng_seed;
        Self { system, sweep: None, convergence: ConvergenceSpec::default_with_seed(seed) }
    }

    /// Reads a config file, if any, over the chosen profile. `profile` and
    /// `seed` override the file's values.
    pub fn load(path: Option<&Path>, profile: Option<Profile>, seed: Option<u64>) -> Result<Self> {
        let file = match path {
            Some(p) => toml::from_str::<ConfigFile>(&std::fs::read_to_string(p)?)?,
            None => ConfigFile::default(),
        };
        file.resolve(profile, seed)
    }

    pub fn from_toml(text: &str, profile: Option<Profile>, seed: Option<u64>) -> Result<Self> {
        toml::from_str::<ConfigFile>(text)?.resolve(profile, seed)
    }
}

/// On-disk layout: `SystemConfig` field names, with powers in dBm and
/// ratios in dB where the key says so.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<Profile>,
    seed: Option<u64>,
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    n_ris: Option<usize>,
    n_dr: Option<usize>,
    n_interferer: Option<usize>,
    dr_split: Option<SideSplit>,
    bandwidth_hz: Option<f64>,
    p_dr_dbm: Option<f64>,
    p_bs_dbm: Option<f64>,
    noise_dbm: Option<f64>,
    gamma_rad_db: Option<f64>,
    kappa: Option<f64>,
    phi_cycles_per_bit: Option<f64>,
    rician_factor_db: Option<f64>,
    pathloss_exp: Option<f64>,
    ref_loss_db: Option<f64>,
    penalty_rho: Option<f64>,
    slack_weight: Option<f64>,
    wmmse_tol: Option<f64>,
    wmmse_max_iter: Option<usize>,
    sca_tol: Option<f64>,
    sca_max_iter: Option<usize>,
    ao_tol: Option<f64>,
    ao_max_iter: Option<usize>,
    rank_tol_rel: Option<f64>,
    target_cushion: Option<f64>,
    rate_log_base: Option<LogBase>,
    sweep: Option<SweepFile>,
    convergence: Option<ConvergenceFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    param: SweepParam,
    values: Vec<f64>,
    schemes: Option<Vec<SchemeKind>>,
    draws: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergenceFile {
    n_dr: Option<Vec<usize>>,
    p_dr_dbm: Option<Vec<f64>>,
    draws: Option<usize>,
    seed: Option<u64>,
}

/// Draws per sweep point when the file does not say.
pub const DEFAULT_DRAWS: usize = 5;

impl ConfigFile {
    fn resolve(self, profile: Option<Profile>, seed: Option<u64>) -> Result<RunConfig> {
        let mut c = SystemConfig::for_profile(profile.or(self.profile).unwrap_or(Profile::Desk));
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.$field = v; })* };
        }
        set!(
            n_tx, n_rx, n_ris, n_dr, n_interferer, dr_split, bandwidth_hz, kappa, phi_cycles_per_bit,
            pathloss_exp, penalty_rho, slack_weight, wmmse_tol, wmmse_max_iter, sca_tol, sca_max_iter,
            ao_tol, ao_max_iter, rank_tol_rel, target_cushion, rate_log_base
        );
        if let Some(v) = self.p_dr_dbm {
            c.p_dr_watt = dbm_to_watt(v);
        }
        if let Some(v) = self.p_bs_dbm {
            c.p_bs_watt = dbm_to_watt(v);
        }
        if let Some(v) = self.noise_dbm {
            c.noise_watt = dbm_to_watt(v);
        }
        if let Some(v) = self.gamma_rad_db {
            c.gamma_rad_linear = db_to_linear(v);
        }
        if let Some(v) = self.rician_factor_db {
            c.rician_factor_linear = db_to_linear(v);
        }
        if let Some(v) = self.ref_loss_db {
            c.ref_loss_linear = db_to_linear(v);
        }
        if let Some(s) = seed.or(self.seed) {
            c.rng_seed = s;
        }
        c.validate()?;

        let sweep = self
            .sweep
            .map(|s| SweepSpec {
                param: s.param,
                values: s.values,
                schemes: s.schemes.unwrap_or_else(|| SchemeKind::ALL.to_vec()),
                draws: s.draws.unwrap_or(DEFAULT_DRAWS),
                seed: seed.or(s.seed).unwrap_or(c.rng_seed),
            })
            .map(|s| s.validate().map(|_| s))
            .transpose()?;
        let mut convergence = ConvergenceSpec::default_with_seed(c.rng_seed);
        if let Some(f) = self.convergence {
            if let Some(v) = f.n_dr {
                convergence.n_dr = v;
            }
            if let Some(v) = f.p_dr_dbm {
                convergence.p_dr_dbm = v;
            }
            if let Some(v) = f.draws {
                convergence.draws = v;
            }
            if let Some(v) = seed.or(f.seed) {
                convergence.seed = v;
            }
        }
        if convergence.draws == 0 || convergence.n_dr.is_empty() || convergence.p_dr_dbm.is_empty() {
            return Err(Error::Config("convergence needs robot counts, uplink powers and draws".into()));
        }
        Ok(RunConfig { system: c, sweep, convergence })
    }
}

/// Float formatting used by every CSV: 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_desk_profile() {
        let rc = RunConfig::from_toml("", None, None).unwrap();
        assert_eq!(rc.system, SystemConfig::desk());
        assert!(rc.sweep.is_none());
        assert_eq!(rc.convergence.n_dr, vec![4, 8]);
    }

    #[test]
    fn decibel_keys_are_converted() {
        let rc = RunConfig::from_toml("p_bs_dbm = 40\ngamma_rad_db = 20\nnoise_dbm = -80\nn_ris = 6", None, None).unwrap();
        assert!((rc.system.p_bs_watt - 10.0).abs() < 1e-12);
        assert!((rc.system.gamma_rad_linear - 100.0).abs() < 1e-9);
        assert!((rc.system.noise_watt - 1e-11).abs() < 1e-23);
        assert_eq!(rc.system.n_ris, 6);
    }

    #[test]
    fn overrides_win() {
        let text = "profile = \"desk\"\nseed = 4\n[sweep]\nparam = \"p_bs\"\nvalues = [20, 30]\nseed = 9";
        let rc = RunConfig::from_toml(text, Some(Profile::Paper), Some(77)).unwrap();
        assert_eq!(rc.system.n_ris, 40);
        assert_eq!(rc.system.rng_seed, 77);
        let s = rc.sweep.unwrap();
        assert_eq!(s.seed, 77);
        assert_eq!(s.draws, DEFAULT_DRAWS);
        assert_eq!(s.schemes, SchemeKind::ALL.to_vec());
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(RunConfig::from_toml("p_bs_watt = 1", None, None).is_err());
        assert!(RunConfig::from_toml("[sweep]\nparam = \"p_bs\"\nvalues = [30, 20]", None, None).is_err());
        assert!(RunConfig::from_toml("[sweep]\nparam = \"p_bs\"\nvalues = []", None, None).is_err());
        assert!(RunConfig::from_toml("[sweep]\nparam = \"n_ris\"\nvalues = [4]\ndraws = 0", None, None).is_err());
        assert!(RunConfig::from_toml("n_dr = 3", None, None).is_err());
    }

    #[test]
    fn sweep_values_apply() {
        let cfg = SystemConfig::desk();
        assert!((SweepParam::PBs.apply(&cfg, 20.0).unwrap().p_bs_watt - 0.1).abs() < 1e-15);
        assert_eq!(SweepParam::NRis.apply(&cfg, 12.0).unwrap().n_ris, 12);
        assert!(SweepParam::NRis.apply(&cfg, 2.5).is_err());
        assert_eq!(SweepParam::None.apply(&cfg, 1.0).unwrap(), cfg);
    }

    #[test]
    fn float_format_has_twelve_digits() {
        assert_eq!(fmt_float(123456.789), "1.23456789000e5");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
    }
}
