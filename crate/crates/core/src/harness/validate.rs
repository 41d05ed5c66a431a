//! Runtime invariant checks over a few seeded instances.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ao::algorithm3;
use crate::channel::draw_instance;
use crate::config::SystemConfig;
use crate::error::Result;
use crate::metrics::{beampattern, max_sensing_sinr, sensing_sinr};
use crate::model::StarCoefficients;
use crate::wmmse::{algorithm1, default_w_init};

use super::experiments::{init_rng, run_beampattern};
use super::oracle::{grid_oracle, tiny_config};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGap {
    pub seed: u64,
    pub ao: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub oracle_gaps: Vec<OracleGap>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        writeln!(f, "tiny-instance oracle (Nt = Nr = N = 2, L = 1, M = 1):")?;
        for g in &self.oracle_gaps {
            writeln!(f, "  seed {}: AO {:.6e}  oracle {:.6e}  ratio {:.6}", g.seed, g.ao, g.oracle, g.ao / g.oracle)?;
        }
        Ok(())
    }
}

/// Unit-energy split and amplitude bounds on every element.
pub fn check_energy(star: &StarCoefficients) -> Check {
    match star.validate() {
        Ok(()) => Check::new("energy_conservation", true, format!("max |β_t + β_r − 1| = {:.1e}", star.max_energy_violation())),
        Err(e) => Check::new("energy_conservation", false, e.to_string()),
    }
}

fn non_decreasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|p| p[1] >= p[0] - tol * p[0].abs().max(1.0))
}

/// Seeds checked per run.
pub const VALIDATE_DRAWS: u64 = 2;
/// Seeds for the oracle comparison.
pub const ORACLE_DRAWS: u64 = 3;
pub const ORACLE_GRID: usize = 24;

/// Solves a couple of instances of `cfg` and the tiny oracle instances,
/// checking every invariant the solvers promise.
pub fn run_validate(cfg: &SystemConfig) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    checks.push(match cfg.validate() {
        Ok(()) => Check::new("config", true, "valid"),
        Err(e) => Check::new("config", false, e.to_string()),
    });
    if !checks[0].passed {
        return Ok(ValidationReport { checks, oracle_gaps: Vec::new() });
    }

    for d in 0..VALIDATE_DRAWS {
        let seed = cfg.rng_seed.wrapping_add(d);
        let tag = |s: &str| format!("{s}[seed {seed}]");
        let (g1, ch) = draw_instance(cfg, seed)?;
        let (g2, ch2) = draw_instance(cfg, seed)?;
        checks.push(Check::new(&tag("channel_determinism"), g1 == g2 && ch == ch2, "two draws from one seed"));

        let star0 = StarCoefficients::equal_split(vec![0.0; cfg.n_ris], vec![0.0; cfg.n_ris])?;
        match algorithm1(&default_w_init(&ch, cfg), &star0, &ch, cfg) {
            Ok(st) => checks.push(Check::new(
                &tag("wmmse_monotone"),
                non_decreasing(&st.trajectory, 1e-9),
                format!("{} iterations", st.iterations),
            )),
            Err(e) => checks.push(Check::new(&tag("wmmse_monotone"), false, e.to_string())),
        }

        let rep = match algorithm3(cfg, &ch, &mut init_rng(seed)) {
            Ok(r) => r,
            Err(e) => {
                checks.push(Check::new(&tag("alternating_solve"), false, e.to_string()));
                continue;
            }
        };
        checks.push(Check::new(
            &tag("outer_monotone"),
            non_decreasing(&rep.outer_trajectory, 1e-9),
            format!("{} outer iterations, {}", rep.outer_trajectory.len(), rep.termination.as_str()),
        ));
        let surrogate_ok = rep.iterations.iter().all(|it| {
            it.surrogate_trajectory.windows(2).all(|p| p[1] <= p[0] + 1e-9 * p[0].abs().max(1.0))
        });
        checks.push(Check::new(&tag("surrogate_monotone"), surrogate_ok, "every surface solve"));
        let tr_t: f64 = rep.star.amp_t.iter().sum();
        let tr_r: f64 = rep.star.amp_r.iter().sum();
        checks.push(Check::new(
            &tag("surface_rank_one"),
            rep.residual_t <= cfg.rank_tol_rel * tr_t.max(1e-300) + 1e-12
                && rep.residual_r <= cfg.rank_tol_rel * tr_r.max(1e-300) + 1e-12,
            format!("residuals {:.1e} / {:.1e}", rep.residual_t, rep.residual_r),
        ));
        let mut energy = check_energy(&rep.star);
        energy.name = tag(&energy.name);
        checks.push(energy);
        checks.push(Check::new(
            &tag("power_budget"),
            rep.rates.total_power() <= cfg.p_bs_watt * (1.0 + 1e-6),
            format!("{:.4e} of {:.4e} W", rep.rates.total_power(), cfg.p_bs_watt),
        ));
        checks.push(Check::new(
            &tag("sensing_threshold"),
            rep.sensing_sinr >= cfg.gamma_rad_linear * (1.0 - 1e-6),
            format!("{:.3} dB", rep.sensing_sinr_db()),
        ));
        let w = rep.beamformers.w_vec();
        let u = rep.beamformers.u_vec();
        let (achieved, best) = (sensing_sinr(&u, &w, &ch, cfg)?, max_sensing_sinr(&w, &ch, cfg)?);
        checks.push(Check::new(
            &tag("mmse_sensing_receiver"),
            (achieved / best - 1.0).abs() <= 1e-8,
            format!("relative gap {:.1e}", achieved / best - 1.0),
        ));
        let grid: Vec<f64> = (-89..=89).map(|a| (a as f64).to_radians()).collect();
        let pattern_ok = beampattern(&u, &w, &grid)
            .map(|g| g.iter().copied().fold(0.0, f64::max) == 1.0)
            .unwrap_or(false);
        checks.push(Check::new(&tag("beampattern_normalized"), pattern_ok, "peak equals 1"));
    }

    if let Ok((rows, _)) = run_beampattern(cfg, cfg.rng_seed, crate::baselines::SchemeKind::ProposedStar) {
        let peak = rows.iter().max_by(|a, b| a.gain.total_cmp(&b.gain)).map(|r| r.angle_deg).unwrap_or(i32::MAX);
        checks.push(Check::new("beampattern_exported", rows.len() == 179, format!("peak at {peak}°")));
    }

    let tiny = tiny_config();
    let mut oracle_gaps = Vec::new();
    for s in 0..ORACLE_DRAWS {
        let seed = cfg.rng_seed.wrapping_add(s);
        let (_, ch) = draw_instance(&tiny, seed)?;
        let name = format!("tiny_oracle_bound[seed {seed}]");
        match (grid_oracle(&tiny, &ch, ORACLE_GRID), algorithm3(&tiny, &ch, &mut init_rng(seed))) {
            (Ok(o), Ok(rep)) => {
                let ao = rep.sum_rate();
                checks.push(Check::new(
                    &name,
                    ao <= o.value * (1.0 + 1e-6),
                    format!("AO / oracle = {:.6}", ao / o.value),
                ));
                oracle_gaps.push(OracleGap { seed, ao, oracle: o.value });
            }
            (Err(e), _) | (_, Err(e)) => checks.push(Check::new(&name, false, e.to_string())),
        }
    }
    Ok(ValidationReport { checks, oracle_gaps })
}
