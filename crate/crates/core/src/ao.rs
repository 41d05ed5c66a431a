//! Outer alternation between the beamformer/rate solver and the surface
//! solver.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::metrics::max_sensing_sinr;
use crate::model::{effective_uplink_channels, BeamformerSet, ChannelSet, RateAllocation, StarCoefficients};
use crate::star::{build_offload_targets, optimize_star, DiagTemplate, StarWarning};
use crate::wmmse::{algorithm1_with, beamformers_at, best_rates_for_beam, default_w_init, SensingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Relative sum-rate increase fell below `ao_tol`.
    Converged,
    IterationCap,
    /// The surface program missed the rank-one tolerance twice in a row.
    RankNotConverged,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterationCap => "iteration_cap",
            Self::RankNotConverged => "rank_not_converged",
        }
    }
}

/// What happened in one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub inner_trajectory: Vec<f64>,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub sca_iterations: usize,
    pub surrogate_trajectory: Vec<f64>,
    pub residual_t: f64,
    pub residual_r: f64,
    /// Largest relative SINR shortfall after rank-one extraction.
    pub extraction_loss: f64,
    /// False when the new surface would have lowered the sum rate (or the
    /// surface program failed) and the previous one was kept.
    pub star_accepted: bool,
    pub star_warnings: Vec<StarWarning>,
    /// Why the surface program was skipped, if it was.
    pub star_error: Option<String>,
    pub sum_rate: f64,
    pub wmmse_seconds: f64,
    pub star_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Sum rate after every outer iteration.
    pub outer_trajectory: Vec<f64>,
    pub iterations: Vec<OuterRecord>,
    pub beamformers: BeamformerSet,
    pub star: StarCoefficients,
    pub rates: RateAllocation,
    /// Best-receiver sensing SINR of the final beam (linear).
    pub sensing_sinr: f64,
    pub residual_t: f64,
    pub residual_r: f64,
    pub total_seconds: f64,
    pub termination: TerminationReason,
}

impl SolveReport {
    pub fn sum_rate(&self) -> f64 {
        self.rates.sum_rate
    }

    pub fn sensing_sinr_db(&self) -> f64 {
        10.0 * self.sensing_sinr.log10()
    }
}

/// Initial point for the diagonal template: template amplitudes (equal
/// split for the free template), i.i.d. uniform phases and the default beam.
pub fn initialize_for(
    template: &DiagTemplate,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
) -> Result<(crate::linalg::CVec, StarCoefficients)> {
    let n = cfg.n_ris;
    let mut phase = || -> Vec<f64> { (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect() };
    let (phase_t, phase_r) = (phase(), phase());
    let star = match template {
        DiagTemplate::SumToOne => StarCoefficients::equal_split(phase_t, phase_r)?,
        DiagTemplate::Fixed { t, r } => StarCoefficients::new(t.clone(), r.clone(), phase_t, phase_r)?,
    };
    Ok((default_w_init(ch, cfg), star))
}

/// Equal-split surface with uniform phases and the default beam.
pub fn initialize(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
) -> Result<(crate::linalg::CVec, StarCoefficients)> {
    initialize_for(&DiagTemplate::SumToOne, cfg, ch, rng)
}

/// Outer loop for the proposed scheme.
pub fn algorithm3(cfg: &SystemConfig, ch: &ChannelSet, rng: &mut impl Rng) -> Result<SolveReport> {
    run_pipeline(cfg, ch, rng, &DiagTemplate::SumToOne, SensingMode::Required)
}

/// Outer loop with a given diagonal template and sensing mode.
pub fn run_pipeline(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
    template: &DiagTemplate,
    mode: SensingMode,
) -> Result<SolveReport> {
    cfg.validate()?;
    ch.check_dims(cfg)?;
    let started = Instant::now();
    let (w0, mut star) = initialize_for(template, cfg, ch, rng)?;
    let mut w = w0;
    let mut rates: Option<Vec<f64>> = None;
    let mut outer_trajectory = Vec::new();
    let mut records = Vec::new();
    let mut termination = TerminationReason::IterationCap;
    let mut rank_misses = 0;
    let (mut residual_t, mut residual_r) = (0.0, 0.0);

    for _ in 0..cfg.ao_max_iter {
        let t0 = Instant::now();
        let st = algorithm1_with(&w, &star, ch, cfg, mode, rates.as_deref())?;
        let wmmse_seconds = t0.elapsed().as_secs_f64();
        w = st.bf.w_vec();
        let mut r_cur = st.rates.r_dr.clone();
        let mut sum: f64 = r_cur.iter().sum();

        let t1 = Instant::now();
        let targets = build_offload_targets(&r_cur, &st.bf, ch, cfg);
        let mut record = OuterRecord {
            inner_trajectory: st.trajectory.clone(),
            inner_iterations: st.iterations,
            inner_converged: st.converged,
            sca_iterations: 0,
            surrogate_trajectory: Vec::new(),
            residual_t: 0.0,
            residual_r: 0.0,
            extraction_loss: 0.0,
            star_accepted: false,
            star_warnings: Vec::new(),
            star_error: None,
            sum_rate: sum,
            wmmse_seconds,
            star_seconds: 0.0,
        };
        let mut rank_missed = false;
        match optimize_star(&star, &targets, template, cfg) {
            Ok((cand, ls, loss)) => {
                record.sca_iterations = ls.iterations;
                record.surrogate_trajectory = ls.surrogate_trajectory.clone();
                record.residual_t = ls.residual_t;
                record.residual_r = ls.residual_r;
                record.extraction_loss = loss;
                record.star_warnings = ls.warnings.clone();
                rank_missed = ls.warnings.iter().any(|x| matches!(x, StarWarning::RankNotConverged { .. }));
                // Rates re-evaluated from scratch on the extracted surface.
                let gains = effective_uplink_channels(ch, &cand);
                let r_new = best_rates_for_beam(&w, &gains, ch, cfg)?;
                let s_new: f64 = r_new.iter().sum();
                if s_new >= sum {
                    star = cand;
                    r_cur = r_new;
                    sum = s_new;
                    record.star_accepted = true;
                    residual_t = ls.residual_t;
                    residual_r = ls.residual_r;
                }
            }
            Err(e @ (Error::StarInfeasible(_) | Error::Solver(_))) => {
                log::warn!("surface update skipped: {e}");
                record.star_error = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
        record.star_seconds = t1.elapsed().as_secs_f64();
        record.sum_rate = sum;
        records.push(record);

        let prev = outer_trajectory.last().copied();
        outer_trajectory.push(sum);
        rates = Some(r_cur);
        rank_misses = if rank_missed { rank_misses + 1 } else { 0 };
        if rank_misses >= 2 {
            termination = TerminationReason::RankNotConverged;
            break;
        }
        if let Some(p) = prev {
            if sum - p <= cfg.ao_tol * p.abs() {
                termination = TerminationReason::Converged;
                break;
            }
        }
    }

    let gains = effective_uplink_channels(ch, &star);
    let beamformers = beamformers_at(&w, &gains, ch, cfg)?;
    let r = rates.unwrap_or_else(|| vec![0.0; ch.n_dr()]);
    let rates = RateAllocation::new(r, norm_sq(&w), cfg);
    let sensing_sinr = match mode {
        SensingMode::Required => max_sensing_sinr(&w, ch, cfg)?,
        SensingMode::Off => 0.0,
    };
    Ok(SolveReport {
        outer_trajectory,
        iterations: records,
        beamformers,
        star,
        rates,
        sensing_sinr,
        residual_t,
        residual_r,
        total_seconds: started.elapsed().as_secs_f64(),
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_instance, seeded_rng};
    use crate::metrics::{link_capacity, max_uplink_sinr};

    #[test]
    fn initialization_rules() {
        let cfg = SystemConfig::desk();
        let (_, ch) = draw_instance(&cfg, 1).unwrap();
        let (w0, star) = initialize(&cfg, &ch, &mut seeded_rng(5)).unwrap();
        assert!(star.amp_t.iter().chain(&star.amp_r).all(|&a| a == 0.5));
        assert!((norm_sq(&w0) - 0.9 * cfg.p_bs_watt).abs() <= 1e-12 * cfg.p_bs_watt);
        let (_, again) = initialize(&cfg, &ch, &mut seeded_rng(5)).unwrap();
        assert_eq!(star, again);
    }

    #[test]
    fn single_outer_iteration() {
        let cfg = SystemConfig { ao_max_iter: 1, ..SystemConfig::desk() };
        let (_, ch) = draw_instance(&cfg, 2).unwrap();
        let rep = algorithm3(&cfg, &ch, &mut seeded_rng(2)).unwrap();
        assert_eq!(rep.outer_trajectory.len(), 1);
        assert_eq!(rep.iterations.len(), 1);
        assert_eq!(rep.termination, TerminationReason::IterationCap);
    }

    #[test]
    fn report_invariants_hold() {
        let cfg = SystemConfig::desk();
        let (_, ch) = draw_instance(&cfg, 3).unwrap();
        let rep = algorithm3(&cfg, &ch, &mut seeded_rng(3)).unwrap();
        for p in rep.outer_trajectory.windows(2) {
            assert!(p[1] >= p[0] - 1e-9);
        }
        assert!(rep.sensing_sinr >= cfg.gamma_rad_linear * (1.0 - 1e-6));
        assert!(rep.rates.total_power() <= cfg.p_bs_watt * (1.0 + 1e-6));
        rep.star.validate().unwrap();
        // Rates recomputed from scratch on the final point.
        let w = rep.beamformers.w_vec();
        let gains = effective_uplink_channels(&ch, &rep.star);
        for l in 0..gains.len() {
            let cap = link_capacity(max_uplink_sinr(l, &w, &gains, &ch, &cfg).unwrap(), &cfg);
            assert!(rep.rates.r_dr[l] <= cap * (1.0 + 1e-9));
        }
        assert_eq!(*rep.outer_trajectory.last().unwrap(), rep.sum_rate());
    }

    #[test]
    fn unreachable_threshold_is_reported() {
        let cfg = SystemConfig { gamma_rad_linear: crate::config::db_to_linear(120.0), ..SystemConfig::desk() };
        let (_, ch) = draw_instance(&cfg, 4).unwrap();
        let err = algorithm3(&cfg, &ch, &mut seeded_rng(4)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSensing { .. }), "{err}");
    }

    #[test]
    fn report_round_trips_through_json() {
        let cfg = SystemConfig { ao_max_iter: 1, ..SystemConfig::desk() };
        let (_, ch) = draw_instance(&cfg, 5).unwrap();
        let rep = algorithm3(&cfg, &ch, &mut seeded_rng(5)).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        let back: SolveReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.outer_trajectory, rep.outer_trajectory);
        assert_eq!(back.termination, rep.termination);
    }
}
