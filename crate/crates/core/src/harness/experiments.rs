//! Convergence traces, Monte Carlo sweeps and beampatterns.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{algorithm3, SolveReport};
use crate::baselines::{run_scheme, SchemeKind};
use crate::channel::{draw_instance, seeded_rng, Rng64};
use crate::config::{dbm_to_watt, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::beampattern;

use super::{fmt_float, ConvergenceSpec, SweepParam, SweepSpec};

/// Solver initialization stream for a draw: same seed as the channels,
/// separate ChaCha stream, identical for every scheme.
pub fn init_rng(seed: u64) -> Rng64 {
    let mut rng = seeded_rng(seed);
    rng.set_stream(1);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: SchemeKind,
    pub value: f64,
    pub draw: usize,
    /// bit/s; zero when the solve failed.
    pub sum_rate: f64,
    pub sensing_sinr_db: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub termination: String,
    pub error: Option<String>,
}

impl ResultRow {
    fn from_outcome(scheme: SchemeKind, value: f64, draw: usize, out: Result<SolveReport>) -> Self {
        match out {
            Ok(rep) => Self {
                scheme,
                value,
                draw,
                sum_rate: rep.sum_rate(),
                sensing_sinr_db: if scheme.senses() { rep.sensing_sinr_db() } else { f64::NEG_INFINITY },
                iterations: rep.outer_trajectory.len(),
                wall_time_s: rep.total_seconds,
                termination: rep.termination.as_str().to_string(),
                error: None,
            },
            Err(e) => Self {
                scheme,
                value,
                draw,
                sum_rate: 0.0,
                sensing_sinr_db: f64::NAN,
                iterations: 0,
                wall_time_s: 0.0,
                termination: "error".into(),
                error: Some(e.to_string()),
            },
        }
    }
}

/// Runs every scheme on every `(value, draw)` pair. Schemes at the same
/// pair see the same channels and the same initial phases. Solver failures
/// become annotated rows; configuration errors abort the sweep.
pub fn run_sweep(spec: &SweepSpec, cfg: &SystemConfig) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if spec.param == SweepParam::None {
        return Err(Error::Config("a sweep needs a parameter; use run_convergence for traces".into()));
    }
    let cfgs = spec
        .values
        .iter()
        .map(|&v| spec.param.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    for c in &cfgs {
        for k in &spec.schemes {
            k.template(c.n_ris)?;
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cfgs.len())
        .flat_map(|vi| (0..spec.draws).map(move |d| (vi, d)))
        .collect();
    let per_task = tasks
        .par_iter()
        .map(|&(vi, d)| {
            let c = &cfgs[vi];
            let seed = spec.seed.wrapping_add(d as u64);
            let (_, ch) = draw_instance(c, seed)?;
            let rows: Vec<ResultRow> = spec
                .schemes
                .iter()
                .map(|&k| {
                    let out = run_scheme(k, c, &ch, &mut init_rng(seed));
                    if let Err(e) = &out {
                        log::warn!("{k} at {}={} draw {d}: {e}", spec.param.as_str(), spec.values[vi]);
                    }
                    ResultRow::from_outcome(k, spec.values[vi], d, out)
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = per_task.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.value.total_cmp(&b.value))
            .then(a.draw.cmp(&b.draw))
    });
    Ok(rows)
}

/// Mean and standard error of one `(scheme, value)` cell, in Mbit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: SchemeKind,
    pub value: f64,
    /// Draws that solved without error.
    pub draws: usize,
    pub mean_mbps: f64,
    pub stderr_mbps: f64,
    pub mean_sensing_sinr_db: f64,
}

/// Aggregates rows in their existing order; failed draws are left out.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let (k, v) = (rows[i].scheme, rows[i].value);
        let mut j = i;
        while j < rows.len() && rows[j].scheme == k && rows[j].value == v {
            j += 1;
        }
        let ok: Vec<&ResultRow> = rows[i..j].iter().filter(|r| r.error.is_none()).collect();
        let n = ok.len();
        let rates: Vec<f64> = ok.iter().map(|r| r.sum_rate / 1e6).collect();
        let mean = if n == 0 { f64::NAN } else { rates.iter().sum::<f64>() / n as f64 };
        let stderr = if n < 2 {
            0.0
        } else {
            let var = rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        let sinr = if n == 0 { f64::NAN } else { ok.iter().map(|r| r.sensing_sinr_db).sum::<f64>() / n as f64 };
        out.push(SummaryRow { scheme: k, value: v, draws: n, mean_mbps: mean, stderr_mbps: stderr, mean_sensing_sinr_db: sinr });
        i = j;
    }
    out
}

/// Raw rows without wall time, so identical inputs give identical bytes.
pub fn write_sweep(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "value", "draw", "sum_rate_bps", "sensing_sinr_db", "iterations", "termination", "error"])?;
    for r in rows {
        w.write_record([
            r.scheme.as_str().to_string(),
            fmt_float(r.value),
            r.draw.to_string(),
            fmt_float(r.sum_rate),
            fmt_float(r.sensing_sinr_db),
            r.iterations.to_string(),
            r.termination.clone(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "value", "draw", "wall_time_s"])?;
    for r in rows {
        w.write_record([r.scheme.as_str().to_string(), fmt_float(r.value), r.draw.to_string(), fmt_float(r.wall_time_s)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "value", "draws", "mean_sum_rate_mbps", "stderr_mbps", "mean_sensing_sinr_db"])?;
    for r in rows {
        w.write_record([
            r.scheme.as_str().to_string(),
            fmt_float(r.value),
            r.draws.to_string(),
            fmt_float(r.mean_mbps),
            fmt_float(r.stderr_mbps),
            fmt_float(r.mean_sensing_sinr_db),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One outer iteration of one trace. Traces are padded to `ao_max_iter`
/// with their final value; padded rows have `converged = true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_dr: usize,
    pub p_dr_dbm: f64,
    pub draw: usize,
    pub iteration: usize,
    pub sum_rate: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// Proposed-scheme outer trajectories for every `(L, P_u)` pair and draw.
pub fn run_convergence(spec: &ConvergenceSpec, cfg: &SystemConfig) -> Result<Vec<ConvergenceRow>> {
    let mut tasks = Vec::new();
    for &l in &spec.n_dr {
        for &p in &spec.p_dr_dbm {
            let c = SystemConfig { n_dr: l, p_dr_watt: dbm_to_watt(p), ..cfg.clone() };
            c.validate()?;
            for d in 0..spec.draws {
                tasks.push((c.clone(), l, p, d));
            }
        }
    }
    let per_task = tasks
        .par_iter()
        .map(|(c, l, p, d)| {
            let seed = spec.seed.wrapping_add(*d as u64);
            let (_, ch) = draw_instance(c, seed)?;
            let rows = match algorithm3(c, &ch, &mut init_rng(seed)) {
                Ok(rep) => {
                    let traj = &rep.outer_trajectory;
                    let last = *traj.last().unwrap_or(&0.0);
                    (0..c.ao_max_iter.max(traj.len()))
                        .map(|i| ConvergenceRow {
                            n_dr: *l,
                            p_dr_dbm: *p,
                            draw: *d,
                            iteration: i + 1,
                            sum_rate: traj.get(i).copied().unwrap_or(last),
                            converged: i >= traj.len(),
                            error: None,
                        })
                        .collect()
                }
                Err(e) => vec![ConvergenceRow {
                    n_dr: *l,
                    p_dr_dbm: *p,
                    draw: *d,
                    iteration: 0,
                    sum_rate: f64::NAN,
                    converged: false,
                    error: Some(e.to_string()),
                }],
            };
            Ok(rows)
        })
        .collect::<Result<Vec<Vec<ConvergenceRow>>>>()?;
    Ok(per_task.into_iter().flatten().collect())
}

pub fn write_convergence(rows: &[ConvergenceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_dr", "p_dr_dbm", "draw", "iteration", "sum_rate_bps", "converged", "error"])?;
    for r in rows {
        w.write_record([
            r.n_dr.to_string(),
            fmt_float(r.p_dr_dbm),
            r.draw.to_string(),
            r.iteration.to_string(),
            fmt_float(r.sum_rate),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeampatternRow {
    pub angle_deg: i32,
    /// Normalized to the largest value on the grid.
    pub gain: f64,
    pub gain_db: f64,
    /// `target`, `interferer` or empty.
    pub marker: String,
}

/// Solves draw `seed` with `scheme` and samples the transmit-receive
/// pattern of the result at every whole degree in `(−90°, 90°)`.
pub fn run_beampattern(cfg: &SystemConfig, seed: u64, scheme: SchemeKind) -> Result<(Vec<BeampatternRow>, SolveReport)> {
    let (geom, ch) = draw_instance(cfg, seed)?;
    let rep = run_scheme(scheme, cfg, &ch, &mut init_rng(seed))?;
    let angles: Vec<i32> = (-89..=89).collect();
    let grid: Vec<f64> = angles.iter().map(|&a| (a as f64).to_radians()).collect();
    let gains = beampattern(&rep.beamformers.u_vec(), &rep.beamformers.w_vec(), &grid)?;
    let near = |a: i32, t: f64| (a as f64 - t.to_degrees()).abs() < 0.5;
    let rows = angles
        .iter()
        .zip(gains)
        .map(|(&a, g)| BeampatternRow {
            angle_deg: a,
            gain: g,
            gain_db: 10.0 * g.log10(),
            marker: if near(a, geom.theta_target) {
                "target".into()
            } else if geom.thetas_interf.iter().any(|&t| near(a, t)) {
                "interferer".into()
            } else {
                String::new()
            },
        })
        .collect();
    Ok((rows, rep))
}

pub fn write_beampattern(rows: &[BeampatternRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "gain", "gain_db", "marker"])?;
    for r in rows {
        w.write_record([r.angle_deg.to_string(), fmt_float(r.gain), fmt_float(r.gain_db), r.marker.clone()])?;
    }
    w.flush()?;
    Ok(())
}
