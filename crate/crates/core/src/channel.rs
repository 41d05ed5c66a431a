//! Deployment geometry and seeded channel realizations.
//!
//! Coordinates are in meters with the base station at the origin and its
//! arrays' broadside along +y. Angles at the base station are measured from
//! broadside (`atan2(x, y)`); angles at the surface from its normal.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI, TAU};

use crate::config::{SideSplit, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};
use crate::model::{build_sensing_channels, steering_vector, ChannelSet, Side};

pub const RIS_POSITION: [f64; 2] = [0.0, 20.0];
pub const TARGET_POSITION: [f64; 2] = [0.0, 10.0];
pub const DR_RADIUS: f64 = 5.0;
pub const INTERFERER_RADIUS: f64 = 10.0;
/// Clutter directions; a configuration with `M` interferers uses the first `M`.
pub const INTERFERER_ANGLES: [f64; 4] = [-FRAC_PI_3, -FRAC_PI_6, FRAC_PI_6, FRAC_PI_3];

pub type Rng64 = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub pos_bs: [f64; 2],
    pub pos_ris: [f64; 2],
    pub pos_tr: [f64; 2],
    pub pos_dr: Vec<[f64; 2]>,
    pub side: Vec<Side>,
    pub pos_interf: Vec<[f64; 2]>,
    pub theta_target: f64,
    pub thetas_interf: Vec<f64>,
    pub dist_bs_ris: f64,
    pub dist_ris_dr: Vec<f64>,
    pub dist_bs_tr: f64,
    pub dist_bs_interf: Vec<f64>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle of `p` seen from the base station, relative to broadside.
pub fn bs_angle(p: [f64; 2]) -> f64 {
    p[0].atan2(p[1])
}

/// Angle of `p` seen from the surface, relative to its normal, on whichever
/// side `p` lies.
pub fn ris_angle(p: [f64; 2]) -> f64 {
    let dx = p[0] - RIS_POSITION[0];
    let dy = p[1] - RIS_POSITION[1];
    dx.atan2(dy.abs())
}

fn side_of(l: usize, split: SideSplit) -> Side {
    match split {
        SideSplit::Equal if l % 2 == 0 => Side::Transmission,
        SideSplit::Equal => Side::Reflection,
        SideSplit::AllTransmission => Side::Transmission,
        SideSplit::AllReflection => Side::Reflection,
    }
}

/// Places the base station, surface, target, clutter and robots.
///
/// Robots sit on the radius-5 m circle around the surface at uniformly
/// drawn angles: `(0, π)` for the transmission side (`y > 20`) and
/// `(π, 2π)` for the reflection side.
pub fn place_geometry(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<Geometry> {
    if cfg.dr_split == SideSplit::Equal && cfg.n_dr % 2 != 0 {
        return Err(Error::Config(format!(
            "equal side split needs an even robot count, got {}",
            cfg.n_dr
        )));
    }
    if cfg.n_interferer > INTERFERER_ANGLES.len() {
        return Err(Error::Config(format!("at most {} interferers", INTERFERER_ANGLES.len())));
    }
    let pos_bs = [0.0, 0.0];
    let mut pos_dr = Vec::with_capacity(cfg.n_dr);
    let mut side = Vec::with_capacity(cfg.n_dr);
    for l in 0..cfg.n_dr {
        let s = side_of(l, cfg.dr_split);
        // Open interval so that no robot lands on the surface plane.
        let mut frac: f64 = rng.random();
        while frac == 0.0 {
            frac = rng.random();
        }
        let phi = match s {
            Side::Transmission => frac * PI,
            Side::Reflection => PI + frac * PI,
        };
        pos_dr.push([RIS_POSITION[0] + DR_RADIUS * phi.cos(), RIS_POSITION[1] + DR_RADIUS * phi.sin()]);
        side.push(s);
    }
    let thetas_interf: Vec<f64> = INTERFERER_ANGLES[..cfg.n_interferer].to_vec();
    let pos_interf: Vec<[f64; 2]> = thetas_interf
        .iter()
        .map(|t| [INTERFERER_RADIUS * t.sin(), INTERFERER_RADIUS * t.cos()])
        .collect();
    Ok(Geometry {
        pos_bs,
        pos_ris: RIS_POSITION,
        pos_tr: TARGET_POSITION,
        dist_ris_dr: pos_dr.iter().map(|p| dist(*p, RIS_POSITION)).collect(),
        dist_bs_interf: pos_interf.iter().map(|p| dist(*p, pos_bs)).collect(),
        pos_dr,
        side,
        theta_target: bs_angle(TARGET_POSITION),
        thetas_interf,
        pos_interf,
        dist_bs_ris: dist(pos_bs, RIS_POSITION),
        dist_bs_tr: dist(pos_bs, TARGET_POSITION),
    })
}

/// `β = D d^{-α}`.
pub fn path_loss(d: f64, cfg: &SystemConfig) -> f64 {
    debug_assert!(d > 0.0);
    cfg.ref_loss_linear * d.powf(-cfg.pathloss_exp)
}

/// Round-trip loss of a monostatic echo, `β_s = D (2d)^{-α}`.
pub fn sensing_path_loss(d: f64, cfg: &SystemConfig) -> f64 {
    path_loss(2.0 * d, cfg)
}

/// Circularly-symmetric complex Gaussian matrix with unit-variance entries.
pub fn complex_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// `√β (√(ε/(ε+1)) LoS + √(1/(ε+1)) NLoS)`.
///
/// `los` must be `rows × cols`. The NLoS part is always drawn so that the
/// RNG stream does not depend on `β` or `ε`.
pub fn rician_channel(rows: usize, cols: usize, beta: f64, epsilon: f64, los: &CMat, rng: &mut impl Rng) -> CMat {
    assert_eq!((los.nrows(), los.ncols()), (rows, cols), "LoS component has wrong shape");
    let nlos = complex_gaussian(rows, cols, rng);
    let (w_los, w_nlos) = if epsilon.is_infinite() {
        (1.0, 0.0)
    } else {
        ((epsilon / (epsilon + 1.0)).sqrt(), (1.0 / (epsilon + 1.0)).sqrt())
    };
    (los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(beta.sqrt())
}

/// Unit-modulus phase ramp of a linear array, `exp(j k sin θ)`.
pub fn phase_ramp(theta: f64, n: usize) -> CVec {
    steering_vector(theta, n) * C64::from((n as f64).sqrt())
}

/// Draws every channel of one coherence block.
pub fn realize_channels(cfg: &SystemConfig, geom: &Geometry, rng: &mut impl Rng) -> Result<ChannelSet> {
    let n = cfg.n_ris;
    let los_h = phase_ramp(ris_angle(geom.pos_bs), n) * phase_ramp(bs_angle(geom.pos_ris), cfg.n_rx).adjoint();
    let h_bs_ris = rician_channel(
        n,
        cfg.n_rx,
        path_loss(geom.dist_bs_ris, cfg),
        cfg.rician_factor_linear,
        &los_h,
        rng,
    );
    let mut h_ris_dr = Vec::with_capacity(geom.pos_dr.len());
    for (p, d) in geom.pos_dr.iter().zip(&geom.dist_ris_dr) {
        let los = CMat::from_column_slice(n, 1, phase_ramp(ris_angle(*p), n).as_slice());
        let h = rician_channel(n, 1, path_loss(*d, cfg), cfg.rician_factor_linear, &los, rng);
        h_ris_dr.push(h.column(0).into_owned());
    }
    let mut alphas = Vec::with_capacity(1 + geom.thetas_interf.len());
    for d in std::iter::once(&geom.dist_bs_tr).chain(&geom.dist_bs_interf) {
        let phase: f64 = rng.random::<f64>() * TAU;
        alphas.push(cis(phase) * sensing_path_loss(*d, cfg).sqrt());
    }
    let sensing = build_sensing_channels(geom.theta_target, &geom.thetas_interf, &alphas, cfg.n_rx, cfg.n_tx)?;
    Ok(ChannelSet {
        h_bs_ris,
        h_ris_dr,
        side: geom.side.clone(),
        a_target: sensing.a_target,
        a_interf: sensing.a_interf,
        a_total: sensing.a_total,
        alpha_coeffs: alphas,
    })
}

/// Geometry and channels of one Monte Carlo draw, fully determined by `seed`.
pub fn draw_instance(cfg: &SystemConfig, seed: u64) -> Result<(Geometry, ChannelSet)> {
    let mut rng = seeded_rng(seed);
    let geom = place_geometry(cfg, &mut rng)?;
    let ch = realize_channels(cfg, &geom, &mut rng)?;
    Ok((geom, ch))
}
