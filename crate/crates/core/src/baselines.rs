//! Comparison schemes as constrained variants of the main pipeline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ao::{run_pipeline, SolveReport};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::ChannelSet;
use crate::star::DiagTemplate;
use crate::wmmse::SensingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ProposedStar,
    /// One transmit-only and one reflect-only surface of `N/2` elements each.
    ConventionalRis,
    EqualSplitStar,
    /// No sensing; the whole budget goes to computation.
    OffloadingOnly,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] =
        [Self::ProposedStar, Self::ConventionalRis, Self::EqualSplitStar, Self::OffloadingOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ProposedStar => "proposed_star",
            Self::ConventionalRis => "conventional_ris",
            Self::EqualSplitStar => "equal_split_star",
            Self::OffloadingOnly => "offloading_only",
        }
    }

    pub fn senses(self) -> bool {
        self != Self::OffloadingOnly
    }

    pub fn sensing_mode(self) -> SensingMode {
        if self.senses() {
            SensingMode::Required
        } else {
            SensingMode::Off
        }
    }

    pub fn template(self, n: usize) -> Result<DiagTemplate> {
        match self {
            Self::ProposedStar | Self::OffloadingOnly => Ok(DiagTemplate::SumToOne),
            Self::ConventionalRis => conventional_ris_template(n),
            Self::EqualSplitStar => Ok(equal_split_template(n)),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// `diag(V_t) = (1,…,1,0,…,0)`, `diag(V_r) = (0,…,0,1,…,1)`.
pub fn conventional_ris_template(n: usize) -> Result<DiagTemplate> {
    if n % 2 != 0 {
        return Err(Error::Config(format!("conventional RIS needs an even element count, got {n}")));
    }
    let t: Vec<f64> = (0..n).map(|k| if k < n / 2 { 1.0 } else { 0.0 }).collect();
    let r = t.iter().map(|x| 1.0 - x).collect();
    Ok(DiagTemplate::Fixed { t, r })
}

/// `diag(V_t) = diag(V_r) = 1/2`.
pub fn equal_split_template(n: usize) -> DiagTemplate {
    DiagTemplate::Fixed { t: vec![0.5; n], r: vec![0.5; n] }
}

pub fn offloading_only_pipeline(cfg: &SystemConfig, ch: &ChannelSet, rng: &mut impl Rng) -> Result<SolveReport> {
    run_scheme(SchemeKind::OffloadingOnly, cfg, ch, rng)
}

pub fn run_scheme(kind: SchemeKind, cfg: &SystemConfig, ch: &ChannelSet, rng: &mut impl Rng) -> Result<SolveReport> {
    let template = kind.template(cfg.n_ris)?;
    run_pipeline(cfg, ch, rng, &template, kind.sensing_mode())
}
