//! STAR-RIS aided integrated sensing, computing and communication.
//!
//! A full-duplex base station senses a target robot while decoding uplink
//! offloading traffic from decision robots that reach it through a
//! simultaneously transmitting and reflecting surface. The crate provides
//! the system model, the three nested solvers (WMMSE beamforming, a
//! penalised SDP for the surface coefficients, and the alternating outer
//! loop), the comparison schemes and a Monte Carlo harness.

// Links the system OpenBLAS used by the PSD cone kernels.
extern crate openblas_src;

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod star;
pub mod wmmse;

pub use ao::{algorithm3, initialize, SolveReport, TerminationReason};
pub use baselines::SchemeKind;
pub use channel::{place_geometry, realize_channels, Geometry};
pub use config::{LogBase, Profile, SideSplit, SystemConfig};
pub use error::{Error, Result};
pub use model::{BeamformerSet, ChannelSet, RateAllocation, Side, StarCoefficients};
