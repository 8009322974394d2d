//! Artificial-noise precoder design for physical-layer security in
//! multi-luminaire visible light communication links with LED clipping.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: room layout, Lambertian line-of-sight gains and
//!   grid-averaged eavesdropper channel statistics.
//! * [`clipping`]: Bussgang statistics of a clipped zero-mean Gaussian drive
//!   current, plus a sampling oracle.
//! * [`link`]: receiver noise, one- and two-branch SINRs, the average-Eve
//!   surrogate and secrecy rates.
//! * [`qcqp`]: a dense log-barrier interior-point solver for convex QCQPs.
//! * [`designer`]: fixed-operating-point surrogates, Charnes-Cooper
//!   reduction and the convex-concave procedure.
//! * [`montecarlo`]: random placements, averaged Eve SINR and parameter
//!   sweeps.

// `!(x > 0.0)` is deliberate: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clipping;
pub mod designer;
pub mod error;
pub mod geometry;
pub mod link;
pub mod montecarlo;
pub mod params;
pub mod qcqp;
pub mod summation;

pub use clipping::{ClipLevels, ClippingStats};
pub use designer::{Branch, CcpSettings, CcpTrace, Channels, Design, DesignSpec, EveAveraging, EveCsi, PrecoderPair};
pub use error::{Error, Result};
pub use geometry::{ChannelVector, EveChannelStats, GridResolution, ReceiverOptics, RoomLayout};
pub use link::{LuminaireConfig, NoiseParams, SecrecyRate, SinrReport};
pub use montecarlo::{Scheme, SweepConfig, SweepRecord, SweepVariable};
pub use params::SystemModel;
pub use qcqp::{QcqpProblem, QcqpSolution, SolveStatus};

/// Position in the room frame: origin at the floor centre, z up, metres.
pub type Point = nalgebra::Point3<f64>;
