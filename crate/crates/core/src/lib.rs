//! Decoy-state QKD key-rate analysis for a source whose father-pulse
//! intensity is only known to lie below an upper bound.
//!
//! The crate is organized bottom-up:
//!
//! - [`photonics`]: Poisson photon-number statistics of weak coherent pulses.
//! - [`channel`]: linear lossy channel and threshold detector, giving expected
//!   counting rates and error rates.
//! - [`decoy`]: lower bound on the single-photon yield from the vacuum, decoy
//!   and signal counting rates, with a brute-force oracle and a finite-size
//!   worst-casing step.
//! - [`keyrate`]: key distillation, the loose/ideal protocol comparison,
//!   secure-distance search and the distance penalty `L_half * log2(lambda)`.
//! - [`source_sim`]: Monte Carlo model of the fluctuating source, its virtual
//!   decomposition and the beam-splitter realization of the two-value
//!   attenuator.

// Range checks are written negated so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod decoy;
mod error;
pub mod keyrate;
pub mod photonics;
pub mod source_sim;

pub use channel::{ChannelModel, DetectorParams};
pub use decoy::{ObservedRates, YieldBounds};
pub use error::{Error, Result};
pub use keyrate::{KeyRateReport, ProtocolMode, ProtocolSpec};
pub use source_sim::{PulseRecord, SourceConfig, VirtualDecomposition};

/// Error-rate assigned to a detection with no signal photon (a random bit).
pub const VACUUM_ERROR_RATE: f64 = 0.5;
