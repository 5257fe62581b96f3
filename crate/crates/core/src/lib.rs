//! Relativistic event-enhanced detection of a free spin-1/2 particle in
//! 1+1 dimensional spacetime.
//!
//! The crate evolves a Dirac spinor field under a damped proper-time
//! dynamics in which localized detectors absorb norm. The absorbed norm is
//! the detection probability, and its rate is the proper-time density of
//! detection events. On top of that engine sit the time-of-arrival and
//! two-detector traversal-time pipelines, a stochastic event sampler, the
//! classical point-particle baselines, and the configuration and output
//! layer used by the command-line tool.
//!
//! Units: hbar = c = 1. Lengths are in angstrom, times in angstrom / c,
//! momenta in multiples of `m c`, detector heights in multiples of `m c^2`.

pub mod arrival;
pub mod classical;
pub mod config;
pub mod density;
pub mod detectors;
pub mod error;
pub mod mc_events;
pub mod output;
pub mod propagator;
pub mod relkin;
pub mod run;
pub mod stats;
pub mod traversal;

pub use error::{Error, Result};
