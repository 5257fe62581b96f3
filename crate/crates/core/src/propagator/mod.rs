//! Damped proper-time evolution of the co-moving field.
//!
//! One proper-time step is a symmetric split: kinetic motion by the exact
//! spectral propagator, and detector damping `exp(-dtau g^2 / 2)` applied at
//! the step nodes. Windows that live on a different time slice than the
//! field (the far detector of the two-detector setup) are applied as
//! `T d T^-1` with the free translation `T`.

mod record;
mod stepper;

use serde::{Deserialize, Serialize};

use crate::detectors::CouplingWindow;
use crate::relkin::{free_propagate, Grid, ModelParams, SpinorSlice};
use crate::{Error, Result};

pub use record::EvolutionRecord;
pub use stepper::{damped_step, evolve, DampedStepper, Evolution, EvolveOptions};

/// Spatial grid, proper-time step and horizon of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dtau: f64,
    pub tau_cut: f64,
}

impl GridSpec {
    /// Grid with `c dtau = dx`.
    pub fn new(x_min: f64, x_max: f64, dx: f64, tau_cut: f64) -> Self {
        GridSpec {
            x_min,
            x_max,
            dx,
            dtau: dx,
            tau_cut,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::config("grid.dtau", "must be positive"));
        }
        if !(self.tau_cut > 0.0) || !self.tau_cut.is_finite() {
            return Err(Error::config("grid.tau_cut", "must be positive"));
        }
        if self.steps() == 0 {
            return Err(Error::config("grid.tau_cut", "shorter than one step"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.dx)
    }

    /// Number of proper-time steps up to `tau_cut`.
    pub fn steps(&self) -> usize {
        (self.tau_cut / self.dtau).round() as usize
    }

    pub fn tau(&self, step: usize) -> f64 {
        step as f64 * self.dtau
    }

    /// Same domain and horizon with a different space/time step.
    pub fn with_step(&self, dx: f64) -> Self {
        GridSpec {
            dx,
            dtau: dx,
            ..*self
        }
    }
}

/// How a detector window relates to the time slice of the evolved field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Alignment {
    /// The window acts on the field directly.
    CoMoving,
    /// The window acts on the field translated by `T^-1`, where
    /// `T = exp(-i distance H0)`.
    Translated { distance: f64 },
}

/// A window together with its frame alignment.
#[derive(Debug, Clone)]
pub struct AlignedWindow {
    pub window: CouplingWindow,
    pub alignment: Alignment,
}

impl AlignedWindow {
    pub fn co_moving(window: CouplingWindow) -> Self {
        AlignedWindow {
            window,
            alignment: Alignment::CoMoving,
        }
    }

    pub fn translated(window: CouplingWindow, distance: f64) -> Self {
        AlignedWindow {
            window,
            alignment: Alignment::Translated { distance },
        }
    }
}

/// Free translation `T = exp(-i distance H0)` between detector time slices.
pub fn translation_t(omega: &SpinorSlice, params: ModelParams, distance: f64) -> SpinorSlice {
    let mut out = free_propagate(omega, params, distance);
    out.set_label(omega.label());
    out
}
