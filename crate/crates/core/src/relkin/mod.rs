//! Free Dirac kinematics in 1+1 dimensions: gamma matrices, grids and
//! spinor slices, the exact spectral propagator, initial wavepackets, the
//! covariant scalar product and charge conjugation.

pub mod gamma;
pub mod grid;
pub mod initial;
pub mod inner;
pub mod slice;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use grid::Grid;
pub use initial::{
    build_initial_state, bump_profile, InitialStateSpec, StateKind, DEFAULT_DELTA_K, DEFAULT_ETA,
};
pub use inner::{scalar_product, Hyperplane};
pub use slice::{charge_conjugate, SpinorSlice};
pub use spectral::{free_propagate, SpectralKernel};

/// Electron reduced Compton wavelength in angstrom.
pub const ELECTRON_REDUCED_COMPTON: f64 = 3.861_592_68e-3;

/// Particle parameters. With hbar = c = 1 the only scale is `mhat = m c / hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Inverse reduced Compton wavelength (1/angstrom).
    pub mhat: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mhat: 1.0 / ELECTRON_REDUCED_COMPTON,
        }
    }
}

impl ModelParams {
    pub fn new(mhat: f64) -> Result<Self> {
        if !(mhat > 0.0) || !mhat.is_finite() {
            return Err(Error::config("model.mhat", format!("must be positive, got {mhat}")));
        }
        Ok(ModelParams { mhat })
    }

    /// `E(k) = sqrt(k^2 + mhat^2)`.
    pub fn energy(&self, k: f64) -> f64 {
        k.hypot(self.mhat)
    }
}
