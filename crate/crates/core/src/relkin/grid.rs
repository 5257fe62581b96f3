use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform spatial grid with hard walls at both ends.
///
/// Node `j` sits at `x_min + j * dx` for `j in 0..nodes`. Spectral
/// operations treat the first `nodes - 1` points as one period, so the two
/// wall nodes are the same point of a ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    nodes: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::config("grid.dx", format!("must be positive, got {dx}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::config(
                "grid.x_max",
                format!("must exceed x_min ({x_min}), got {x_max}"),
            ));
        }
        let intervals = ((x_max - x_min) / dx).round();
        if intervals < 4.0 || intervals > 1e8 {
            return Err(Error::config(
                "grid.dx",
                format!("{intervals} intervals is outside the supported range"),
            ));
        }
        Ok(Grid {
            x_min,
            dx,
            nodes: intervals as usize + 1,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nodes - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Number of points in one spectral period (`nodes - 1`).
    pub fn period(&self) -> usize {
        self.nodes - 1
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(|j| self.x(j))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max()
    }

    /// Angular wavenumbers of the discrete Fourier modes, in FFT order.
    /// The Nyquist mode of an even period gets wavenumber zero, so every
    /// mode with `k != 0` has a partner at `-k`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.period();
        let dk = 2.0 * PI / (m as f64 * self.dx);
        (0..m)
            .map(|j| {
                let signed = if 2 * j == m {
                    0.0
                } else if j < m / 2 {
                    j as f64
                } else {
                    j as f64 - m as f64
                };
                signed * dk
            })
            .collect()
    }
}
