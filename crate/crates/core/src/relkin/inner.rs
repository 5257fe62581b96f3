use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::slice::SpinorSlice;
use super::spectral::{SpectralKernel, BLOCKS};
use super::ModelParams;
use crate::{Error, Result};

/// Spacelike line `sigma(u) = (y0 + alpha u, y1 + u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub y0: f64,
    pub y1: f64,
    pub alpha: f64,
}

impl Hyperplane {
    pub fn new(y0: f64, y1: f64, alpha: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "hyperplane slope must satisfy |alpha| < 1, got {alpha}"
            )));
        }
        Ok(Hyperplane { y0, y1, alpha })
    }

    /// The equal-time line `t = y0`.
    pub fn equal_time(y0: f64) -> Self {
        Hyperplane {
            y0,
            y1: 0.0,
            alpha: 0.0,
        }
    }
}

fn current(a: &[Complex64; 4], b: &[Complex64; 4], alpha: f64) -> Complex64 {
    let j0: Complex64 = (0..4).map(|c| a[c].conj() * b[c]).sum();
    if alpha == 0.0 {
        return j0;
    }
    // gamma^0 gamma^1 swaps the coupled pairs (0, 3) and (1, 2).
    let j1 = a[0].conj() * b[3] + a[3].conj() * b[0] + a[1].conj() * b[2] + a[2].conj() * b[1];
    j0 - j1 * alpha
}

/// Covariant scalar product `int (j^0 - alpha j^1) du` over a spacelike line.
///
/// Both slices must share a grid and time label. Points of the line off the
/// slices' time are reached by exact free propagation of each mode, evaluated
/// directly at the grid node, so the cost is quadratic in the node count.
pub fn scalar_product(
    a: &SpinorSlice,
    b: &SpinorSlice,
    plane: &Hyperplane,
    params: ModelParams,
) -> Result<Complex64> {
    if a.grid() != b.grid() || a.label() != b.label() {
        return Err(Error::Usage(
            "scalar product needs slices on the same grid and time label".into(),
        ));
    }
    Hyperplane::new(plane.y0, plane.y1, plane.alpha)?;
    let grid = *a.grid();
    let m = grid.period();
    let horizon = 0.5 * (grid.x_max() - grid.x_min());
    let offset = |x: f64| plane.y0 + plane.alpha * (x - plane.y1) - a.label();
    for x in [grid.x_min(), grid.x_max()] {
        if offset(x).abs() > horizon {
            return Err(Error::Domain(format!(
                "hyperplane reaches time offset {} outside the covered region (|dt| <= {horizon})",
                offset(x)
            )));
        }
    }

    if plane.alpha == 0.0 && offset(0.0) == 0.0 {
        let sum: Complex64 = (0..m).map(|j| current(&a.get(j), &b.get(j), 0.0)).sum();
        return Ok(sum * grid.dx());
    }

    let mut kernel = SpectralKernel::new(grid, params);
    let k = kernel.wavenumbers().to_vec();
    let energy: Vec<f64> = k.iter().map(|&k| params.energy(k)).collect();
    let mut modes = [a.clone(), b.clone()];
    for s in modes.iter_mut() {
        kernel.to_modes(s, [true, true]);
    }
    let inv_m = 1.0 / m as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..m {
        let x = grid.x(j);
        let dt = offset(x);
        let y = x - grid.x_min();
        let mut vals = [[Complex64::new(0.0, 0.0); 4]; 2];
        for q in 0..m {
            let (s, c) = (energy[q] * dt).sin_cos();
            let se = s / energy[q];
            let upper = Complex64::new(c, -se * params.mhat);
            let off = Complex64::new(0.0, -se * k[q]);
            let lower = Complex64::new(c, se * params.mhat);
            let ph = Complex64::from_polar(inv_m, k[q] * y);
            for (slot, s) in modes.iter().enumerate() {
                for &(p, r) in BLOCKS.iter() {
                    let (u, d) = (s.component(p)[q], s.component(r)[q]);
                    vals[slot][p] += ph * (upper * u + off * d);
                    vals[slot][r] += ph * (off * u + lower * d);
                }
            }
        }
        total += current(&vals[0], &vals[1], plane.alpha);
    }
    Ok(total * grid.dx())
}
