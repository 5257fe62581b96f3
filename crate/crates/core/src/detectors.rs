//! Detector specifications and their spatial coupling windows.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::relkin::{bump_profile, Grid, ModelParams, SpinorSlice};
use crate::{Error, Result};

/// A detector at rest in the reference frame K0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Rest position (angstrom).
    pub x_pos: f64,
    /// Full width of the sensitivity window (angstrom).
    pub width: f64,
    /// Coupling height in units of `m c^2`.
    pub height: f64,
    /// Whether a detection ends the run.
    pub destructive: bool,
}

impl DetectorSpec {
    pub fn new(x_pos: f64, width: f64, height: f64, destructive: bool) -> Self {
        DetectorSpec {
            x_pos,
            width,
            height,
            destructive,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::config(format!("{path}.width"), "must be positive"));
        }
        if !(self.height > 0.0) || !self.height.is_finite() {
            return Err(Error::config(format!("{path}.height"), "must be positive"));
        }
        if !self.x_pos.is_finite() {
            return Err(Error::config(format!("{path}.x"), "must be finite"));
        }
        Ok(())
    }

    /// Spacetime point `(t, x)` of the detector at proper time `tau` for a
    /// particle prepared at `(0, x0)`: `(tau + x0 - x_pos, x_pos)`.
    ///
    /// At `tau = 0` the point lies on the backward light cone of the
    /// preparation event; for `tau > 0` it is outside that cone.
    pub fn trajectory(&self, tau: f64, x0: f64) -> (f64, f64) {
        (tau + x0 - self.x_pos, self.x_pos)
    }

    /// Same detector moved to another position.
    pub fn at(&self, x_pos: f64) -> Self {
        DetectorSpec { x_pos, ..*self }
    }
}

/// True if `(t, x)` lies inside the backward light cone of `(0, x0)`.
pub fn in_backward_light_cone(t: f64, x: f64, x0: f64) -> bool {
    t < 0.0 && (x - x0).abs() < -t
}

/// Sampled sensitivity `g(x) = sqrt(2 W) F_{width/2}(x - center)` on a grid.
///
/// The window acts as a real multiple of the identity on spinor components.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingWindow {
    grid: Grid,
    center: f64,
    g: Vec<f64>,
    support: Range<usize>,
}

impl CouplingWindow {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Node range outside of which `g` vanishes.
    pub fn support(&self) -> Range<usize> {
        self.support.clone()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn g_sq(&self, j: usize) -> f64 {
        self.g[j] * self.g[j]
    }

    /// Image of the window under charge conjugation, `M G* M^dagger` with
    /// `M = C (gamma^0)^T`.
    ///
    /// A real multiple of the identity is mapped to itself.
    pub fn charge_conjugated(&self) -> Self {
        self.clone()
    }
}

/// Samples a detector window centred at the detector's own position.
pub fn make_window(spec: &DetectorSpec, grid: &Grid, params: &ModelParams) -> Result<CouplingWindow> {
    make_window_at(spec, grid, params, spec.x_pos)
}

/// Samples a detector window centred at `center` in grid coordinates.
pub fn make_window_at(
    spec: &DetectorSpec,
    grid: &Grid,
    params: &ModelParams,
    center: f64,
) -> Result<CouplingWindow> {
    spec.validate("detector")?;
    let half = 0.5 * spec.width;
    // Both walls must stay outside the open support.
    if center - half <= grid.x_min() || center + half >= grid.x_max() {
        return Err(Error::config(
            "detector.x",
            format!(
                "window [{}, {}] is not inside the grid [{}, {}]",
                center - half,
                center + half,
                grid.x_min(),
                grid.x_max()
            ),
        ));
    }
    let peak = (2.0 * spec.height * params.mhat).sqrt();
    let g: Vec<f64> = grid
        .positions()
        .map(|x| peak * bump_profile(x - center, half))
        .collect();
    let lo = g.iter().position(|&v| v > 0.0).unwrap_or(0);
    let hi = g.iter().rposition(|&v| v > 0.0).map_or(0, |j| j + 1);
    Ok(CouplingWindow {
        grid: *grid,
        center,
        g,
        support: lo..hi.max(lo),
    })
}

/// Detection rate `dx * sum g^2 Psi^dagger Psi` of one window.
pub fn detection_rate(psi: &SpinorSlice, window: &CouplingWindow) -> f64 {
    debug_assert_eq!(psi.grid(), window.grid());
    let sum: f64 = window
        .support()
        .map(|j| window.g_sq(j) * psi.density(j))
        .sum();
    sum * psi.grid().dx()
}

/// Total coupling `Lambda(x) = sum_j g_j(x)^2` on the grid.
pub fn total_coupling(windows: &[CouplingWindow]) -> Vec<f64> {
    let n = windows.first().map_or(0, |w| w.grid().nodes());
    let mut out = vec![0.0; n];
    for w in windows {
        for j in w.support() {
            out[j] += w.g_sq(j);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relkin::gamma::{conjugation_map, identity, matmul, scale, Mat4};
    use num_complex::Complex64;

    fn grid() -> Grid {
        Grid::new(-1.0, 1.0, 0.0002).unwrap()
    }

    #[test]
    fn window_peak_and_support() {
        let p = ModelParams::default();
        let spec = DetectorSpec::new(0.0, 0.01, 1e-5, true);
        let w = make_window(&spec, &grid(), &p).unwrap();
        let j0 = 5000;
        assert!(grid().x(j0).abs() < 1e-12);
        let expected = (2e-5 * p.mhat).sqrt();
        assert!((w.g()[j0] - expected).abs() < 1e-15);
        for j in 0..grid().nodes() {
            if (grid().x(j)).abs() >= 0.005 {
                assert_eq!(w.g()[j], 0.0);
            }
        }
    }

    #[test]
    fn window_outside_grid_is_rejected() {
        let p = ModelParams::default();
        let spec = DetectorSpec::new(0.999, 0.01, 1e-5, true);
        assert!(make_window(&spec, &grid(), &p).is_err());
    }

    #[test]
    fn window_integral_matches_fine_quadrature() {
        // Oracle: trapezoid of 2 W mhat F^2 at ten times the resolution.
        let p = ModelParams::default();
        let spec = DetectorSpec::new(0.0, 0.01, 1e-5, true);
        let w = make_window(&spec, &grid(), &p).unwrap();
        let coarse: f64 = (0..grid().nodes()).map(|j| w.g_sq(j)).sum::<f64>() * grid().dx();
        let h = grid().dx() / 10.0;
        let n = (0.01 / h).round() as i64;
        let fine: f64 = (-n..=n)
            .map(|i| {
                let x = i as f64 * h;
                2.0 * 1e-5 * p.mhat * bump_profile(x, 0.005).powi(2)
            })
            .sum::<f64>()
            * h;
        assert!(((coarse - fine) / fine).abs() < 1e-6, "{coarse} vs {fine}");
    }

    #[test]
    fn rate_is_linear_in_height_and_zero_off_support() {
        let p = ModelParams::default();
        let g = grid();
        let psi = SpinorSlice::from_fn(g, 0.0, |x| {
            let a = (-(x * x) / 0.001).exp();
            [Complex64::new(a, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, a)]
        });
        let w1 = make_window(&DetectorSpec::new(0.0, 0.01, 1e-5, true), &g, &p).unwrap();
        let w2 = make_window(&DetectorSpec::new(0.0, 0.01, 2e-5, true), &g, &p).unwrap();
        let r1 = detection_rate(&psi, &w1);
        let r2 = detection_rate(&psi, &w2);
        assert!(((r2 - 2.0 * r1) / r1).abs() < 1e-14);

        let far = SpinorSlice::from_fn(g, 0.0, |x| {
            let a = if x < -0.5 { 1.0 } else { 0.0 };
            [Complex64::new(a, 0.0); 4]
        });
        assert_eq!(detection_rate(&far, &w1), 0.0);
    }

    #[test]
    fn total_coupling_is_additive() {
        let p = ModelParams::default();
        let g = grid();
        let a = make_window(&DetectorSpec::new(-0.2, 0.3, 1e-3, false), &g, &p).unwrap();
        let b = make_window(&DetectorSpec::new(0.1, 0.3, 2e-3, true), &g, &p).unwrap();
        let lambda = total_coupling(&[a.clone(), b.clone()]);
        for j in 0..g.nodes() {
            assert_eq!(lambda[j], a.g_sq(j) + b.g_sq(j));
        }
    }

    #[test]
    fn scalar_window_is_conjugation_invariant() {
        let m = conjugation_map();
        let m_dag: Mat4 = std::array::from_fn(|r| std::array::from_fn(|c| m[c][r].conj()));
        let g = scale(&identity(), Complex64::new(0.37, 0.0));
        let g_conj: Mat4 = g.map(|row| row.map(|v| v.conj()));
        let image = matmul(&matmul(&m, &g_conj), &m_dag);
        assert_eq!(image, g);
    }

    #[test]
    fn trajectory_starts_on_backward_light_cone() {
        let d = DetectorSpec::new(0.0, 0.01, 1e-5, true);
        let x0 = -1.0;
        let (t, x) = d.trajectory(0.0, x0);
        assert!(((0.0 - t).powi(2) - (x0 - x).powi(2)).abs() < 1e-15);
        assert!(t <= 0.0);
        let (t, x) = d.trajectory(0.3, x0);
        assert!(!in_backward_light_cone(t, x, x0));
    }
}
