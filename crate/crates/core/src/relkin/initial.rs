use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::slice::SpinorSlice;
use super::ModelParams;
use crate::{Error, Result};

/// Compactly supported bump `exp(-k^2 / (dk^2 - k^2))` for `|k| < dk`, zero outside.
pub fn bump_profile(k: f64, delta_k: f64) -> f64 {
    let k2 = k * k;
    let d2 = delta_k * delta_k;
    if k2 < d2 {
        (-k2 / (d2 - k2)).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// Superposition of positive-energy plane waves (an electron).
    PositiveEnergy,
    /// Superposition of negative-energy plane waves (a positron).
    NegativeEnergy,
    /// Gaussian in the upper component at preparation time, mixing both branches.
    Mixed,
}

impl StateKind {
    pub fn short_name(self) -> &'static str {
        match self {
            StateKind::PositiveEnergy => "P",
            StateKind::NegativeEnergy => "N",
            StateKind::Mixed => "PN",
        }
    }
}

/// Default spectral cutoff of the bump-profile states (1/angstrom).
pub const DEFAULT_DELTA_K: f64 = 10.0;
/// Default Gaussian width of the mixed state (angstrom).
pub const DEFAULT_ETA: f64 = 0.1;

/// Amplitude ratio (wall / peak) above which a packet counts as touching a wall.
///
/// The bump profile is smooth but compactly supported in k, so its spatial
/// tails decay only like `exp(-sqrt(dk |x|))`; on the standard grids the
/// tail at the walls sits near `1e-4` of the peak.
pub const WALL_LEAKAGE_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub kind: StateKind,
    /// Mean momentum in units of `m c`.
    pub p0: f64,
    /// Preparation position (angstrom).
    pub x0: f64,
    /// Spectral cutoff of the bump profile (1/angstrom).
    pub delta_k: f64,
    /// Width of the mixed-state Gaussian (angstrom).
    pub eta: f64,
}

impl InitialStateSpec {
    pub fn new(kind: StateKind, p0: f64, x0: f64) -> Self {
        InitialStateSpec {
            kind,
            p0,
            x0,
            delta_k: DEFAULT_DELTA_K,
            eta: DEFAULT_ETA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_k > 0.0) || !self.delta_k.is_finite() {
            return Err(Error::config("initial.delta_k", "must be positive"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::config("initial.eta", "must be positive"));
        }
        if !self.p0.is_finite() {
            return Err(Error::config("initial.p0", "must be finite"));
        }
        if !self.x0.is_finite() {
            return Err(Error::config("initial.x0", "must be finite"));
        }
        Ok(())
    }
}

/// One plane-wave family of a momentum integral.
struct Family {
    /// Integration interval in k.
    k_lo: f64,
    k_hi: f64,
    /// Sign of the spatial phase `exp(sign * i k (x - x0))`; the time phase
    /// carries the opposite sign times `E`.
    sign: f64,
    /// Spectral amplitude (without the 1/(2E) factor).
    profile: Box<dyn Fn(f64) -> f64>,
    /// Upper spinor entry: `E + m` (positive branch) or `E - m` (negative).
    upper: fn(f64, f64) -> f64,
    prefactor: f64,
}

fn families(spec: &InitialStateSpec, params: &ModelParams) -> Vec<Family> {
    let kc = spec.p0 * params.mhat;
    let pos_upper: fn(f64, f64) -> f64 = |e, m| e + m;
    let neg_upper: fn(f64, f64) -> f64 = |e, m| e - m;
    match spec.kind {
        StateKind::PositiveEnergy | StateKind::NegativeEnergy => {
            let dk = spec.delta_k;
            let positive = spec.kind == StateKind::PositiveEnergy;
            vec![Family {
                k_lo: kc - dk,
                k_hi: kc + dk,
                sign: if positive { 1.0 } else { -1.0 },
                profile: Box::new(move |k| bump_profile(k - kc, dk)),
                upper: if positive { pos_upper } else { neg_upper },
                prefactor: 1.0,
            }]
        }
        StateKind::Mixed => {
            let eta = spec.eta;
            let half = 6.0 / eta;
            let pref = (2.0 * eta).sqrt() / (2.0 * PI).powf(0.75);
            vec![
                Family {
                    k_lo: kc - half,
                    k_hi: kc + half,
                    sign: 1.0,
                    profile: Box::new(move |k| (-(eta * (k - kc)).powi(2)).exp()),
                    upper: pos_upper,
                    prefactor: pref,
                },
                Family {
                    k_lo: -kc - half,
                    k_hi: -kc + half,
                    sign: -1.0,
                    profile: Box::new(move |k| (-(eta * (k + kc)).powi(2)).exp()),
                    upper: neg_upper,
                    prefactor: pref,
                },
            ]
        }
    }
}

/// Trapezoid quadrature of the momentum integrals on `intervals` panels.
fn evaluate(
    fams: &[Family],
    params: &ModelParams,
    grid: &Grid,
    x0: f64,
    t: f64,
    intervals: usize,
) -> SpinorSlice {
    let mut out = SpinorSlice::zeros(*grid, t);
    let n = grid.nodes();
    let m = params.mhat;
    for fam in fams {
        let dk = (fam.k_hi - fam.k_lo) / intervals as f64;
        // Per-k coefficients: weight * spinor entry * time phase.
        let coeffs: Vec<(f64, Complex64, Complex64)> = (0..=intervals)
            .map(|i| {
                let k = fam.k_lo + i as f64 * dk;
                let e = params.energy(k);
                let edge = if i == 0 || i == intervals { 0.5 } else { 1.0 };
                let w = fam.prefactor * edge * dk * (fam.profile)(k) / (2.0 * e);
                let tphase = Complex64::from_polar(1.0, -fam.sign * e * t);
                (k, tphase * (w * (fam.upper)(e, m)), tphase * (w * k))
            })
            .collect();
        for j in 1..n - 1 {
            let y = fam.sign * (grid.x(j) - x0);
            let step = Complex64::from_polar(1.0, dk * y);
            let (mut up, mut low) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            let mut phase = Complex64::new(1.0, 0.0);
            for (i, &(k, cu, cl)) in coeffs.iter().enumerate() {
                if i % 32 == 0 {
                    phase = Complex64::from_polar(1.0, k * y);
                }
                up += cu * phase;
                low += cl * phase;
                phase *= step;
            }
            let mut v = out.get(j);
            v[0] += up;
            v[3] += low;
            out.set(j, v);
        }
    }
    out
}

/// Builds `Psi(eval_time, x)` on `grid` by quadrature of the momentum integrals.
///
/// Positive- and negative-energy states are normalized numerically to unit
/// squared norm. The mixed state carries its analytic prefactor and is only
/// checked to have unit norm.
pub fn build_initial_state(
    spec: &InitialStateSpec,
    params: &ModelParams,
    grid: &Grid,
    eval_time: f64,
) -> Result<SpinorSlice> {
    spec.validate()?;
    let fams = families(spec, params);
    let span = grid.x_max() - grid.x_min() + (spec.x0 - grid.x_min()).abs() + eval_time.abs();
    let widest = fams
        .iter()
        .map(|f| f.k_hi - f.k_lo)
        .fold(0.0, f64::max);
    // Aliased copies of the packet sit 2 pi / dk apart; keep them off the grid.
    let mut intervals = ((widest * 2.0 * span) / (2.0 * PI)).ceil().max(128.0) as usize;
    let mut psi = evaluate(&fams, params, grid, spec.x0, eval_time, intervals);
    let mut norm = psi.norm_sq();
    loop {
        let finer = evaluate(&fams, params, grid, spec.x0, eval_time, 2 * intervals);
        let finer_norm = finer.norm_sq();
        let converged = ((finer_norm - norm) / finer_norm).abs() < 1e-10;
        psi = finer;
        norm = finer_norm;
        intervals *= 2;
        if converged {
            break;
        }
        if intervals > 1 << 18 {
            return Err(Error::Usage(
                "momentum quadrature did not converge; grid or time offset too large".into(),
            ));
        }
    }

    let peak = psi.peak_amplitude();
    let n = grid.nodes();
    let edge = [1, 2, n - 3, n - 2]
        .iter()
        .map(|&j| psi.density(j).sqrt())
        .fold(0.0, f64::max);
    let leakage = if peak > 0.0 { edge / peak } else { f64::INFINITY };
    if leakage > WALL_LEAKAGE_LIMIT {
        return Err(Error::Construction {
            leakage,
            limit: WALL_LEAKAGE_LIMIT,
        });
    }

    match spec.kind {
        StateKind::Mixed => {
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Construction {
                    leakage: (norm - 1.0).abs(),
                    limit: 1e-6,
                });
            }
        }
        _ => psi.scale(1.0 / norm.sqrt()),
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relkin::spectral::SpectralKernel;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn bump_profile_values() {
        assert_eq!(bump_profile(0.0, 10.0), 1.0);
        assert_eq!(bump_profile(10.0, 10.0), 0.0);
        let v = bump_profile(10.0 / 2f64.sqrt(), 10.0);
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(bump_profile(-3.0, 10.0), bump_profile(3.0, 10.0));
        assert_eq!(bump_profile(12.0, 10.0), 0.0);
    }

    #[test]
    fn positive_state_is_normalized() {
        let grid = Grid::new(-5.0, 3.0, 0.002).unwrap();
        let spec = InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, -1.0);
        let psi = build_initial_state(&spec, &params(), &grid, 0.0).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-10);
        assert_eq!(psi.get(0), [Complex64::new(0.0, 0.0); 4]);
    }

    #[test]
    fn positive_state_mean_momentum() {
        // Oracle: discrete Fourier analysis of the built slice.
        let grid = Grid::new(-5.0, 3.0, 0.002).unwrap();
        let p = params();
        let spec = InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, -1.0);
        let psi = build_initial_state(&spec, &p, &grid, 0.0).unwrap();
        let k = SpectralKernel::new(grid, p).mean_wavenumber(&psi);
        assert!((k / p.mhat - 1.0).abs() < 0.01, "mean k / m = {}", k / p.mhat);
    }

    #[test]
    fn mixed_state_is_gaussian_upper_component_at_preparation() {
        let grid = Grid::new(-5.0, 3.0, 0.002).unwrap();
        let spec = InitialStateSpec::new(StateKind::Mixed, 0.75, 0.0);
        let psi = build_initial_state(&spec, &params(), &grid, 0.0).unwrap();
        let j0 = 2500; // x = 0
        assert!(grid.x(j0).abs() < 1e-12);
        let peak = (2.0 * PI).powf(-0.25) / spec.eta.sqrt();
        let v = psi.get(j0);
        assert!((v[0].re - peak).abs() < 1e-8, "{} vs {}", v[0].re, peak);
        assert!(v[0].im.abs() < 1e-8);
        for j in (0..grid.nodes()).step_by(37) {
            let v = psi.get(j);
            assert!(v[1].norm() < 1e-9 && v[2].norm() < 1e-9 && v[3].norm() < 1e-9);
        }
        assert!((psi.norm_sq() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn narrow_grid_is_rejected_with_leakage() {
        let grid = Grid::new(-1.2, 0.5, 0.002).unwrap();
        let spec = InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, -1.0);
        match build_initial_state(&spec, &params(), &grid, 0.0) {
            Err(Error::Construction { leakage, .. }) => assert!(leakage > WALL_LEAKAGE_LIMIT),
            other => panic!("expected construction error, got {other:?}"),
        }
    }

    #[test]
    fn energy_branches_are_pure() {
        let grid = Grid::new(-9.0, 7.0, 0.002).unwrap();
        let p = params();
        let mut kernel = SpectralKernel::new(grid, p);
        for (kind, pos_expected) in [
            (StateKind::PositiveEnergy, true),
            (StateKind::NegativeEnergy, false),
        ] {
            let spec = InitialStateSpec::new(kind, 1.0, -1.0);
            let psi = build_initial_state(&spec, &p, &grid, -0.5).unwrap();
            let (pos, neg) = kernel.branch_weights(&psi);
            let leak = if pos_expected { neg } else { pos };
            assert!(leak < 1e-10, "{kind:?}: leakage {leak:e}");
        }
    }

    #[test]
    fn invalid_widths_are_rejected() {
        let grid = Grid::new(-3.0, 3.0, 0.01).unwrap();
        let mut spec = InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, 0.0);
        spec.delta_k = 0.0;
        assert!(build_initial_state(&spec, &params(), &grid, 0.0).is_err());
        spec.delta_k = 10.0;
        spec.eta = -1.0;
        assert!(build_initial_state(&spec, &params(), &grid, 0.0).is_err());
    }
}
