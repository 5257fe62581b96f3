use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;
use super::slice::SpinorSlice;
use super::ModelParams;

/// Component pairs coupled by the free Hamiltonian `k gamma^0 gamma^1 + m gamma^0`.
pub(crate) const BLOCKS: [(usize, usize); 2] = [(0, 3), (1, 2)];

/// Per-mode matrix of a function of `H0(k)` acting on one 2x2 block.
///
/// Both blocks see the same matrix `[[m, k], [k, -m]]`, so a mode operator is
/// stored as its upper diagonal, off-diagonal and lower diagonal entries.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    upper: Vec<Complex64>,
    off: Vec<Complex64>,
    lower: Vec<Complex64>,
}

impl ModeOperator {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> ModeOperator {
        for v in self.upper.iter_mut().chain(&mut self.off).chain(&mut self.lower) {
            *v *= factor;
        }
        self
    }

    /// Product `self * other` of two functions of the same `H0(k)`.
    pub fn compose(&self, other: &ModeOperator) -> ModeOperator {
        let n = self.len();
        let mut op = ModeOperator {
            upper: Vec::with_capacity(n),
            off: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
        };
        for j in 0..n {
            let (u1, o1, l1) = (self.upper[j], self.off[j], self.lower[j]);
            let (u2, o2, l2) = (other.upper[j], other.off[j], other.lower[j]);
            op.upper.push(u1 * u2 + o1 * o2);
            op.off.push(u1 * o2 + o1 * l2);
            op.lower.push(o1 * o2 + l1 * l2);
        }
        op
    }
}

/// FFT-backed exact free Dirac propagation on a periodic grid.
pub struct SpectralKernel {
    grid: Grid,
    mhat: f64,
    k: Vec<f64>,
    energy: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SpectralKernel {
    pub fn new(grid: Grid, params: ModelParams) -> Self {
        let m = grid.period();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let k = grid.wavenumbers();
        let energy = k.iter().map(|&k| params.energy(k)).collect();
        SpectralKernel {
            grid,
            mhat: params.mhat,
            k,
            energy,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// `exp(-i dt H0(k))` for every mode.
    pub fn evolution(&self, dt: f64) -> ModeOperator {
        let n = self.k.len();
        let mut op = ModeOperator {
            upper: Vec::with_capacity(n),
            off: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
        };
        for (&k, &e) in self.k.iter().zip(&self.energy) {
            let (s, c) = (e * dt).sin_cos();
            let s_over_e = s / e;
            op.upper.push(Complex64::new(c, -s_over_e * self.mhat));
            op.off.push(Complex64::new(0.0, -s_over_e * k));
            op.lower.push(Complex64::new(c, s_over_e * self.mhat));
        }
        op
    }

    /// Projector onto the positive (`sign = 1`) or negative (`sign = -1`)
    /// energy branch, `(1 + sign H0(k)/E) / 2`.
    pub fn branch_projector(&self, sign: f64) -> ModeOperator {
        let n = self.k.len();
        let mut op = ModeOperator {
            upper: Vec::with_capacity(n),
            off: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
        };
        for (&k, &e) in self.k.iter().zip(&self.energy) {
            op.upper.push(Complex64::new(0.5 * (1.0 + sign * self.mhat / e), 0.0));
            op.off.push(Complex64::new(0.5 * sign * k / e, 0.0));
            op.lower.push(Complex64::new(0.5 * (1.0 - sign * self.mhat / e), 0.0));
        }
        op
    }

    /// Forward transform of the active blocks, in place.
    pub fn to_modes(&mut self, psi: &mut SpinorSlice, blocks: [bool; 2]) {
        let m = self.grid.period();
        for (b, &(p, q)) in BLOCKS.iter().enumerate() {
            if !blocks[b] {
                continue;
            }
            let comps = psi.components_mut();
            self.fwd
                .process_with_scratch(&mut comps[p][..m], &mut self.scratch);
            self.fwd
                .process_with_scratch(&mut comps[q][..m], &mut self.scratch);
        }
    }

    /// Inverse transform of the active blocks, including the `1/M` scaling.
    pub fn to_positions(&mut self, psi: &mut SpinorSlice, blocks: [bool; 2]) {
        self.to_positions_unscaled(psi, blocks);
        let m = self.grid.period();
        let norm = 1.0 / m as f64;
        for (b, &(p, q)) in BLOCKS.iter().enumerate() {
            if blocks[b] {
                let comps = psi.components_mut();
                for c in [p, q] {
                    comps[c].iter_mut().for_each(|v| *v *= norm);
                }
            }
        }
    }

    /// Inverse transform without the `1/M` factor, for callers that fold it
    /// into a mode operator (see [`ModeOperator::scaled`]).
    pub fn to_positions_unscaled(&mut self, psi: &mut SpinorSlice, blocks: [bool; 2]) {
        let m = self.grid.period();
        for (b, &(p, q)) in BLOCKS.iter().enumerate() {
            if !blocks[b] {
                continue;
            }
            let comps = psi.components_mut();
            for c in [p, q] {
                self.inv
                    .process_with_scratch(&mut comps[c][..m], &mut self.scratch);
            }
        }
        psi.sync_periodic_image();
    }

    /// Multiplies mode amplitudes by a mode operator.
    pub fn apply_modes(op: &ModeOperator, psi: &mut SpinorSlice, blocks: [bool; 2]) {
        let m = op.len();
        for (b, &(p, q)) in BLOCKS.iter().enumerate() {
            if !blocks[b] {
                continue;
            }
            let comps = psi.components_mut();
            let (lo, hi) = comps.split_at_mut(q);
            let (up, down) = (&mut lo[p][..m], &mut hi[0][..m]);
            for j in 0..m {
                let (a, d) = (up[j], down[j]);
                up[j] = op.upper[j] * a + op.off[j] * d;
                down[j] = op.off[j] * a + op.lower[j] * d;
            }
        }
    }

    /// Applies `exp(-i dt H0)` exactly and advances the slice label by `dt`.
    pub fn propagate(&mut self, psi: &mut SpinorSlice, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let op = self.evolution(dt);
        self.apply_operator(&op, psi);
        psi.set_label(psi.label() + dt);
    }

    /// Transforms, applies `op`, and transforms back.
    pub fn apply_operator(&mut self, op: &ModeOperator, psi: &mut SpinorSlice) {
        let blocks = psi.active_blocks();
        self.to_modes(psi, blocks);
        Self::apply_modes(op, psi, blocks);
        self.to_positions(psi, blocks);
    }

    /// Squared norms of the positive- and negative-energy parts of `psi`.
    pub fn branch_weights(&mut self, psi: &SpinorSlice) -> (f64, f64) {
        let mut out = [0.0; 2];
        for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut copy = psi.clone();
            let proj = self.branch_projector(sign);
            self.apply_operator(&proj, &mut copy);
            out[slot] = copy.norm_sq();
        }
        (out[0], out[1])
    }

    /// Mean wavenumber `<k>` from the mode amplitudes.
    pub fn mean_wavenumber(&mut self, psi: &SpinorSlice) -> f64 {
        let mut copy = psi.clone();
        let blocks = copy.active_blocks();
        self.to_modes(&mut copy, blocks);
        let m = self.grid.period();
        let (mut w, mut wk) = (0.0, 0.0);
        for j in 0..m {
            let d: f64 = (0..4).map(|c| copy.component(c)[j].norm_sqr()).sum();
            w += d;
            wk += d * self.k[j];
        }
        wk / w
    }
}

/// Exact free propagation by `dt` (any sign).
pub fn free_propagate(psi: &SpinorSlice, params: ModelParams, dt: f64) -> SpinorSlice {
    let mut out = psi.clone();
    SpectralKernel::new(*psi.grid(), params).propagate(&mut out, dt);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relkin::gamma::{alpha1, apply, gamma, Spinor};
    use std::f64::consts::PI;

    fn plane_wave(grid: Grid, mode: usize, amp: Spinor) -> SpinorSlice {
        let k = 2.0 * PI * mode as f64 / (grid.period() as f64 * grid.dx());
        SpinorSlice::from_fn(grid, 0.0, |x| {
            let ph = Complex64::from_polar(1.0, k * (x - grid.x_min()));
            amp.map(|a| a * ph)
        })
    }

    #[test]
    fn zero_step_is_identity() {
        let grid = Grid::new(-1.0, 1.0, 0.01).unwrap();
        let psi = plane_wave(grid, 3, [Complex64::new(1.0, 0.0); 4]);
        let out = free_propagate(&psi, ModelParams::new(5.0).unwrap(), 0.0);
        assert_eq!(out, psi);
    }

    #[test]
    fn plane_wave_eigenmodes_pick_up_energy_phase() {
        // Oracle: the analytic eigenvectors (E + m, k) and (k, -(E + m)) of
        // [[m, k], [k, -m]] with eigenvalues +E and -E.
        let grid = Grid::new(0.0, 2.0, 0.01).unwrap();
        let params = ModelParams::new(7.0).unwrap();
        let mode = 5;
        let k = 2.0 * PI * mode as f64 / (grid.period() as f64 * grid.dx());
        let e = params.energy(k);
        let m = params.mhat;
        let dt = 0.37;
        let z = Complex64::new(0.0, 0.0);
        for (sign, amp) in [
            (1.0, [Complex64::new(e + m, 0.0), z, z, Complex64::new(k, 0.0)]),
            (-1.0, [Complex64::new(k, 0.0), z, z, Complex64::new(-(e + m), 0.0)]),
        ] {
            let psi = plane_wave(grid, mode, amp);
            let out = free_propagate(&psi, params, dt);
            let phase = Complex64::from_polar(1.0, -sign * e * dt);
            for j in [0, 17, 150] {
                for c in 0..4 {
                    let expected = psi.get(j)[c] * phase;
                    assert!((out.get(j)[c] - expected).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_block_matches_gamma_algebra() {
        // H0(k) = k gamma^0 gamma^1 + m gamma^0 acting on a spinor.
        let (k, m) = (1.3, 0.7);
        let a1 = alpha1();
        let g0 = gamma(0).unwrap();
        let v: Spinor = [
            Complex64::new(0.2, 0.1),
            Complex64::new(-0.4, 0.3),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let h = {
            let x = apply(&a1, &v);
            let y = apply(&g0, &v);
            std::array::from_fn::<_, 4, _>(|c| x[c] * k + y[c] * m)
        };
        for &(p, q) in BLOCKS.iter() {
            let up = v[p] * m + v[q] * k;
            let down = v[p] * k - v[q] * m;
            assert!((h[p] - up).norm() < 1e-15);
            assert!((h[q] - down).norm() < 1e-15);
        }
    }
}
