use num_complex::Complex64;

use super::gamma::{conjugation_map, Spinor};
use super::grid::Grid;

/// A four-component spinor field sampled on a grid at one time label.
///
/// Components are stored separately so the spectral code can transform
/// each one in place. The last node duplicates the first (periodic image).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorSlice {
    grid: Grid,
    label: f64,
    comps: [Vec<Complex64>; 4],
}

impl SpinorSlice {
    pub fn zeros(grid: Grid, label: f64) -> Self {
        let n = grid.nodes();
        SpinorSlice {
            grid,
            label,
            comps: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]),
        }
    }

    pub fn from_fn(grid: Grid, label: f64, mut f: impl FnMut(f64) -> Spinor) -> Self {
        let mut s = Self::zeros(grid, label);
        for j in 0..grid.nodes() {
            s.set(j, f(grid.x(j)));
        }
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn set_label(&mut self, label: f64) {
        self.label = label;
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>; 4] {
        &mut self.comps
    }

    pub fn components(&self) -> &[Vec<Complex64>; 4] {
        &self.comps
    }

    pub fn get(&self, j: usize) -> Spinor {
        std::array::from_fn(|c| self.comps[c][j])
    }

    pub fn set(&mut self, j: usize, v: Spinor) {
        for (c, value) in v.into_iter().enumerate() {
            self.comps[c][j] = value;
        }
    }

    /// `dx * sum_j Psi^dagger Psi` over one period.
    pub fn norm_sq(&self) -> f64 {
        let m = self.grid.period();
        let sum: f64 = self
            .comps
            .iter()
            .map(|c| c[..m].iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        sum * self.grid.dx()
    }

    /// Position density `Psi^dagger Psi` at node `j`.
    pub fn density(&self, j: usize) -> f64 {
        self.comps.iter().map(|c| c[j].norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.comps
            .iter_mut()
            .flatten()
            .for_each(|v| *v *= s);
    }

    /// Centroid `<x>` of the position density.
    pub fn mean_position(&self) -> f64 {
        let m = self.grid.period();
        let (mut w, mut wx) = (0.0, 0.0);
        for j in 0..m {
            let d = self.density(j);
            w += d;
            wx += d * self.grid.x(j);
        }
        wx / w
    }

    pub fn peak_amplitude(&self) -> f64 {
        (0..self.grid.nodes())
            .map(|j| self.density(j).sqrt())
            .fold(0.0, f64::max)
    }

    /// Zeroes the wall nodes and returns the norm removed there.
    pub fn clamp_walls(&mut self) -> f64 {
        let last = self.grid.nodes() - 1;
        let removed = self.density(0) * self.grid.dx();
        for c in self.comps.iter_mut() {
            c[0] = Complex64::new(0.0, 0.0);
            c[last] = Complex64::new(0.0, 0.0);
        }
        removed
    }

    /// Copies node 0 onto the last node so the periodic image is consistent.
    pub(crate) fn sync_periodic_image(&mut self) {
        let last = self.grid.nodes() - 1;
        for c in self.comps.iter_mut() {
            c[last] = c[0];
        }
    }

    /// Which 2x2 blocks of the free Hamiltonian carry any amplitude.
    ///
    /// The Hamiltonian couples components (0, 3) and (1, 2) only, so a block
    /// that starts identically zero stays zero under every operation here.
    pub(crate) fn active_blocks(&self) -> [bool; 2] {
        let nonzero = |c: usize| self.comps[c].iter().any(|v| v.re != 0.0 || v.im != 0.0);
        [nonzero(0) || nonzero(3), nonzero(1) || nonzero(2)]
    }

    pub fn max_abs_diff(&self, other: &SpinorSlice) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}

/// Applies `Psi -> C (gamma^0)^T Psi*` pointwise.
pub fn charge_conjugate(psi: &SpinorSlice) -> SpinorSlice {
    let map = conjugation_map();
    let mut out = SpinorSlice::zeros(*psi.grid(), psi.label());
    for j in 0..psi.grid().nodes() {
        let v = psi.get(j).map(|z| z.conj());
        out.set(j, super::gamma::apply(&map, &v));
    }
    out
}
