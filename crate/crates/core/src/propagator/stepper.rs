use std::ops::Range;

use crate::detectors::CouplingWindow;
use crate::relkin::spectral::ModeOperator;
use crate::relkin::{Grid, ModelParams, SpectralKernel, SpinorSlice};
use crate::{Error, Result};

use super::{AlignedWindow, Alignment, EvolutionRecord, GridSpec};

/// Growth of the squared norm over one step that counts as unstable.
const GROWTH_LIMIT: f64 = 1e-10;
/// Tolerance on the norm of a state handed to [`evolve`].
const UNIT_NORM_TOLERANCE: f64 = 1e-8;

/// Windows sharing one time slice, merged over the union of their supports.
#[derive(Debug, Clone)]
struct WindowGroup {
    range: Range<usize>,
    lambda: Vec<f64>,
    parts: Vec<(usize, Vec<f64>)>,
}

impl WindowGroup {
    fn new(members: &[(usize, &CouplingWindow)]) -> Option<Self> {
        let start = members.iter().map(|(_, w)| w.support().start).min()?;
        let end = members.iter().map(|(_, w)| w.support().end).max()?;
        let len = end - start;
        let mut lambda = vec![0.0; len];
        let mut parts = Vec::with_capacity(members.len());
        for &(det, w) in members {
            let mut g_sq = vec![0.0; len];
            for j in w.support() {
                g_sq[j - start] = w.g_sq(j);
                lambda[j - start] += w.g_sq(j);
            }
            parts.push((det, g_sq));
        }
        Some(WindowGroup {
            range: start..end,
            lambda,
            parts,
        })
    }

    /// Multiplies the field by `exp(-a Lambda(x))` and adds the removed norm
    /// to `losses`, split between detectors in proportion to `g_j^2`.
    fn damp(&self, psi: &mut SpinorSlice, a: f64, dx: f64, losses: &mut [f64]) {
        let start = self.range.start;
        for j in self.range.clone() {
            let l = self.lambda[j - start];
            if l == 0.0 {
                continue;
            }
            let lost = -(-2.0 * a * l).exp_m1() * psi.density(j) * dx;
            for (det, g_sq) in &self.parts {
                losses[*det] += lost * g_sq[j - start] / l;
            }
            let f = (-a * l).exp();
            for c in psi.components_mut().iter_mut() {
                c[j] *= f;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct TranslatedGroup {
    /// `T^-1`, taking the field to the slice of the window.
    inbound: ModeOperator,
    /// `T`, taking it back.
    outbound: ModeOperator,
    windows: WindowGroup,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Kinetic,
    Fused,
    Inbound(usize),
    Outbound(usize),
}

/// One-step machinery for a fixed set of windows and step size.
pub struct DampedStepper {
    kernel: SpectralKernel,
    grid: Grid,
    dtau: f64,
    kinetic: ModeOperator,
    /// `K T^-1` for the first translated group, used when nothing co-moves.
    fused: Option<ModeOperator>,
    co: Option<WindowGroup>,
    translated: Vec<TranslatedGroup>,
    detectors: usize,
    blocks: [bool; 2],
}

impl DampedStepper {
    pub fn new(windows: &[AlignedWindow], grid: Grid, params: ModelParams, dtau: f64) -> Result<Self> {
        if !(dtau > 0.0) || !dtau.is_finite() {
            return Err(Error::Usage(format!("step {dtau} must be positive")));
        }
        for w in windows {
            if w.window.grid() != &grid {
                return Err(Error::Usage("window grid differs from the field grid".into()));
            }
        }
        let kernel = SpectralKernel::new(grid, params);
        // Mode operators carry the 1/M of the inverse transform.
        let inv_m = 1.0 / grid.period() as f64;
        let kinetic = kernel.evolution(dtau).scaled(inv_m);

        let co_members: Vec<_> = windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.alignment == Alignment::CoMoving)
            .map(|(i, w)| (i, &w.window))
            .collect();
        let co = WindowGroup::new(&co_members);

        let mut distances: Vec<f64> = Vec::new();
        for w in windows {
            if let Alignment::Translated { distance } = w.alignment {
                if !distances.contains(&distance) {
                    distances.push(distance);
                }
            }
        }
        let mut translated = Vec::with_capacity(distances.len());
        for &d in &distances {
            let members: Vec<_> = windows
                .iter()
                .enumerate()
                .filter(|(_, w)| w.alignment == Alignment::Translated { distance: d })
                .map(|(i, w)| (i, &w.window))
                .collect();
            translated.push(TranslatedGroup {
                inbound: kernel.evolution(-d).scaled(inv_m),
                outbound: kernel.evolution(d).scaled(inv_m),
                windows: WindowGroup::new(&members).expect("group has members"),
            });
        }
        let fused = match (&co, translated.first()) {
            (None, Some(_)) => Some(kinetic.compose(&kernel.evolution(-distances[0]))),
            _ => None,
        };
        Ok(DampedStepper {
            kernel,
            grid,
            dtau,
            kinetic,
            fused,
            co,
            translated,
            detectors: windows.len(),
            blocks: [true, true],
        })
    }

    /// Restricts the transforms to the Hamiltonian blocks that carry
    /// amplitude. Blocks that start identically zero stay zero.
    pub fn set_active_blocks(&mut self, blocks: [bool; 2]) {
        self.blocks = blocks;
    }

    fn transform(&mut self, psi: &mut SpinorSlice, op: Op) {
        let blocks = self.blocks;
        self.kernel.to_modes(psi, blocks);
        let op = match op {
            Op::Kinetic => &self.kinetic,
            Op::Fused => self.fused.as_ref().expect("fused operator exists"),
            Op::Inbound(g) => &self.translated[g].inbound,
            Op::Outbound(g) => &self.translated[g].outbound,
        };
        SpectralKernel::apply_modes(op, psi, blocks);
        self.kernel.to_positions_unscaled(psi, blocks);
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    /// Free motion over one step.
    pub fn kinetic(&mut self, psi: &mut SpinorSlice) {
        let label = psi.label() + self.dtau;
        self.transform(psi, Op::Kinetic);
        psi.set_label(label);
    }

    /// Damping of a node with quadrature weight `weight`.
    ///
    /// Returns the norm removed per detector. When `mid` is given it receives
    /// the field halfway through the co-moving damping.
    pub fn node(&mut self, psi: &mut SpinorSlice, weight: f64, mid: Option<&mut SpinorSlice>) -> Vec<f64> {
        let mut losses = vec![0.0; self.detectors];
        let a = 0.25 * weight * self.dtau;
        self.co_half(psi, a, &mut losses);
        if let Some(slot) = mid {
            slot.clone_from(psi);
        }
        for g in 0..self.translated.len() {
            self.translated_damping(psi, g, weight, true, &mut losses);
        }
        self.co_half(psi, a, &mut losses);
        losses
    }

    /// Kinetic step followed by the damping of the node it lands on.
    pub fn advance(&mut self, psi: &mut SpinorSlice, weight: f64, mid: Option<&mut SpinorSlice>) -> Vec<f64> {
        if self.fused.is_none() {
            self.kinetic(psi);
            return self.node(psi, weight, mid);
        }
        let mut losses = vec![0.0; self.detectors];
        if let Some(slot) = mid {
            self.kinetic(psi);
            slot.clone_from(psi);
            for g in 0..self.translated.len() {
                self.translated_damping(psi, g, weight, true, &mut losses);
            }
            return losses;
        }
        let label = psi.label() + self.dtau;
        self.transform(psi, Op::Fused);
        psi.set_label(label);
        self.translated_damping(psi, 0, weight, false, &mut losses);
        for g in 1..self.translated.len() {
            self.translated_damping(psi, g, weight, true, &mut losses);
        }
        losses
    }

    fn co_half(&self, psi: &mut SpinorSlice, a: f64, losses: &mut [f64]) {
        if let Some(co) = &self.co {
            co.damp(psi, a, self.grid.dx(), losses);
        }
    }

    fn translated_damping(&mut self, psi: &mut SpinorSlice, g: usize, weight: f64, inbound: bool, losses: &mut [f64]) {
        if inbound {
            self.transform(psi, Op::Inbound(g));
        }
        let a = 0.5 * weight * self.dtau;
        self.translated[g].windows.damp(psi, a, self.grid.dx(), losses);
        self.transform(psi, Op::Outbound(g));
    }
}

/// One symmetric damped step: half-weight node, free motion, half-weight node.
///
/// Returns the new field and the norm removed per window.
pub fn damped_step(
    omega: &SpinorSlice,
    windows: &[AlignedWindow],
    params: ModelParams,
    dtau: f64,
) -> Result<(SpinorSlice, Vec<f64>)> {
    let mut stepper = DampedStepper::new(windows, *omega.grid(), params, dtau)?;
    stepper.set_active_blocks(omega.active_blocks());
    let mut psi = omega.clone();
    let mut losses = stepper.node(&mut psi, 0.5, None);
    let second = stepper.advance(&mut psi, 0.5, None);
    losses.iter_mut().zip(second).for_each(|(a, b)| *a += b);
    Ok((psi, losses))
}

/// Knobs for [`evolve`] and [`Evolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Index of the first node; its proper time is `start_step * dtau`.
    pub start_step: usize,
    /// Stop after the first node where the accumulated loss reaches this.
    pub stop_at_loss: Option<f64>,
    /// Reject initial fields whose squared norm is not 1.
    pub require_unit_norm: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            start_step: 0,
            stop_at_loss: None,
            require_unit_norm: true,
        }
    }
}

/// A damped evolution advanced one node at a time.
pub struct Evolution {
    stepper: DampedStepper,
    psi: SpinorSlice,
    record: EvolutionRecord,
    next: usize,
    last: usize,
    stop_at_loss: Option<f64>,
    initial_peak: f64,
    prev_norm: f64,
    done: bool,
}

impl Evolution {
    pub fn new(
        omega0: SpinorSlice,
        windows: &[AlignedWindow],
        spec: &GridSpec,
        params: ModelParams,
        options: EvolveOptions,
    ) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid()?;
        if omega0.grid() != &grid {
            return Err(Error::Usage("initial field grid differs from the run grid".into()));
        }
        let norm = omega0.norm_sq();
        if options.require_unit_norm && (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::Usage(format!("initial field has squared norm {norm}, expected 1")));
        }
        let last = spec.steps();
        if options.start_step > last {
            return Err(Error::Usage(format!(
                "start step {} lies beyond the horizon step {last}",
                options.start_step
            )));
        }
        let mut stepper = DampedStepper::new(windows, grid, params, spec.dtau)?;
        stepper.set_active_blocks(omega0.active_blocks());
        let initial_peak = omega0.peak_amplitude();
        let edge = {
            let n = grid.nodes();
            omega0.density(1).max(omega0.density(n - 2)).sqrt()
        };
        let edge_ratio = if initial_peak > 0.0 { edge / initial_peak } else { 0.0 };
        let record = EvolutionRecord::new(spec.dtau, options.start_step, windows.len(), norm, edge_ratio);
        Ok(Evolution {
            stepper,
            initial_peak,
            psi: omega0,
            record,
            next: options.start_step,
            last,
            stop_at_loss: options.stop_at_loss,
            prev_norm: norm,
            done: false,
        })
    }

    /// Processes the next node. Returns `false` once the run has finished.
    pub fn advance(&mut self) -> Result<bool> {
        self.advance_capturing(None)
    }

    /// Like [`Evolution::advance`], copying the mid-node field into `mid`.
    pub fn advance_capturing(&mut self, mid: Option<&mut SpinorSlice>) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        let n = self.next;
        let first = n == self.record.start_step();
        let weight = if first || n == self.last { 0.5 } else { 1.0 };
        let losses = if first {
            self.stepper.node(&mut self.psi, weight, mid)
        } else {
            self.stepper.advance(&mut self.psi, weight, mid)
        };

        let wall_amp = {
            let last = self.psi.grid().nodes() - 1;
            self.psi.density(0).max(self.psi.density(last)).sqrt()
        };
        let wall_loss = self.psi.clamp_walls();
        let measured = self.psi.norm_sq();
        if measured > self.prev_norm + GROWTH_LIMIT {
            return Err(Error::NumericalInstability {
                tau: n as f64 * self.stepper.dtau(),
                growth: measured - self.prev_norm,
            });
        }
        self.prev_norm = measured;
        let ratio = if self.initial_peak > 0.0 {
            wall_amp / self.initial_peak
        } else {
            0.0
        };
        self.record.push(n, weight, &losses, measured, wall_loss, ratio);

        self.next += 1;
        let stop = self
            .stop_at_loss
            .is_some_and(|r| self.record.total_loss() >= r);
        if n >= self.last || stop {
            self.done = true;
        }
        Ok(true)
    }

    /// Runs to the horizon (or the loss threshold).
    pub fn run(mut self) -> Result<(EvolutionRecord, SpinorSlice)> {
        while self.advance()? {}
        Ok((self.record, self.psi))
    }

    pub fn state(&self) -> &SpinorSlice {
        &self.psi
    }

    pub fn record(&self) -> &EvolutionRecord {
        &self.record
    }

    /// Index of the node processed most recently.
    pub fn current_step(&self) -> Option<usize> {
        (self.next > self.record.start_step()).then(|| self.next - 1)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn into_parts(self) -> (EvolutionRecord, SpinorSlice) {
        (self.record, self.psi)
    }
}

/// Evolves `omega0` under the damped dynamics up to the horizon of `spec`.
pub fn evolve(
    omega0: &SpinorSlice,
    windows: &[AlignedWindow],
    spec: &GridSpec,
    params: ModelParams,
    options: EvolveOptions,
) -> Result<EvolutionRecord> {
    Ok(Evolution::new(omega0.clone(), windows, spec, params, options)?.run()?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{make_window, DetectorSpec};
    use crate::relkin::{build_initial_state, free_propagate, InitialStateSpec, StateKind};

    fn setup() -> (GridSpec, ModelParams, SpinorSlice) {
        let spec = GridSpec::new(-2.0, 2.0, 0.004, 1.0);
        let params = ModelParams::new(50.0).unwrap();
        let grid = spec.grid().unwrap();
        let init = InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, -0.5);
        let init = InitialStateSpec { delta_k: 40.0, ..init };
        let psi = build_initial_state(&init, &params, &grid, 0.0).unwrap();
        (spec, params, psi)
    }

    #[test]
    fn no_windows_is_free_motion() {
        let (spec, params, _) = setup();
        let grid = spec.grid().unwrap();
        let init = InitialStateSpec::new(StateKind::Mixed, 1.0, -0.5);
        let psi = build_initial_state(&init, &params, &grid, 0.0).unwrap();
        let record = evolve(&psi, &[], &spec, params, EvolveOptions::default()).unwrap();
        assert_eq!(record.total_loss(), 0.0);
        let mut ev = Evolution::new(psi.clone(), &[], &spec, params, EvolveOptions::default()).unwrap();
        for _ in 0..11 {
            ev.advance().unwrap();
        }
        let free = free_propagate(&psi, params, 10.0 * spec.dtau);
        assert!(ev.state().max_abs_diff(&free) < 1e-10);
    }

    #[test]
    fn bookkeeping_matches_measured_norm() {
        let (spec, params, psi) = setup();
        let grid = spec.grid().unwrap();
        let det = DetectorSpec::new(0.0, 0.1, 1e-2, true);
        let w = make_window(&det, &grid, &params).unwrap();
        let record = evolve(&psi, &[AlignedWindow::co_moving(w)], &spec, params, EvolveOptions::default()).unwrap();
        assert!(record.total_loss() > 1e-4);
        assert!(record.bookkeeping_residual() < 1e-12);
        let trap = record.detection_probability(0);
        assert!((trap - record.total_loss()).abs() < 1e-14);
    }

    #[test]
    fn translated_window_equals_explicit_conjugation() {
        // Oracle: apply T^-1, damp by the window directly, apply T.
        let (spec, params, psi) = setup();
        let grid = spec.grid().unwrap();
        let det = DetectorSpec::new(0.3, 0.2, 1e-1, true);
        let w = make_window(&det, &grid, &params).unwrap();
        let d = 0.4;
        let (out, losses) =
            damped_step(&psi, &[AlignedWindow::translated(w.clone(), d)], params, spec.dtau).unwrap();

        let dt = spec.dtau;
        let damp = |phi: &mut SpinorSlice| {
            for j in w.support() {
                let f = (-0.25 * dt * w.g_sq(j)).exp();
                for c in phi.components_mut().iter_mut() {
                    c[j] *= f;
                }
            }
        };
        let mut phi = free_propagate(&psi, params, -d);
        damp(&mut phi);
        let mut phi = free_propagate(&phi, params, d + dt);
        phi = free_propagate(&phi, params, -d);
        damp(&mut phi);
        let phi = free_propagate(&phi, params, d);
        assert!(out.max_abs_diff(&phi) < 1e-12);
        assert!((psi.norm_sq() - out.norm_sq() - losses[0]).abs() < 1e-14);
    }

    #[test]
    fn losses_split_by_window_strength() {
        let (spec, params, psi) = setup();
        let grid = spec.grid().unwrap();
        let a = make_window(&DetectorSpec::new(-0.5, 0.1, 1e-2, true), &grid, &params).unwrap();
        let b = make_window(&DetectorSpec::new(-0.5, 0.1, 3e-2, true), &grid, &params).unwrap();
        let (_, losses) = damped_step(
            &psi,
            &[AlignedWindow::co_moving(a), AlignedWindow::co_moving(b)],
            params,
            spec.dtau,
        )
        .unwrap();
        assert!((losses[1] / losses[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_start_is_rejected() {
        let (spec, params, mut psi) = setup();
        psi.scale(2.0);
        let err = evolve(&psi, &[], &spec, params, EvolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn stop_at_loss_halts_early() {
        let (spec, params, psi) = setup();
        let grid = spec.grid().unwrap();
        let w = make_window(&DetectorSpec::new(0.0, 0.1, 1e-2, true), &grid, &params).unwrap();
        let full = evolve(&psi, &[AlignedWindow::co_moving(w.clone())], &spec, params, EvolveOptions::default())
            .unwrap();
        let target = 0.5 * full.total_loss();
        let opts = EvolveOptions {
            stop_at_loss: Some(target),
            ..EvolveOptions::default()
        };
        let part = evolve(&psi, &[AlignedWindow::co_moving(w)], &spec, params, opts).unwrap();
        assert!(part.total_loss() >= target);
        assert!(part.len() < full.len());
        let prev = part.loss()[part.len() - 2];
        assert!(prev < target);
    }
}
