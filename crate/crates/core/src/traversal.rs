//! Two-detector traversal-time pipeline.
//!
//! Phase A evolves the field with both detectors switched on; the first
//! (non-destructive) detector co-moves with the field and the second acts
//! through the free translation `T` across `d = x2 - x1`. A detection by the
//! first detector at proper time `tau1` collapses the field to
//! `T^-1 g1 Omega_A(tau1)`, normalized, and phase B evolves that state with
//! only the second detector. The joint density of the two detection times
//! gives the traversal-time density on `t = tau2 - tau1 - d`.

use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{boost_mean, richardson_error, DensityCurve, Frame};
use crate::detectors::{make_window, CouplingWindow, DetectorSpec};
use crate::propagator::{
    translation_t, AlignedWindow, Evolution, EvolutionRecord, EvolveOptions, GridSpec,
};
use crate::relkin::{build_initial_state, InitialStateSpec, ModelParams, SpinorSlice};
use crate::{Error, Result};

/// Double-detection probability below which no traversal density is formed.
pub const NO_DOUBLE_DETECTION_THRESHOLD: f64 = 1e-10;
/// Fraction of the peak of `p1` that delimits where branches are launched.
pub const SUPPORT_FRACTION: f64 = 1e-6;
/// Fewest branches accepted inside the support of `p1`.
pub const MIN_BRANCHES: usize = 8;
/// Allowed deviation of the assembled density mass from one.
pub const MASS_TOLERANCE: f64 = 1e-4;

/// The fixed inputs of a traversal run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraversalSetup {
    pub initial: InitialStateSpec,
    pub d1: DetectorSpec,
    pub d2: DetectorSpec,
    pub grid: GridSpec,
    pub params: ModelParams,
}

impl TraversalSetup {
    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        self.d1.validate("d1")?;
        self.d2.validate("d2")?;
        self.grid.validate()?;
        if !(self.initial.x0 < self.d1.x_pos && self.d1.x_pos < self.d2.x_pos) {
            return Err(Error::config(
                "detectors",
                format!(
                    "need x0 < x1 < x2, got x0 = {}, x1 = {}, x2 = {}",
                    self.initial.x0, self.d1.x_pos, self.d2.x_pos
                ),
            ));
        }
        if self.d1.destructive {
            return Err(Error::config("d1.destructive", "the first detector must not destroy the particle"));
        }
        if !self.d2.destructive {
            return Err(Error::config("d2.destructive", "the second detector must be destructive"));
        }
        Ok(())
    }

    /// Detector separation `x2 - x1`.
    pub fn separation(&self) -> f64 {
        self.d2.x_pos - self.d1.x_pos
    }

    fn windows(&self) -> Result<(CouplingWindow, CouplingWindow)> {
        let grid = self.grid.grid()?;
        Ok((
            make_window(&self.d1, &grid, &self.params)?,
            make_window(&self.d2, &grid, &self.params)?,
        ))
    }
}

/// Phase-A machinery: the field with both detectors on.
pub struct PhaseA {
    setup: TraversalSetup,
    omega0: SpinorSlice,
    w1: CouplingWindow,
    w2: CouplingWindow,
}

impl PhaseA {
    pub fn new(setup: &TraversalSetup) -> Result<Self> {
        setup.validate()?;
        let grid = setup.grid.grid()?;
        let omega0 = build_initial_state(
            &setup.initial,
            &setup.params,
            &grid,
            setup.initial.x0 - setup.d1.x_pos,
        )?;
        let (w1, w2) = setup.windows()?;
        Ok(PhaseA {
            setup: *setup,
            omega0,
            w1,
            w2,
        })
    }

    pub fn setup(&self) -> &TraversalSetup {
        &self.setup
    }

    fn aligned(&self) -> [AlignedWindow; 2] {
        [
            AlignedWindow::co_moving(self.w1.clone()),
            AlignedWindow::translated(self.w2.clone(), self.setup.separation()),
        ]
    }

    fn evolution(&self) -> Result<Evolution> {
        Evolution::new(
            self.omega0.clone(),
            &self.aligned(),
            &self.setup.grid,
            self.setup.params,
            EvolveOptions::default(),
        )
    }

    /// Evolves to the horizon. Detector 0 is D1, detector 1 is D2.
    pub fn run(&self) -> Result<EvolutionRecord> {
        Ok(self.evolution()?.run()?.0)
    }

    /// Replays phase A and hands the collapsed phase-B start state of every
    /// requested node (ascending) to `sink`, together with the node index.
    pub fn replay_collapses(
        &self,
        nodes: &[usize],
        mut sink: impl FnMut(usize, SpinorSlice) -> Result<()>,
    ) -> Result<()> {
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Usage("collapse nodes must be strictly increasing".into()));
        }
        let mut ev = self.evolution()?;
        let mut mid = self.omega0.clone();
        let mut wanted = nodes.iter().copied().peekable();
        let mut node = 0;
        while let Some(&next) = wanted.peek() {
            let capture = node == next;
            let advanced = ev.advance_capturing(capture.then_some(&mut mid))?;
            if !advanced {
                return Err(Error::Usage(format!("collapse node {next} lies beyond the horizon")));
            }
            if capture {
                sink(node, self.collapse(&mid)?)?;
                wanted.next();
            }
            node += 1;
        }
        Ok(())
    }

    /// `T^-1 g1 Omega / |g1 Omega|`.
    pub fn collapse(&self, omega: &SpinorSlice) -> Result<SpinorSlice> {
        let mut out = SpinorSlice::zeros(*omega.grid(), omega.label());
        let mut norm = 0.0;
        for j in self.w1.support() {
            let g = self.w1.g()[j];
            out.set(j, omega.get(j).map(|c| c * g));
            norm += out.density(j) * omega.grid().dx();
        }
        if !(norm > 0.0) {
            return Err(Error::Usage("collapse on a field that vanishes inside the first detector".into()));
        }
        out.scale(1.0 / norm.sqrt());
        Ok(translation_t(&out, self.setup.params, -self.setup.separation()))
    }

    /// Phase B from a collapsed state at node `start`: only D2, co-moving.
    pub fn run_branch(&self, collapsed: SpinorSlice, start: usize) -> Result<EvolutionRecord> {
        let ev = Evolution::new(
            collapsed,
            &[AlignedWindow::co_moving(self.w2.clone())],
            &self.setup.grid,
            self.setup.params,
            EvolveOptions {
                start_step: start,
                ..EvolveOptions::default()
            },
        )?;
        Ok(ev.run()?.0)
    }

    /// Runs the branches of `nodes` in parallel batches while replaying
    /// phase A once. Results come back ordered by node.
    pub fn run_branches(&self, nodes: &[usize]) -> Result<Vec<EvolutionRecord>> {
        let batch = (4 * rayon::current_num_threads()).max(4);
        let mut out = Vec::with_capacity(nodes.len());
        let mut pending: Vec<(usize, SpinorSlice)> = Vec::with_capacity(batch);
        let mut flush = |pending: &mut Vec<(usize, SpinorSlice)>| -> Result<()> {
            let done: Vec<Result<EvolutionRecord>> = pending
                .par_drain(..)
                .map(|(n, psi)| self.run_branch(psi, n))
                .collect();
            for r in done {
                out.push(r?);
            }
            Ok(())
        };
        self.replay_collapses(nodes, |n, psi| {
            pending.push((n, psi));
            if pending.len() >= batch {
                flush(&mut pending)?;
            }
            Ok(())
        })?;
        flush(&mut pending)?;
        Ok(out)
    }
}

/// Joint density of the two detection times, sampled on the proper-time
/// grid in `tau1` and on the lag `s = tau2 - tau1`.
#[derive(Debug, Clone, Serialize)]
pub struct JointDensity {
    pub dtau: f64,
    /// Index of the last proper-time node (the horizon).
    pub last_node: usize,
    /// First-detection density `p1` on every phase-A node.
    pub p1: Vec<f64>,
    /// Node range where `p1` exceeds [`SUPPORT_FRACTION`] of its peak.
    pub support: (usize, usize),
    pub stride: usize,
    /// Nodes that launched a phase-B branch.
    pub branch_nodes: Vec<usize>,
    /// Second-detection density of each branch against the lag index, with
    /// the `tau2 = tau1` sample set to zero.
    pub conditional: Vec<Vec<f64>>,
    /// Trapezoid integral of each conditional density.
    pub branch_p_inf: Vec<f64>,
}

impl JointDensity {
    fn bracket(&self, n1: usize) -> (usize, usize, f64) {
        let b = &self.branch_nodes;
        let i = b.partition_point(|&x| x <= n1);
        if i == 0 {
            return (0, 0, 0.0);
        }
        if i >= b.len() || b[i - 1] == n1 {
            return (i - 1, i - 1, 0.0);
        }
        let f = (n1 - b[i - 1]) as f64 / (b[i] - b[i - 1]) as f64;
        (i - 1, i, f)
    }

    /// `p2^(tau1)` at lag index `k`, interpolated between branches.
    pub fn conditional_at(&self, n1: usize, k: usize) -> f64 {
        if n1 + k > self.last_node || k == 0 {
            return 0.0;
        }
        let (a, b, f) = self.bracket(n1);
        let at = |i: usize| self.conditional[i].get(k).copied().unwrap_or(0.0);
        (1.0 - f) * at(a) + f * at(b)
    }

    /// Total second-detection probability after a first detection at `n1`.
    pub fn p_inf_after(&self, n1: usize) -> f64 {
        let (a, b, f) = self.bracket(n1);
        (1.0 - f) * self.branch_p_inf[a] + f * self.branch_p_inf[b]
    }

    /// Joint density `p12(tau1, tau2)` on nodes; zero unless `n2 > n1`.
    pub fn p12(&self, n1: usize, n2: usize) -> f64 {
        if n2 <= n1 || n1 < self.support.0 || n1 > self.support.1 {
            return 0.0;
        }
        self.p1[n1] * self.conditional_at(n1, n2 - n1)
    }

    fn tau1_weight(&self, n1: usize) -> f64 {
        if n1 == 0 || n1 == self.last_node {
            0.5
        } else {
            1.0
        }
    }

    /// `P_inf,12 = int p1(tau1) P_inf^(tau1) dtau1` over the support.
    pub fn p_inf_12(&self) -> f64 {
        (self.support.0..=self.support.1)
            .map(|n| self.tau1_weight(n) * self.p1[n] * self.p_inf_after(n))
            .sum::<f64>()
            * self.dtau
    }

    /// Unnormalized density of the lag `s_k = k dtau`.
    pub fn lag_density(&self) -> Vec<f64> {
        let kmax = self.last_node - self.support.0;
        let mut out = vec![0.0; kmax + 1];
        for n1 in self.support.0..=self.support.1 {
            let w = self.tau1_weight(n1) * self.p1[n1] * self.dtau;
            if w == 0.0 {
                continue;
            }
            let end = self.last_node - n1;
            for (k, slot) in out.iter_mut().enumerate().take(end + 1).skip(1) {
                let edge = if k == end { 0.5 } else { 1.0 };
                *slot += edge * w * self.conditional_at(n1, k);
            }
        }
        out
    }

    /// Writes `(tau1, tau2, weight)` rows for every nonzero joint sample,
    /// gzip-compressed.
    pub fn write_gz_csv(&self, writer: impl Write) -> Result<()> {
        let mut gz = GzEncoder::new(writer, Compression::default());
        writeln!(gz, "# tau1 [A/c], tau2 [A/c], p12 [c^2/A^2]")?;
        writeln!(gz, "tau1,tau2,p12")?;
        for n1 in self.support.0..=self.support.1 {
            for n2 in n1 + 1..=self.last_node {
                let v = self.p12(n1, n2);
                if v > 0.0 {
                    writeln!(
                        gz,
                        "{},{},{:e}",
                        n1 as f64 * self.dtau,
                        n2 as f64 * self.dtau,
                        v
                    )?;
                }
            }
        }
        gz.finish()?;
        Ok(())
    }
}

/// Everything one traversal run produces.
#[derive(Debug, Clone, Serialize)]
pub struct TraversalResult {
    pub setup: TraversalSetup,
    pub stride: usize,
    pub p_inf_1: f64,
    pub p_inf_12: f64,
    /// Mass of the assembled lag density before normalization, over `P_inf,12`.
    pub mass_ratio: f64,
    pub rest_density: DensityCurve,
    pub t_t0: f64,
    pub error_t_t0: Option<f64>,
    pub error_p_inf_12: Option<f64>,
    /// Largest bookkeeping residual over phase A and all branches.
    pub bookkeeping_residual: f64,
    pub leakage_warning: bool,
    #[serde(skip)]
    pub joint: JointDensity,
    #[serde(skip)]
    pub phase_a: EvolutionRecord,
}

/// Trapezoid integral of samples spaced `dtau` apart.
fn lag_trapezoid(c: &[f64], dtau: f64) -> f64 {
    match c.len() {
        0 | 1 => 0.0,
        n => (c.iter().sum::<f64>() - 0.5 * (c[0] + c[n - 1])) * dtau,
    }
}

/// Nodes where `rates` exceeds `fraction` of its peak, as a closed range.
pub fn support_range(rates: &[f64], fraction: f64) -> Option<(usize, usize)> {
    let peak = rates.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let cut = fraction * peak;
    let first = rates.iter().position(|&r| r > cut)?;
    let last = rates.iter().rposition(|&r| r > cut)?;
    Some((first, last))
}

/// Branch launch nodes: every `stride`-th node of the range, plus its end.
pub fn branch_nodes(support: (usize, usize), stride: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = (support.0..=support.1).step_by(stride.max(1)).collect();
    if nodes.last() != Some(&support.1) {
        nodes.push(support.1);
    }
    nodes
}

/// Phase A and the phase-B branches of one traversal configuration.
#[derive(Debug, Clone)]
pub struct TraversalBranches {
    pub setup: TraversalSetup,
    pub stride: usize,
    /// Phase-A record; detector 0 is D1, detector 1 is D2.
    pub phase_a: EvolutionRecord,
    /// Nodes where branches were launched, ascending.
    pub nodes: Vec<usize>,
    /// Phase-B records, one per launch node.
    pub branches: Vec<EvolutionRecord>,
}

/// Runs phase A and launches phase B every `tau1_stride` nodes inside the
/// support of `p1`.
pub fn compute_branches(setup: &TraversalSetup, tau1_stride: usize) -> Result<TraversalBranches> {
    if tau1_stride == 0 {
        return Err(Error::config("stride", "must be a positive integer"));
    }
    let phase = PhaseA::new(setup)?;
    let record = phase.run()?;
    let support = support_range(record.rates(0), SUPPORT_FRACTION).ok_or(Error::NoDoubleDetection {
        p_inf_12: 0.0,
        threshold: NO_DOUBLE_DETECTION_THRESHOLD,
    })?;
    let nodes = branch_nodes(support, tau1_stride);
    if nodes.len() < MIN_BRANCHES {
        return Err(Error::config(
            "stride",
            format!(
                "stride {tau1_stride} leaves only {} branches inside the support of p1 (need {MIN_BRANCHES})",
                nodes.len()
            ),
        ));
    }
    let branches = phase.run_branches(&nodes)?;
    Ok(TraversalBranches {
        setup: *setup,
        stride: tau1_stride,
        phase_a: record,
        nodes,
        branches,
    })
}

/// Full two-phase traversal pipeline.
pub fn run_traversal(setup: &TraversalSetup, tau1_stride: usize) -> Result<TraversalResult> {
    assemble_traversal(&compute_branches(setup, tau1_stride)?)
}

/// Builds the joint density, the traversal-time density and its mean from
/// computed branches.
pub fn assemble_traversal(computed: &TraversalBranches) -> Result<TraversalResult> {
    let setup = &computed.setup;
    let tau1_stride = computed.stride;
    let record = &computed.phase_a;
    let branches = &computed.branches;
    let p1 = record.rates(0).to_vec();
    let p_inf_1 = record.detection_probability(0);
    let support = (computed.nodes[0], computed.nodes[computed.nodes.len() - 1]);
    let nodes = computed.nodes.clone();
    let mut residual = record.bookkeeping_residual();
    let mut warning = record.leakage_warning();
    let mut conditional = Vec::with_capacity(branches.len());
    let mut branch_p_inf = Vec::with_capacity(branches.len());
    for b in branches {
        residual = residual.max(b.bookkeeping_residual());
        warning |= b.leakage_warning();
        let mut c = b.rates(0).to_vec();
        c[0] = 0.0;
        branch_p_inf.push(lag_trapezoid(&c, setup.grid.dtau));
        conditional.push(c);
    }
    let joint = JointDensity {
        dtau: setup.grid.dtau,
        last_node: setup.grid.steps(),
        p1,
        support,
        stride: tau1_stride,
        branch_nodes: nodes,
        conditional,
        branch_p_inf,
    };
    let p_inf_12 = joint.p_inf_12();
    if p_inf_12 < NO_DOUBLE_DETECTION_THRESHOLD {
        return Err(Error::NoDoubleDetection {
            p_inf_12,
            threshold: NO_DOUBLE_DETECTION_THRESHOLD,
        });
    }
    let lag = joint.lag_density();
    let d = setup.separation();
    let t: Vec<f64> = (0..lag.len()).map(|k| k as f64 * joint.dtau - d).collect();
    let raw = DensityCurve::new(t, lag, Frame::Rest)?;
    let mass_ratio = raw.mass() / p_inf_12;
    if (mass_ratio - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Usage(format!(
            "assembled traversal density has mass {mass_ratio} relative to P_inf,12; \
             the stride is too coarse for this configuration"
        )));
    }
    let rest_density = raw.normalized()?;
    let t_t0 = rest_density.mean();
    Ok(TraversalResult {
        setup: *setup,
        stride: tau1_stride,
        p_inf_1,
        p_inf_12,
        mass_ratio,
        rest_density,
        t_t0,
        error_t_t0: None,
        error_p_inf_12: None,
        bookkeeping_residual: residual,
        leakage_warning: warning,
        joint,
        phase_a: record.clone(),
    })
}

/// Richardson errors of `T_t0` and `P_inf,12` from two runs that differ
/// only in the step size.
pub fn traversal_error_bars(fine: &TraversalResult, coarse: &TraversalResult) -> Result<(f64, f64)> {
    let same = {
        let (a, b) = (&fine.setup, &coarse.setup);
        a.initial == b.initial
            && a.d1 == b.d1
            && a.d2 == b.d2
            && a.params == b.params
            && a.grid.x_min == b.grid.x_min
            && a.grid.x_max == b.grid.x_max
            && a.grid.tau_cut == b.grid.tau_cut
            && fine.stride == coarse.stride
    };
    if !same {
        return Err(Error::Usage("error bars need two runs that differ only in the step size".into()));
    }
    let (dx_b, dx_a) = (fine.setup.grid.dx, coarse.setup.grid.dx);
    Ok((
        richardson_error(fine.t_t0, coarse.t_t0, dx_b, dx_a)?,
        richardson_error(fine.p_inf_12, coarse.p_inf_12, dx_b, dx_a)?,
    ))
}

/// Runs at two step sizes with the same stride and attaches the error bars
/// to the finer run. Returns `(fine, coarse)`.
pub fn run_traversal_pair(
    setup: &TraversalSetup,
    dx_a: f64,
    tau1_stride: usize,
) -> Result<(TraversalResult, TraversalResult)> {
    let coarse_setup = TraversalSetup {
        grid: setup.grid.with_step(dx_a),
        ..*setup
    };
    let (fine, coarse) = rayon::join(
        || run_traversal(setup, tau1_stride),
        || run_traversal(&coarse_setup, tau1_stride),
    );
    let (mut fine, coarse) = (fine?, coarse?);
    let (et, ep) = traversal_error_bars(&fine, &coarse)?;
    fine.error_t_t0 = Some(et);
    fine.error_p_inf_12 = Some(ep);
    Ok((fine, coarse))
}

/// Traversal density and mean seen from a frame moving with velocity `v`.
pub fn boost_traversal(result: &TraversalResult, v: f64) -> Result<(DensityCurve, f64)> {
    let d = result.setup.separation();
    let curve = result.rest_density.boosted(v, d)?;
    let t = boost_mean(result.t_t0, d, v)?;
    Ok((curve, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relkin::StateKind;

    fn small() -> TraversalSetup {
        TraversalSetup {
            initial: InitialStateSpec {
                delta_k: 20.0,
                ..InitialStateSpec::new(StateKind::PositiveEnergy, 1.0, -1.5)
            },
            d1: DetectorSpec::new(0.0, 0.5, 2e-2, false),
            d2: DetectorSpec::new(1.26, 0.1, 2e-2, true),
            grid: GridSpec::new(-8.0, 8.0, 0.01, 14.0),
            params: ModelParams::new(30.0).unwrap(),
        }
    }

    #[test]
    fn joint_support_and_marginal() {
        let setup = small();
        let r = run_traversal(&setup, 10).unwrap();
        let j = &r.joint;
        assert!(r.p_inf_12 > 0.0 && r.p_inf_12 <= r.p_inf_1 && r.p_inf_1 <= 1.0);
        for &n1 in &j.branch_nodes {
            for n2 in 0..=n1 {
                assert_eq!(j.p12(n1, n2), 0.0);
            }
        }
        // Marginal over tau2 at a branch node recovers p1 times P_inf^(tau1)
        // up to the removed tau2 = tau1 sample.
        let i = j.branch_nodes.len() / 2;
        let n1 = j.branch_nodes[i];
        let marginal: f64 = (n1 + 1..=j.last_node)
            .map(|n2| {
                let w = if n2 == j.last_node { 0.5 } else { 1.0 };
                w * j.p12(n1, n2) * j.dtau
            })
            .sum();
        let expected = j.p1[n1] * j.branch_p_inf[i];
        assert!((marginal - expected).abs() <= 1e-2 * expected, "{marginal} vs {expected}");
        assert!((r.mass_ratio - 1.0).abs() < MASS_TOLERANCE);
        assert!((r.rest_density.mass() - 1.0).abs() < 1e-12);
        assert!(r.bookkeeping_residual < 1e-12);
    }

    #[test]
    fn collapsed_state_is_normalized() {
        let setup = small();
        let phase = PhaseA::new(&setup).unwrap();
        let mut seen = 0;
        phase
            .replay_collapses(&[200, 250], |_, psi| {
                assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
                seen += 1;
                Ok(())
            })
            .unwrap();
        assert_eq!(seen, 2);
    }

    #[test]
    fn coarse_stride_is_rejected() {
        let setup = small();
        let err = run_traversal(&setup, 100_000).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn geometry_is_validated() {
        let mut setup = small();
        setup.d1.destructive = true;
        assert!(matches!(run_traversal(&setup, 10), Err(Error::Config { .. })));
        let mut setup = small();
        setup.d2 = setup.d2.at(-0.5);
        assert!(matches!(run_traversal(&setup, 10), Err(Error::Config { .. })));
    }

    #[test]
    fn branch_nodes_cover_the_range() {
        assert_eq!(branch_nodes((3, 10), 3), vec![3, 6, 9, 10]);
        assert_eq!(branch_nodes((3, 9), 3), vec![3, 6, 9]);
        assert_eq!(support_range(&[0.0, 1e-9, 1.0, 0.5, 0.0], 1e-6), Some((2, 3)));
    }

    #[test]
    fn boost_identities() {
        let r = run_traversal(&small(), 10).unwrap();
        let (c, t) = boost_traversal(&r, 0.0).unwrap();
        assert_eq!(t, r.t_t0);
        assert_eq!(c.values(), r.rest_density.values());
        let (c, t) = boost_traversal(&r, 0.6).unwrap();
        assert!((c.mean() - t).abs() < 1e-9);
        assert!(matches!(traversal_error_bars(&r, &r), Err(Error::Usage(_))));
    }
}
