//! Stochastic event sampling.
//!
//! A single run of the event algorithm draws `r` uniformly from `[0, 1)`,
//! follows the damped (no-jump) evolution until the lost norm reaches `r`,
//! picks the firing detector with probability proportional to its rate at
//! that moment, and collapses the field onto that detector's window. Because
//! the no-jump evolution does not depend on `r`, many events can be drawn
//! from one recorded trajectory by inverting its cumulative loss.
//!
//! Random numbers come from ChaCha8 keyed by the user seed. Chain `i` reads
//! the ChaCha stream with index `i` from word position zero, so every chain
//! is reproducible on its own and results do not depend on the number of
//! threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::{in_backward_light_cone, make_window, CouplingWindow, DetectorSpec};
use crate::propagator::{
    translation_t, AlignedWindow, Evolution, EvolutionRecord, EvolveOptions, GridSpec,
};
use crate::relkin::{build_initial_state, InitialStateSpec, ModelParams, SpinorSlice};
use crate::traversal::{compute_branches, TraversalBranches, TraversalSetup};
use crate::{Error, Result};

/// Chains drawn per parallel work item.
const BLOCK: u64 = 1 << 14;

/// Seeded uniform variates for one chain.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Stream 0 of `seed`.
    pub fn new(seed: u64) -> Self {
        Self::for_chain(seed, 0)
    }

    /// The independent stream reserved for chain `chain`.
    pub fn for_chain(seed: u64, chain: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain);
        RngStream {
            seed,
            stream: chain,
            counter: 0,
            rng,
        }
    }

    /// Rewinds to the start of another chain's stream.
    pub fn reset_chain(&mut self, chain: u64) {
        self.rng.set_stream(chain);
        self.rng.set_word_pos(0);
        self.stream = chain;
        self.counter = 0;
    }

    /// Uniform variate in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.rng.random::<f64>()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of variates drawn from this stream so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

/// One detection event, or the sentinel for "nothing fired before the horizon".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    /// Index of the detector that fired; `None` for the sentinel.
    pub detector: Option<usize>,
    /// Proper time of the event.
    pub tau: f64,
    /// Rest-frame time coordinate of the event point.
    pub t: f64,
    /// Position of the event point.
    pub x: f64,
    /// True if the detector destroyed the particle or nothing fired.
    pub terminal: bool,
}

impl EventRecord {
    pub fn none(tau_cut: f64) -> Self {
        EventRecord {
            detector: None,
            tau: tau_cut,
            t: f64::NAN,
            x: f64::NAN,
            terminal: true,
        }
    }

    pub fn is_event(&self) -> bool {
        self.detector.is_some()
    }

    fn at(detector: usize, spec: &DetectorSpec, tau: f64, x0: f64) -> Self {
        let (t, x) = spec.trajectory(tau, x0);
        assert!(
            !in_backward_light_cone(t, x, x0),
            "event at ({t}, {x}) lies in the backward light cone of the preparation"
        );
        EventRecord {
            detector: Some(detector),
            tau,
            t,
            x,
            terminal: spec.destructive,
        }
    }
}

/// Picks an index with probability proportional to `weights`, using `u` in `[0, 1)`.
fn select(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u * total < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Damped-evolution setup shared by all events of one configuration.
///
/// The first detector co-moves with the field; every other detector acts
/// through the free translation across its distance to the first one.
#[derive(Debug, Clone)]
pub struct EventModel {
    initial: InitialStateSpec,
    detectors: Vec<DetectorSpec>,
    grid: GridSpec,
    params: ModelParams,
    omega0: SpinorSlice,
    windows: Vec<CouplingWindow>,
}

impl EventModel {
    pub fn new(
        initial: &InitialStateSpec,
        detectors: &[DetectorSpec],
        grid: &GridSpec,
        params: &ModelParams,
    ) -> Result<Self> {
        initial.validate()?;
        grid.validate()?;
        let first = detectors
            .first()
            .ok_or_else(|| Error::Usage("event sampling needs at least one detector".into()))?;
        let g = grid.grid()?;
        let mut windows = Vec::with_capacity(detectors.len());
        for (i, d) in detectors.iter().enumerate() {
            d.validate(&format!("detectors[{i}]"))?;
            if !(d.x_pos > initial.x0) {
                return Err(Error::config(
                    format!("detectors[{i}].x_pos"),
                    format!("must lie ahead of the preparation point x0 = {}", initial.x0),
                ));
            }
            windows.push(make_window(d, &g, params)?);
        }
        let omega0 = build_initial_state(initial, params, &g, initial.x0 - first.x_pos)?;
        Ok(EventModel {
            initial: *initial,
            detectors: detectors.to_vec(),
            grid: *grid,
            params: *params,
            omega0,
            windows,
        })
    }

    /// Same model with the initial field and all windows charge conjugated.
    pub fn charge_conjugated(&self) -> Self {
        EventModel {
            omega0: crate::relkin::charge_conjugate(&self.omega0),
            windows: self.windows.iter().map(CouplingWindow::charge_conjugated).collect(),
            ..self.clone()
        }
    }

    pub fn detectors(&self) -> &[DetectorSpec] {
        &self.detectors
    }

    pub fn initial_field(&self) -> &SpinorSlice {
        &self.omega0
    }

    fn offset(&self, k: usize) -> f64 {
        self.detectors[k].x_pos - self.detectors[0].x_pos
    }

    fn aligned(&self) -> Vec<AlignedWindow> {
        self.windows
            .iter()
            .enumerate()
            .map(|(k, w)| match k {
                0 => AlignedWindow::co_moving(w.clone()),
                _ => AlignedWindow::translated(w.clone(), self.offset(k)),
            })
            .collect()
    }

    fn evolution(&self, stop_at_loss: Option<f64>) -> Result<Evolution> {
        Evolution::new(
            self.omega0.clone(),
            &self.aligned(),
            &self.grid,
            self.params,
            EvolveOptions {
                stop_at_loss,
                ..EvolveOptions::default()
            },
        )
    }

    /// The complete no-jump trajectory up to the horizon.
    pub fn trajectory(&self) -> Result<EvolutionRecord> {
        Ok(self.evolution(None)?.run()?.0)
    }

    /// Normalized `G_k Omega`, in the frame of the co-moving field.
    fn collapse(&self, k: usize, omega: &SpinorSlice) -> Result<SpinorSlice> {
        let d = self.offset(k);
        let shifted = if k == 0 {
            omega.clone()
        } else {
            translation_t(omega, self.params, -d)
        };
        let w = &self.windows[k];
        let dx = omega.grid().dx();
        let mut out = SpinorSlice::zeros(*omega.grid(), omega.label());
        let mut norm = 0.0;
        for j in w.support() {
            out.set(j, shifted.get(j).map(|c| c * w.g()[j]));
            norm += out.density(j) * dx;
        }
        if !(norm > 0.0) {
            return Err(Error::Usage(format!("detector {k} fired on a field that vanishes in its window")));
        }
        out.scale(1.0 / norm.sqrt());
        Ok(if k == 0 { out } else { translation_t(&out, self.params, d) })
    }

    /// Turns a loss threshold and a selection variate into an event on `record`.
    fn event_from(&self, record: &EvolutionRecord, r: f64, u: f64) -> Option<(usize, EventRecord)> {
        let m = record.crossing_node(r)?;
        let tau = record.crossing_time(r)?;
        let rates: Vec<f64> = (0..self.detectors.len()).map(|k| record.rates(k)[m]).collect();
        let k = select(&rates, u);
        Some((m, EventRecord::at(k, &self.detectors[k], tau, self.initial.x0)))
    }
}

/// Draws one event: evolves until the lost norm reaches a uniform `r`,
/// selects the detector and returns the event with the collapsed field.
///
/// The sentinel comes back with `None` in place of a field.
pub fn sample_event(
    initial: &InitialStateSpec,
    detectors: &[DetectorSpec],
    grid: &GridSpec,
    params: &ModelParams,
    rng: &mut RngStream,
) -> Result<(EventRecord, Option<SpinorSlice>)> {
    let model = EventModel::new(initial, detectors, grid, params)?;
    sample_event_with(&model, rng)
}

/// [`sample_event`] on a prepared model.
pub fn sample_event_with(model: &EventModel, rng: &mut RngStream) -> Result<(EventRecord, Option<SpinorSlice>)> {
    let r = rng.uniform();
    let u = rng.uniform();
    let mut ev = model.evolution(Some(r))?;
    let mut mid = model.omega0.clone();
    while ev.advance_capturing(Some(&mut mid))? {}
    let record = ev.record();
    match model.event_from(record, r, u) {
        None => Ok((EventRecord::none(model.grid.tau_cut), None)),
        Some((_, event)) => {
            let k = event.detector.expect("event has a detector");
            let psi = model.collapse(k, &mid)?;
            Ok((event, Some(psi)))
        }
    }
}

/// How many chains to draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "count")]
pub enum McTarget {
    /// Exactly this many chains.
    Chains(u64),
    /// Chains until this many of the counted outcomes occurred.
    Successes(u64),
}

/// Upper bound on chains when sampling for a success count.
pub const MAX_CHAINS: u64 = 1 << 34;

/// What one chain contributes to a sampling run.
enum Drawn<T> {
    /// Nothing to record.
    Skip,
    /// Counted but not stored.
    Silent,
    /// Stored, and whether it counts towards a success target.
    Keep(T, bool),
}

/// Output of [`run_chains`].
struct ChainRun<T> {
    chains: u64,
    silent: u64,
    kept: Vec<(u64, T)>,
}

/// Runs chains in parallel blocks until the target is met. Results are in
/// chain order and independent of the thread count.
fn run_chains<T: Send>(
    seed: u64,
    target: McTarget,
    draw: impl Fn(&mut RngStream) -> Result<Drawn<T>> + Sync,
) -> Result<ChainRun<T>> {
    let (limit, wanted) = match target {
        McTarget::Chains(n) => (n, None),
        McTarget::Successes(n) => (MAX_CHAINS, Some(n)),
    };
    let per_round = (rayon::current_num_threads() as u64).max(1) * 4;
    let mut run = ChainRun {
        chains: 0,
        silent: 0,
        kept: Vec::new(),
    };
    let mut successes = 0u64;
    let mut next_block = 0u64;
    loop {
        if next_block * BLOCK >= limit {
            if wanted.is_some() {
                return Err(Error::Usage(format!("target not reached within {limit} chains")));
            }
            run.chains = limit;
            return Ok(run);
        }
        let blocks: Vec<u64> = (next_block..next_block + per_round)
            .take_while(|b| b * BLOCK < limit)
            .collect();
        next_block += blocks.len() as u64;
        let done: Vec<Result<Vec<(u64, Drawn<T>)>>> = blocks
            .par_iter()
            .map(|&b| {
                let mut rng = RngStream::for_chain(seed, b * BLOCK);
                let mut items = Vec::new();
                for chain in b * BLOCK..((b + 1) * BLOCK).min(limit) {
                    rng.reset_chain(chain);
                    match draw(&mut rng)? {
                        Drawn::Skip => {}
                        d => items.push((chain, d)),
                    }
                }
                Ok(items)
            })
            .collect();
        for block in done {
            for (chain, item) in block? {
                match item {
                    Drawn::Skip => {}
                    Drawn::Silent => run.silent += 1,
                    Drawn::Keep(item, success) => {
                        run.kept.push((chain, item));
                        if success {
                            successes += 1;
                            if wanted == Some(successes) {
                                run.chains = chain + 1;
                                return Ok(run);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Events drawn from one recorded no-jump trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct McArrivalRun {
    pub seed: u64,
    pub target: McTarget,
    /// Number of chains drawn, including those without an event.
    pub chains: u64,
    /// Total lost norm of the trajectory, the exact detection probability.
    pub p_inf: f64,
    /// Chains that produced an event, in chain order.
    pub events: Vec<(u64, EventRecord)>,
}

impl McArrivalRun {
    /// Fraction of chains with an event.
    pub fn event_fraction(&self) -> f64 {
        self.events.len() as f64 / self.chains as f64
    }

    /// Proper times of the events, in chain order.
    pub fn taus(&self) -> Vec<f64> {
        self.events.iter().map(|(_, e)| e.tau).collect()
    }
}

/// Samples arrival events by inverting the cumulative loss of `record`.
pub fn sample_arrivals(
    model: &EventModel,
    record: &EvolutionRecord,
    seed: u64,
    target: McTarget,
) -> Result<McArrivalRun> {
    let p_inf = record.total_loss();
    let run = run_chains(seed, target, |rng| {
        let r = rng.uniform();
        if r >= p_inf {
            return Ok(Drawn::Skip);
        }
        let u = rng.uniform();
        Ok(match model.event_from(record, r, u) {
            Some((_, e)) => Drawn::Keep(e, true),
            None => Drawn::Skip,
        })
    })?;
    Ok(McArrivalRun {
        seed,
        target,
        chains: run.chains,
        p_inf,
        events: run.kept,
    })
}

/// Where a two-detector chain ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Nothing fired before the horizon.
    NeverDetected,
    /// The second detector fired without a prior first detection.
    SecondWithoutFirst,
    /// The first detector fired, the second never did.
    FirstOnly,
    /// First then second detector: a traversal.
    Traversal,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::NeverDetected => "never-detected",
            Outcome::SecondWithoutFirst => "d2-without-d1",
            Outcome::FirstOnly => "d1-only",
            Outcome::Traversal => "traversal",
        }
    }
}

/// Events of one two-detector chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraversalChain {
    pub events: Vec<EventRecord>,
    pub outcome: Outcome,
    /// `t = tau2 - tau1 - (x2 - x1)` for traversals.
    pub traversal_time: Option<f64>,
}

/// Two-detector chains built from phase A and cached phase-B branches.
///
/// A first detection at node `m` continues on a branch started at a cached
/// node. With `stride = 1` every node has its own branch. With a larger
/// stride the branch node is drawn between the two neighbouring cached
/// nodes with linear weights, so the sampled conditional law matches the
/// linear interpolation used by the density pipeline at the same stride.
pub struct TraversalSampler {
    setup: TraversalSetup,
    stride: usize,
    phase_a: EvolutionRecord,
    nodes: Vec<usize>,
    branches: Vec<EvolutionRecord>,
}

impl TraversalSampler {
    pub fn new(setup: &TraversalSetup, stride: usize) -> Result<Self> {
        Ok(Self::from_branches(compute_branches(setup, stride)?))
    }

    /// Sampler over branches already computed for the density pipeline.
    pub fn from_branches(computed: TraversalBranches) -> Self {
        TraversalSampler {
            setup: computed.setup,
            stride: computed.stride,
            phase_a: computed.phase_a,
            nodes: computed.nodes,
            branches: computed.branches,
        }
    }

    pub fn phase_a(&self) -> &EvolutionRecord {
        &self.phase_a
    }

    pub fn branch_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Cached branch used for a first detection at node `m`.
    fn branch_for(&self, m: usize, u: f64) -> usize {
        let i = self.nodes.partition_point(|&n| n < m);
        if i == 0 {
            return 0;
        }
        if i == self.nodes.len() {
            return self.nodes.len() - 1;
        }
        if self.nodes[i] == m {
            return i;
        }
        let (lo, hi) = (self.nodes[i - 1], self.nodes[i]);
        let f = (m - lo) as f64 / (hi - lo) as f64;
        if u < f {
            i
        } else {
            i - 1
        }
    }

    /// Samples one chain from `rng`.
    pub fn chain(&self, rng: &mut RngStream) -> TraversalChain {
        let s = &self.setup;
        let x0 = s.initial.x0;
        let r1 = rng.uniform();
        let Some(m) = self.phase_a.crossing_node(r1) else {
            return TraversalChain {
                events: vec![EventRecord::none(s.grid.tau_cut)],
                outcome: Outcome::NeverDetected,
                traversal_time: None,
            };
        };
        let tau1 = self.phase_a.crossing_time(r1).expect("crossing exists");
        let rates = [self.phase_a.rates(0)[m], self.phase_a.rates(1)[m]];
        if select(&rates, rng.uniform()) == 1 {
            return TraversalChain {
                events: vec![EventRecord::at(1, &s.d2, tau1, x0)],
                outcome: Outcome::SecondWithoutFirst,
                traversal_time: None,
            };
        }
        let first = EventRecord::at(0, &s.d1, tau1, x0);
        let b = self.branch_for(m, rng.uniform());
        let branch = &self.branches[b];
        let r2 = rng.uniform();
        let Some(tau_b) = branch.crossing_time(r2) else {
            return TraversalChain {
                events: vec![first, EventRecord::none(s.grid.tau_cut)],
                outcome: Outcome::FirstOnly,
                traversal_time: None,
            };
        };
        let lag = tau_b - branch.tau()[0];
        let tau2 = (tau1 + lag).min(s.grid.tau_cut);
        TraversalChain {
            events: vec![first, EventRecord::at(1, &s.d2, tau2, x0)],
            outcome: Outcome::Traversal,
            traversal_time: Some(lag - s.separation()),
        }
    }
}

/// Outcome counts and traversal statistics of many chains.
#[derive(Debug, Clone, Serialize)]
pub struct McTraversalRun {
    pub seed: u64,
    pub target: McTarget,
    pub stride: usize,
    pub chains: u64,
    pub never_detected: u64,
    pub second_without_first: u64,
    pub first_only: u64,
    pub traversals: u64,
    pub mean_traversal_time: f64,
    pub standard_error: f64,
    /// Chains that reached the second detector, in chain order. Chains
    /// that ended after a first detection alone are only counted.
    #[serde(skip)]
    pub logged: Vec<(u64, TraversalChain)>,
}

impl McTraversalRun {
    pub fn traversal_times(&self) -> Vec<f64> {
        self.logged.iter().filter_map(|(_, c)| c.traversal_time).collect()
    }
}

/// Draws two-detector chains. With [`McTarget::Successes`] the count is
/// of traversals.
pub fn sample_traversals(sampler: &TraversalSampler, seed: u64, target: McTarget) -> Result<McTraversalRun> {
    let run = run_chains(seed, target, |rng| {
        let c = sampler.chain(rng);
        Ok(match c.outcome {
            Outcome::NeverDetected => Drawn::Skip,
            Outcome::FirstOnly => Drawn::Silent,
            Outcome::Traversal => Drawn::Keep(c, true),
            Outcome::SecondWithoutFirst => Drawn::Keep(c, false),
        })
    })?;
    let logged = run.kept;
    let traversals = logged.iter().filter(|(_, c)| c.outcome == Outcome::Traversal).count() as u64;
    let second_without_first = logged.len() as u64 - traversals;
    let times: Vec<f64> = logged.iter().filter_map(|(_, c)| c.traversal_time).collect();
    let (mean, se) = mean_and_standard_error(&times);
    Ok(McTraversalRun {
        seed,
        target,
        stride: sampler.stride,
        chains: run.chains,
        never_detected: run.chains - run.silent - logged.len() as u64,
        second_without_first,
        first_only: run.silent,
        traversals,
        mean_traversal_time: mean,
        standard_error: se,
        logged,
    })
}

/// Sample mean and its standard error; `NaN` where undefined.
pub fn mean_and_standard_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Header of the event log.
pub const EVENTS_HEADER: [&str; 7] = ["chain", "event", "detector", "tau", "t", "x", "outcome"];

fn write_event<W: Write>(
    w: &mut csv::Writer<W>,
    chain: u64,
    index: usize,
    e: &EventRecord,
    outcome: &str,
) -> Result<()> {
    let detector = e.detector.map(|d| (d + 1).to_string()).unwrap_or_else(|| "none".into());
    w.write_record([
        chain.to_string(),
        index.to_string(),
        detector,
        format!("{:.17e}", e.tau),
        format!("{:.17e}", e.t),
        format!("{:.17e}", e.x),
        outcome.to_string(),
    ])
    .map_err(csv_error)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes arrival events as CSV. Detectors are numbered from 1.
pub fn write_arrival_events(run: &McArrivalRun, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENTS_HEADER).map_err(csv_error)?;
    for (chain, e) in &run.events {
        write_event(&mut w, *chain, 0, e, "detected")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the events of every logged traversal chain as CSV. Detectors
/// are numbered from 1.
pub fn write_traversal_events(run: &McTraversalRun, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENTS_HEADER).map_err(csv_error)?;
    for (chain, c) in &run.logged {
        for (i, e) in c.events.iter().enumerate() {
            write_event(&mut w, *chain, i, e, c.outcome.label())?;
        }
    }
    w.flush()?;
    Ok(())
}
