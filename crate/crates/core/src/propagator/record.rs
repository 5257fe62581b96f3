use serde::Serialize;

/// Wall amplitude, relative to the initial peak, that triggers a warning.
///
/// The threshold is raised to ten times the tail level the initial field
/// already has next to the walls, so only growth (reflection or wrap-around)
/// is reported.
pub const WALL_WARNING_RATIO: f64 = 1e-6;

/// Node-by-node history of a damped evolution.
///
/// `rates[d][n]` is the norm removed by detector `d` at node `n` divided by
/// the quadrature weight of that node, so the trapezoid sum of the rates is
/// the total removed norm.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionRecord {
    dtau: f64,
    start_step: usize,
    initial_norm_sq: f64,
    tau: Vec<f64>,
    weights: Vec<f64>,
    loss: Vec<f64>,
    measured_norm_sq: Vec<f64>,
    rates: Vec<Vec<f64>>,
    wall_loss: Vec<f64>,
    max_wall_ratio: f64,
    wall_threshold: f64,
}

impl EvolutionRecord {
    pub(crate) fn new(
        dtau: f64,
        start_step: usize,
        detectors: usize,
        initial_norm_sq: f64,
        initial_edge_ratio: f64,
    ) -> Self {
        EvolutionRecord {
            dtau,
            start_step,
            initial_norm_sq,
            tau: Vec::new(),
            weights: Vec::new(),
            loss: Vec::new(),
            measured_norm_sq: Vec::new(),
            rates: vec![Vec::new(); detectors],
            wall_loss: Vec::new(),
            max_wall_ratio: 0.0,
            wall_threshold: WALL_WARNING_RATIO.max(10.0 * initial_edge_ratio),
        }
    }

    pub(crate) fn push(
        &mut self,
        step: usize,
        weight: f64,
        losses: &[f64],
        measured: f64,
        wall_loss: f64,
        wall_ratio: f64,
    ) {
        let node_loss: f64 = losses.iter().sum();
        let prev = self.loss.last().copied().unwrap_or(0.0);
        self.tau.push(step as f64 * self.dtau);
        self.weights.push(weight);
        self.loss.push(prev + node_loss);
        self.measured_norm_sq.push(measured);
        for (r, &l) in self.rates.iter_mut().zip(losses) {
            r.push(l / (weight * self.dtau));
        }
        let walls = self.wall_loss.last().copied().unwrap_or(0.0);
        self.wall_loss.push(walls + wall_loss);
        self.max_wall_ratio = self.max_wall_ratio.max(wall_ratio);
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn start_step(&self) -> usize {
        self.start_step
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn detectors(&self) -> usize {
        self.rates.len()
    }

    /// Proper time of each recorded node.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Quadrature weight of each node (1/2 at the ends of a full run).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Detected norm accumulated up to and including each node.
    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    pub fn total_loss(&self) -> f64 {
        self.loss.last().copied().unwrap_or(0.0)
    }

    pub fn initial_norm_sq(&self) -> f64 {
        self.initial_norm_sq
    }

    /// Squared norm implied by the detections and wall losses so far.
    pub fn accounted_norm_sq(&self, n: usize) -> f64 {
        self.initial_norm_sq - self.loss[n]
    }

    /// Squared norm measured on the grid after each node.
    pub fn measured_norm_sq(&self) -> &[f64] {
        &self.measured_norm_sq
    }

    pub fn rates(&self, detector: usize) -> &[f64] {
        &self.rates[detector]
    }

    /// Sum of the rates of all detectors.
    pub fn total_rates(&self) -> Vec<f64> {
        (0..self.len())
            .map(|n| self.rates.iter().map(|r| r[n]).sum())
            .collect()
    }

    /// Trapezoid integral of one detector's rate over the run.
    pub fn detection_probability(&self, detector: usize) -> f64 {
        self.rates[detector]
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| r * w * self.dtau)
            .sum()
    }

    /// Largest difference between measured and accounted squared norm,
    /// after removing what left through the walls.
    pub fn bookkeeping_residual(&self) -> f64 {
        (0..self.len())
            .map(|n| (self.measured_norm_sq[n] + self.wall_loss[n] - self.accounted_norm_sq(n)).abs())
            .fold(0.0, f64::max)
    }

    /// Norm removed at the walls over the whole run.
    pub fn wall_loss(&self) -> f64 {
        self.wall_loss.last().copied().unwrap_or(0.0)
    }

    /// Largest wall amplitude seen, relative to the initial peak.
    pub fn max_wall_ratio(&self) -> f64 {
        self.max_wall_ratio
    }

    /// Wall amplitude ratio above which [`Self::leakage_warning`] fires.
    pub fn wall_threshold(&self) -> f64 {
        self.wall_threshold
    }

    pub fn leakage_warning(&self) -> bool {
        self.max_wall_ratio > self.wall_threshold
    }

    /// Index of the first node whose accumulated loss reaches `r`.
    pub fn crossing_node(&self, r: f64) -> Option<usize> {
        let n = self.loss.partition_point(|&l| l < r);
        (n < self.len()).then_some(n)
    }

    /// Proper time at which the accumulated loss reaches `r`.
    ///
    /// The loss of node `m` is spread over the interval ending half a step
    /// after it, and the time is interpolated linearly inside that interval.
    pub fn crossing_time(&self, r: f64) -> Option<f64> {
        let m = self.crossing_node(r)?;
        let before = if m == 0 { 0.0 } else { self.loss[m - 1] };
        let node_loss = self.loss[m] - before;
        let (lo, hi) = if m == 0 {
            (self.tau[0], self.tau[0] + 0.5 * self.dtau)
        } else {
            (self.tau[m] - 0.5 * self.dtau, self.tau[m] + 0.5 * self.dtau)
        };
        let frac = if node_loss > 0.0 {
            ((r - before) / node_loss).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Some(lo + frac * (hi - lo))
    }
}
