//! Executes a resolved experiment and writes its output directory.
//!
//! Every experiment writes `summary.json` with the resolved configuration,
//! the computed probabilities and means, the classical baselines and their
//! relative deviations. Densities go to `density_*.csv`, Monte Carlo events
//! to `events.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arrival::{boost_arrival, run_arrival, run_arrival_pair, ArrivalResult};
use crate::classical::{classical_arrival, classical_boost, classical_traversal};
use crate::config::{Experiment, ExperimentConfig};
use crate::density::DensityCurve;
use crate::mc_events::{
    mean_and_standard_error, sample_arrivals, sample_traversals, write_arrival_events,
    write_traversal_events, EventModel, McTarget, TraversalSampler,
};
use crate::output::{create, write_density_csv, write_json};
use crate::stats::{ks_distance, Cdf};
use crate::traversal::{
    assemble_traversal, boost_traversal, compute_branches, run_traversal, run_traversal_pair,
    TraversalResult,
};
use crate::Result;

/// A boosted mean computed two ways, with the classical value in the same frame.
#[derive(Debug, Clone, Serialize)]
pub struct BoostEntry {
    pub v: f64,
    /// Mean of the boosted density.
    pub mean_from_density: f64,
    /// `gamma (T0 - v anchor)`.
    pub mean_closed_form: f64,
    pub classical: f64,
    pub relative_deviation: f64,
    pub file: String,
}

/// Scalars of the coarser run of a pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairedRun {
    pub dx: f64,
    pub mean: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrivalSummary {
    pub p_inf: f64,
    pub t_a0: f64,
    pub error_t_a0: Option<f64>,
    pub t_a_rm: f64,
    pub relative_deviation: f64,
    pub paired_run: Option<PairedRun>,
    pub bookkeeping_residual: f64,
    pub wall_loss: f64,
    pub leakage_warning: bool,
    pub boosts: Vec<BoostEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraversalSummary {
    pub p_inf_1: f64,
    pub p_inf_12: f64,
    pub error_p_inf_12: Option<f64>,
    pub t_t0: f64,
    pub error_t_t0: Option<f64>,
    pub t_t_rm: f64,
    pub relative_deviation: f64,
    pub density_peak: f64,
    pub mass_ratio: f64,
    pub stride: usize,
    pub paired_run: Option<PairedRun>,
    pub bookkeeping_residual: f64,
    pub leakage_warning: bool,
    pub boosts: Vec<BoostEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McArrivalSummary {
    pub chains: u64,
    pub events: u64,
    pub p_inf: f64,
    pub event_fraction: f64,
    pub ks_distance: f64,
    pub mean_arrival_time: f64,
    pub standard_error: f64,
    pub t_a0: f64,
    pub t_a_rm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McTraversalSummary {
    pub chains: u64,
    pub never_detected: u64,
    pub second_without_first: u64,
    pub first_only: u64,
    pub traversals: u64,
    pub mean_traversal_time: f64,
    pub standard_error: f64,
    pub t_t0: f64,
    pub p_inf_12: f64,
    pub t_t_rm: f64,
    pub stride: usize,
}

/// Results of one experiment.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Results {
    Arrival(ArrivalSummary),
    Traversal(TraversalSummary),
    McArrival(McArrivalSummary),
    McTraversal(McTraversalSummary),
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub results: Results,
    pub files: Vec<String>,
}

/// What [`run_and_emit`] produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    /// One human-readable line.
    pub line: String,
}

fn relative(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn density(&mut self, name: &str, curve: &DensityCurve) -> Result<String> {
        let path = self.path(name);
        write_density_csv(curve, create(&path)?)?;
        Ok(name.to_string())
    }
}

fn boost_file(v: f64) -> String {
    format!("density_boost_v={v:?}.csv")
}

/// Runs the configured experiment, writes its files and returns the summary.
pub fn run_and_emit(config: &ExperimentConfig) -> Result<RunReport> {
    let mut out = Emitter::new(&config.out)?;
    let (results, line) = match config.experiment {
        Experiment::Arrival => arrival(config, &mut out)?,
        Experiment::Traversal => traversal(config, &mut out)?,
        Experiment::McArrival => mc_arrival(config, &mut out)?,
        Experiment::McTraversal => mc_traversal(config, &mut out)?,
    };
    out.files.push("summary.json".into());
    let summary = Summary {
        experiment: config.experiment,
        config: config.clone(),
        results,
        files: out.files.clone(),
    };
    write_json(&summary, create(&config.dir_path("summary.json"))?)?;
    Ok(RunReport { summary, line })
}

impl ExperimentConfig {
    fn dir_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn arrival(config: &ExperimentConfig, out: &mut Emitter) -> Result<(Results, String)> {
    let det = config.arrival_detector()?;
    let (result, paired): (ArrivalResult, Option<PairedRun>) = match config.dx_a {
        Some(dx_a) => {
            let (fine, coarse) = run_arrival_pair(&config.initial, &det, &config.grid, dx_a, &config.params)?;
            let paired = PairedRun {
                dx: dx_a,
                mean: coarse.t_a0,
                probability: coarse.p_inf,
            };
            (fine, Some(paired))
        }
        None => (run_arrival(&config.initial, &det, &config.grid, &config.params)?, None),
    };
    out.density("density_proper.csv", &result.proper_density)?;
    out.density("density_rest.csv", &result.rest_density)?;
    let t_rm = classical_arrival(config.initial.p0, config.initial.x0, det.x_pos)?;
    let mut boosts = Vec::new();
    for &v in &config.boosts {
        let (curve, closed) = boost_arrival(&result, v)?;
        let classical = classical_boost(t_rm, det.x_pos, v)?;
        boosts.push(BoostEntry {
            v,
            mean_from_density: curve.mean(),
            mean_closed_form: closed,
            classical,
            relative_deviation: relative(closed, classical),
            file: out.density(&boost_file(v), &curve)?,
        });
    }
    let summary = ArrivalSummary {
        p_inf: result.p_inf,
        t_a0: result.t_a0,
        error_t_a0: result.error_t_a0,
        t_a_rm: t_rm,
        relative_deviation: relative(result.t_a0, t_rm),
        paired_run: paired,
        bookkeeping_residual: result.record.bookkeeping_residual(),
        wall_loss: result.record.wall_loss(),
        leakage_warning: result.record.leakage_warning(),
        boosts,
    };
    let err = summary.error_t_a0.map(|e| format!(" +- {e:.2e}")).unwrap_or_default();
    let line = format!(
        "arrival: T_a0 = {:.6}{err} (classical {:.6}, deviation {:.3}%), P_inf = {:.4e}",
        summary.t_a0,
        t_rm,
        100.0 * summary.relative_deviation,
        summary.p_inf
    );
    Ok((Results::Arrival(summary), line))
}

fn traversal_summary(
    config: &ExperimentConfig,
    result: &TraversalResult,
    paired: Option<PairedRun>,
    out: &mut Emitter,
) -> Result<TraversalSummary> {
    let setup = config.traversal_setup()?;
    out.density("density_rest.csv", &result.rest_density)?;
    if config.joint {
        let path = out.path("joint.csv.gz");
        result.joint.write_gz_csv(create(&path)?)?;
    }
    let t_rm = classical_traversal(config.initial.p0, setup.d1.x_pos, setup.d2.x_pos)?;
    let mut boosts = Vec::new();
    for &v in &config.boosts {
        let (curve, closed) = boost_traversal(result, v)?;
        let classical = classical_boost(t_rm, setup.separation(), v)?;
        boosts.push(BoostEntry {
            v,
            mean_from_density: curve.mean(),
            mean_closed_form: closed,
            classical,
            relative_deviation: relative(closed, classical),
            file: out.density(&boost_file(v), &curve)?,
        });
    }
    Ok(TraversalSummary {
        p_inf_1: result.p_inf_1,
        p_inf_12: result.p_inf_12,
        error_p_inf_12: result.error_p_inf_12,
        t_t0: result.t_t0,
        error_t_t0: result.error_t_t0,
        t_t_rm: t_rm,
        relative_deviation: relative(result.t_t0, t_rm),
        density_peak: result.rest_density.peak().0,
        mass_ratio: result.mass_ratio,
        stride: result.stride,
        paired_run: paired,
        bookkeeping_residual: result.bookkeeping_residual,
        leakage_warning: result.leakage_warning,
        boosts,
    })
}

fn traversal(config: &ExperimentConfig, out: &mut Emitter) -> Result<(Results, String)> {
    let setup = config.traversal_setup()?;
    let (result, paired) = match config.dx_a {
        Some(dx_a) => {
            let (fine, coarse) = run_traversal_pair(&setup, dx_a, config.stride)?;
            let paired = PairedRun {
                dx: dx_a,
                mean: coarse.t_t0,
                probability: coarse.p_inf_12,
            };
            (fine, Some(paired))
        }
        None => (run_traversal(&setup, config.stride)?, None),
    };
    let summary = traversal_summary(config, &result, paired, out)?;
    let err = summary.error_t_t0.map(|e| format!(" +- {e:.2e}")).unwrap_or_default();
    let line = format!(
        "traversal: T_t0 = {:.6}{err} (classical {:.6}, deviation {:.3}%), P_inf,12 = {:.4e}",
        summary.t_t0,
        summary.t_t_rm,
        100.0 * summary.relative_deviation,
        summary.p_inf_12
    );
    Ok((Results::Traversal(summary), line))
}

fn mc_arrival(config: &ExperimentConfig, out: &mut Emitter) -> Result<(Results, String)> {
    let det = config.arrival_detector()?;
    let result = run_arrival(&config.initial, &det, &config.grid, &config.params)?;
    out.density("density_proper.csv", &result.proper_density)?;
    let model = EventModel::new(&config.initial, &[det], &config.grid, &config.params)?;
    let run = sample_arrivals(&model, &result.record, config.seed, McTarget::Successes(config.samples))?;
    write_arrival_events(&run, create(&out.path("events.csv"))?)?;
    let taus = run.taus();
    let cdf = Cdf::from_curve(&result.proper_density);
    let ks = ks_distance(&taus, |t| cdf.at(t));
    let light = result.light_time();
    let times: Vec<f64> = taus.iter().map(|t| t - light).collect();
    let (mean, se) = mean_and_standard_error(&times);
    let t_rm = classical_arrival(config.initial.p0, config.initial.x0, det.x_pos)?;
    let summary = McArrivalSummary {
        chains: run.chains,
        events: run.events.len() as u64,
        p_inf: run.p_inf,
        event_fraction: run.event_fraction(),
        ks_distance: ks,
        mean_arrival_time: mean,
        standard_error: se,
        t_a0: result.t_a0,
        t_a_rm: t_rm,
    };
    let line = format!(
        "mc-arrival: {} events in {} chains, mean {:.6} +- {:.1e} (density {:.6}), KS distance {:.4}",
        summary.events, summary.chains, mean, se, result.t_a0, ks
    );
    Ok((Results::McArrival(summary), line))
}

fn mc_traversal(config: &ExperimentConfig, out: &mut Emitter) -> Result<(Results, String)> {
    let setup = config.traversal_setup()?;
    let computed = compute_branches(&setup, config.stride)?;
    let pipeline = assemble_traversal(&computed)?;
    out.density("density_rest.csv", &pipeline.rest_density)?;
    let sampler = TraversalSampler::from_branches(computed);
    let run = sample_traversals(&sampler, config.seed, McTarget::Successes(config.samples))?;
    write_traversal_events(&run, create(&out.path("events.csv"))?)?;
    let summary = McTraversalSummary {
        chains: run.chains,
        never_detected: run.never_detected,
        second_without_first: run.second_without_first,
        first_only: run.first_only,
        traversals: run.traversals,
        mean_traversal_time: run.mean_traversal_time,
        standard_error: run.standard_error,
        t_t0: pipeline.t_t0,
        p_inf_12: pipeline.p_inf_12,
        t_t_rm: classical_traversal(config.initial.p0, setup.d1.x_pos, setup.d2.x_pos)?,
        stride: config.stride,
    };
    let line = format!(
        "mc-traversal: {} traversals in {} chains, mean {:.6} +- {:.1e} (density {:.6})",
        summary.traversals, summary.chains, summary.mean_traversal_time, summary.standard_error, summary.t_t0
    );
    Ok((Results::McTraversal(summary), line))
}
