//! Experiment configuration files.
//!
//! A configuration is a TOML document. Every key is optional when a preset
//! supplies it; keys given explicitly override the preset. Unknown keys are
//! rejected.
//!
//! ```toml
//! experiment = "arrival"        # arrival | traversal | mc-arrival | mc-traversal
//! preset = "fig1-p0=1.0"        # optional, see `presets`
//! coarse = true                 # use the coarse steps of the preset
//! both_steps = true             # paired run for Richardson error bars
//! boosts = [0.3, -0.6]          # frame velocities in units of c
//! stride = 20                   # phase-B launch stride (traversal)
//! seed = 1                      # Monte Carlo seed
//! samples = 10000               # Monte Carlo events (arrival) or traversals
//! out = "out"                   # output directory
//! joint = false                 # also write the gzipped joint density
//!
//! [model]
//! mhat = 258.9605               # 1/angstrom
//!
//! [initial]
//! kind = "positive-energy"      # positive-energy | negative-energy | mixed
//! p0 = 1.0                      # units of m c
//! x0 = -1.0                     # angstrom
//! delta_k = 10.0                # 1/angstrom
//! eta = 0.1                     # angstrom
//!
//! [detector]                    # arrival experiments
//! x_pos = 0.0
//! width = 0.01
//! height = 1e-5
//!
//! [d1]                          # traversal experiments; also [d2]
//! x_pos = 0.0
//! width = 0.5
//! height = 1e-3
//!
//! [grid]
//! x_min = -6.0
//! x_max = 4.0
//! dx = 0.002                    # also the proper-time step
//! dx_a = 0.003                  # second step of paired runs
//! tau_cut = 4.5
//! ```

pub mod presets;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::contraction;
use crate::detectors::DetectorSpec;
use crate::propagator::GridSpec;
use crate::relkin::{InitialStateSpec, ModelParams, StateKind, DEFAULT_DELTA_K, DEFAULT_ETA};
use crate::traversal::TraversalSetup;
use crate::{Error, Result};

pub use presets::Preset;

/// Default phase-B launch stride.
pub const DEFAULT_STRIDE: usize = 20;
/// Default number of Monte Carlo events (arrival) or traversals.
pub const DEFAULT_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Arrival,
    Traversal,
    McArrival,
    McTraversal,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Arrival => "arrival",
            Experiment::Traversal => "traversal",
            Experiment::McArrival => "mc-arrival",
            Experiment::McTraversal => "mc-traversal",
        }
    }

    pub fn is_arrival(self) -> bool {
        matches!(self, Experiment::Arrival | Experiment::McArrival)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub mhat: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub kind: Option<StateKind>,
    pub p0: Option<f64>,
    pub x0: Option<f64>,
    pub delta_k: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetector {
    pub x_pos: Option<f64>,
    pub width: Option<f64>,
    pub height: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub dx: Option<f64>,
    pub dx_a: Option<f64>,
    pub tau_cut: Option<f64>,
}

/// A configuration as written, before presets are applied.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub preset: Option<String>,
    pub coarse: Option<bool>,
    pub both_steps: Option<bool>,
    pub boosts: Option<Vec<f64>>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub out: Option<PathBuf>,
    pub joint: Option<bool>,
    #[serde(default)]
    pub model: RawModel,
    #[serde(default)]
    pub initial: RawInitial,
    #[serde(default)]
    pub detector: RawDetector,
    #[serde(default)]
    pub d1: RawDetector,
    #[serde(default)]
    pub d2: RawDetector,
    #[serde(default)]
    pub grid: RawGrid,
}

/// Detector layout of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Detectors {
    Arrival { detector: DetectorSpec },
    Traversal { d1: DetectorSpec, d2: DetectorSpec },
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Canonical name of the preset the configuration started from.
    pub preset: Option<String>,
    pub coarse: bool,
    pub params: ModelParams,
    pub initial: InitialStateSpec,
    pub detectors: Detectors,
    pub grid: GridSpec,
    /// Second step size when a paired run is requested.
    pub dx_a: Option<f64>,
    pub boosts: Vec<f64>,
    pub stride: usize,
    pub seed: u64,
    pub samples: u64,
    pub out: PathBuf,
    pub joint: bool,
}

impl ExperimentConfig {
    /// Two-detector setup of a traversal experiment.
    pub fn traversal_setup(&self) -> Result<TraversalSetup> {
        match self.detectors {
            Detectors::Traversal { d1, d2 } => Ok(TraversalSetup {
                initial: self.initial,
                d1,
                d2,
                grid: self.grid,
                params: self.params,
            }),
            Detectors::Arrival { .. } => Err(Error::Usage("not a traversal experiment".into())),
        }
    }

    /// Detector of an arrival experiment.
    pub fn arrival_detector(&self) -> Result<DetectorSpec> {
        match self.detectors {
            Detectors::Arrival { detector } => Ok(detector),
            Detectors::Traversal { .. } => Err(Error::Usage("not an arrival experiment".into())),
        }
    }
}

/// Parses a TOML document without resolving it.
pub fn parse_config(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads, resolves and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    resolve(parse_config(&text)?)
}

fn need<T>(value: Option<T>, path: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(path, "missing (give it explicitly or choose a preset)"))
}

fn detector(raw: &RawDetector, base: Option<DetectorSpec>, path: &str, destructive: bool) -> Result<DetectorSpec> {
    let d = DetectorSpec {
        x_pos: need(raw.x_pos.or(base.map(|b| b.x_pos)), &format!("{path}.x_pos"))?,
        width: need(raw.width.or(base.map(|b| b.width)), &format!("{path}.width"))?,
        height: need(raw.height.or(base.map(|b| b.height)), &format!("{path}.height"))?,
        destructive,
    };
    d.validate(path)?;
    Ok(d)
}

fn unused(raw: &RawDetector, path: &str) -> Result<()> {
    if *raw != RawDetector::default() {
        return Err(Error::config(path, "not used by this experiment"));
    }
    Ok(())
}

/// Applies the preset, fills defaults and validates every field.
pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let preset = raw.preset.as_deref().map(Preset::parse).transpose()?;
    let experiment = match (raw.experiment, preset) {
        (Some(e), _) => e,
        (None, Some(p)) if p.is_arrival() => Experiment::Arrival,
        (None, Some(_)) => Experiment::Traversal,
        (None, None) => return Err(Error::config("experiment", "missing")),
    };
    if let Some(p) = preset {
        if p.is_arrival() != experiment.is_arrival() {
            return Err(Error::config(
                "preset",
                format!("preset `{p}` does not describe a {} experiment", experiment.name()),
            ));
        }
    }
    let coarse = raw.coarse.unwrap_or(false);
    let params = match raw.model.mhat {
        Some(m) => ModelParams::new(m)?,
        None => ModelParams::default(),
    };

    let base_init = preset.map(|p| p.initial());
    let ri = &raw.initial;
    let initial = InitialStateSpec {
        kind: need(ri.kind.or(base_init.map(|b| b.kind)), "initial.kind")?,
        p0: need(ri.p0.or(base_init.map(|b| b.p0)), "initial.p0")?,
        x0: need(ri.x0.or(base_init.map(|b| b.x0)), "initial.x0")?,
        delta_k: ri.delta_k.unwrap_or(DEFAULT_DELTA_K),
        eta: ri.eta.unwrap_or(DEFAULT_ETA),
    };
    initial.validate()?;
    if !(initial.p0 > 0.0) {
        return Err(Error::config("initial.p0", "must be positive"));
    }

    let detectors = if experiment.is_arrival() {
        unused(&raw.d1, "d1")?;
        unused(&raw.d2, "d2")?;
        let base = preset.map(|p| p.first_detector());
        Detectors::Arrival {
            detector: detector(&raw.detector, base, "detector", true)?,
        }
    } else {
        unused(&raw.detector, "detector")?;
        Detectors::Traversal {
            d1: detector(&raw.d1, preset.map(|p| p.first_detector()), "d1", false)?,
            d2: detector(&raw.d2, preset.map(|p| p.second_detector()), "d2", true)?,
        }
    };

    let (base_grid, base_dx_a) = match preset {
        Some(p) => {
            let (g, a) = p.grid(coarse);
            (Some(g), Some(a))
        }
        None => (None, None),
    };
    let rg = &raw.grid;
    let dx = need(rg.dx.or(base_grid.map(|g| g.dx)), "grid.dx")?;
    let grid = GridSpec::new(
        need(rg.x_min.or(base_grid.map(|g| g.x_min)), "grid.x_min")?,
        need(rg.x_max.or(base_grid.map(|g| g.x_max)), "grid.x_max")?,
        dx,
        need(rg.tau_cut.or(base_grid.map(|g| g.tau_cut)), "grid.tau_cut")?,
    );
    grid.validate()?;
    let dx_a = if raw.both_steps.unwrap_or(false) {
        let a = need(rg.dx_a.or(base_dx_a), "grid.dx_a")?;
        if !(a > grid.dx) || !a.is_finite() {
            return Err(Error::config("grid.dx_a", format!("must exceed grid.dx = {}", grid.dx)));
        }
        grid.with_step(a).validate()?;
        Some(a)
    } else {
        None
    };

    let boosts = raw.boosts.unwrap_or_default();
    for (i, v) in boosts.iter().enumerate() {
        contraction(*v).map_err(|_| Error::config(format!("boosts[{i}]"), format!("|v/c| = {} must be below 1", v.abs())))?;
    }
    let stride = raw.stride.unwrap_or(DEFAULT_STRIDE);
    if stride == 0 {
        return Err(Error::config("stride", "must be a positive integer"));
    }
    let samples = raw.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        return Err(Error::config("samples", "must be positive"));
    }
    Ok(ExperimentConfig {
        experiment,
        preset: preset.map(|p| p.to_string()),
        coarse,
        params,
        initial,
        detectors,
        grid,
        dx_a,
        boosts,
        stride,
        seed: raw.seed.unwrap_or(1),
        samples,
        out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
        joint: raw.joint.unwrap_or(false),
    })
}
