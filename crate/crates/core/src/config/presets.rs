//! Named presets for the published experiments.
//!
//! A preset name is a base name followed by optional `-key=value` settings:
//!
//! ```text
//! fig1-p0=1.0
//! fig2-p0=2.0-state=PN
//! fig3-p0=0.75-state=N
//! fig5a-width=0.3
//! fig5b-height=5e-3
//! ```
//!
//! | base    | experiment | varied keys                                  |
//! |---------|------------|----------------------------------------------|
//! | `fig1`  | arrival    | `p0` (required), `state`, `width`, `height`  |
//! | `fig2`  | arrival    | same as `fig1`                               |
//! | `fig3`  | traversal  | `p0` (required), `state`, `width`, `height`  |
//! | `fig4`  | traversal  | same as `fig3`                               |
//! | `fig5a` | traversal  | `width` (required), `p0`, `state`, `height`  |
//! | `fig5b` | traversal  | `height` (required), `p0`, `state`, `width`  |
//!
//! `state` is `P`, `N` or `PN`. For traversal presets `width` and `height`
//! refer to the first detector. Values may use exponent notation
//! (`height=1e-5`).

use std::fmt;

use serde::Serialize;

use crate::detectors::DetectorSpec;
use crate::propagator::GridSpec;
use crate::relkin::{InitialStateSpec, StateKind};
use crate::{Error, Result};

/// Step of the coarse presets (angstrom).
pub const COARSE_DX: f64 = 0.002;
/// Second step of coarse paired runs (angstrom).
pub const COARSE_DX_A: f64 = 0.003;
/// Fine and paired steps of the arrival presets (angstrom).
pub const ARRIVAL_DX: (f64, f64) = (0.0004, 0.0006);
/// Fine and paired steps of the traversal presets (angstrom).
pub const TRAVERSAL_DX: (f64, f64) = (0.0006, 0.001);
/// Walls of the arrival domain (angstrom).
pub const ARRIVAL_WALLS: (f64, f64) = (-6.0, 4.0);
/// Walls of the traversal domain (angstrom).
pub const TRAVERSAL_WALLS: (f64, f64) = (-8.0, 8.0);

/// Arrival horizon: `(lowest p0 of the band, tau_cut)`, ascending.
const ARRIVAL_TAU_CUT: [(f64, f64); 4] = [(0.0, 13.0), (0.5, 7.0), (0.75, 5.0), (1.0, 4.5)];
/// Traversal horizon: `(lowest p0 of the band, tau_cut)`, ascending. Momenta
/// below the first listed value use its horizon.
const TRAVERSAL_TAU_CUT: [(f64, f64); 5] =
    [(0.25, 31.5), (0.5, 17.5), (0.75, 13.5), (1.0, 11.5), (1.5, 10.5)];

/// Momenta listed by `presets` for the momentum sweeps.
pub const SWEEP_MOMENTA: [f64; 7] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
/// First-detector widths listed for `fig5a`.
pub const FIG5A_WIDTHS: [f64; 6] = [0.02, 0.1, 0.3, 0.5, 0.75, 1.0];
/// First-detector heights listed for `fig5b`.
pub const FIG5B_HEIGHTS: [f64; 6] = [1e-4, 1e-3, 5e-3, 1e-2, 2e-2, 5e-2];

fn band(table: &[(f64, f64)], p0: f64) -> f64 {
    table
        .iter()
        .rev()
        .find(|(lo, _)| p0 >= *lo)
        .unwrap_or(&table[0])
        .1
}

/// Horizon of the arrival presets for momentum `p0`.
pub fn arrival_tau_cut(p0: f64) -> f64 {
    band(&ARRIVAL_TAU_CUT, p0)
}

/// Horizon of the traversal presets for momentum `p0`.
pub fn traversal_tau_cut(p0: f64) -> f64 {
    band(&TRAVERSAL_TAU_CUT, p0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetBase {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
}

impl PresetBase {
    const ALL: [PresetBase; 6] = [
        PresetBase::Fig1,
        PresetBase::Fig2,
        PresetBase::Fig3,
        PresetBase::Fig4,
        PresetBase::Fig5a,
        PresetBase::Fig5b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetBase::Fig1 => "fig1",
            PresetBase::Fig2 => "fig2",
            PresetBase::Fig3 => "fig3",
            PresetBase::Fig4 => "fig4",
            PresetBase::Fig5a => "fig5a",
            PresetBase::Fig5b => "fig5b",
        }
    }

    pub fn is_arrival(self) -> bool {
        matches!(self, PresetBase::Fig1 | PresetBase::Fig2)
    }
}

/// A parsed preset name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub base: PresetBase,
    pub p0: f64,
    pub state: StateKind,
    /// Width of the arrival detector or of the first traversal detector.
    pub width: f64,
    /// Height of the arrival detector or of the first traversal detector.
    pub height: f64,
}

fn state_code(kind: StateKind) -> &'static str {
    kind.short_name()
}

fn parse_state(value: &str) -> Option<StateKind> {
    match value {
        "P" => Some(StateKind::PositiveEnergy),
        "N" => Some(StateKind::NegativeEnergy),
        "PN" => Some(StateKind::Mixed),
        _ => None,
    }
}

fn parse_positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Parse(format!("preset key `{key}`: `{value}` is not a number")))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Parse(format!("preset key `{key}` must be positive, got {value}")));
    }
    Ok(v)
}

impl Preset {
    /// Parses a preset name; see the module documentation for the grammar.
    pub fn parse(name: &str) -> Result<Preset> {
        let mut parts: Vec<String> = Vec::new();
        for piece in name.split('-') {
            if parts.len() > 1 && !piece.contains('=') {
                let last = parts.last_mut().expect("parts is not empty");
                last.push('-');
                last.push_str(piece);
            } else {
                parts.push(piece.to_string());
            }
        }
        let base_name = parts.first().map(String::as_str).unwrap_or("");
        let base = PresetBase::ALL
            .into_iter()
            .find(|b| b.name() == base_name)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown preset `{name}`; bases are fig1, fig2, fig3, fig4, fig5a, fig5b"
                ))
            })?;
        let (width, height) = if base.is_arrival() { (0.01, 1e-5) } else { (0.5, 1e-3) };
        let mut preset = Preset {
            base,
            p0: f64::NAN,
            state: StateKind::PositiveEnergy,
            width,
            height,
        };
        if matches!(base, PresetBase::Fig5a | PresetBase::Fig5b) {
            preset.p0 = 0.75;
        }
        let mut seen: Vec<&str> = Vec::new();
        for part in &parts[1..] {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("preset setting `{part}` is not key=value")))?;
            if seen.contains(&key) {
                return Err(Error::Parse(format!("preset key `{key}` given twice")));
            }
            seen.push(key);
            match key {
                "p0" => preset.p0 = parse_positive(key, value)?,
                "width" => preset.width = parse_positive(key, value)?,
                "height" => preset.height = parse_positive(key, value)?,
                "state" => {
                    preset.state = parse_state(value).ok_or_else(|| {
                        Error::Parse(format!("preset state `{value}` is not P, N or PN"))
                    })?
                }
                _ => return Err(Error::Parse(format!("unknown preset key `{key}`"))),
            }
        }
        let required = match base {
            PresetBase::Fig5a => "width",
            PresetBase::Fig5b => "height",
            _ => "p0",
        };
        if !seen.contains(&required) {
            return Err(Error::Parse(format!("preset `{}` needs `{required}=...`", base.name())));
        }
        Ok(preset)
    }

    pub fn is_arrival(&self) -> bool {
        self.base.is_arrival()
    }

    /// Prepared state of the preset.
    pub fn initial(&self) -> InitialStateSpec {
        let x0 = if self.is_arrival() { -1.0 } else { -1.5 };
        InitialStateSpec::new(self.state, self.p0, x0)
    }

    /// Arrival detector, or the first traversal detector.
    pub fn first_detector(&self) -> DetectorSpec {
        DetectorSpec::new(0.0, self.width, self.height, self.is_arrival())
    }

    /// Second traversal detector.
    pub fn second_detector(&self) -> DetectorSpec {
        DetectorSpec::new(1.26, 0.02, 1e-3, true)
    }

    pub fn tau_cut(&self) -> f64 {
        if self.is_arrival() {
            arrival_tau_cut(self.p0)
        } else {
            traversal_tau_cut(self.p0)
        }
    }

    /// Grid and paired step: the published steps, or the coarse ones.
    pub fn grid(&self, coarse: bool) -> (GridSpec, f64) {
        let ((lo, hi), (dx, dx_a)) = match (self.is_arrival(), coarse) {
            (true, false) => (ARRIVAL_WALLS, ARRIVAL_DX),
            (false, false) => (TRAVERSAL_WALLS, TRAVERSAL_DX),
            (true, true) => (ARRIVAL_WALLS, (COARSE_DX, COARSE_DX_A)),
            (false, true) => (TRAVERSAL_WALLS, (COARSE_DX, COARSE_DX_A)),
        };
        (GridSpec::new(lo, hi, dx, self.tau_cut()), dx_a)
    }
}

impl fmt::Display for Preset {
    /// Canonical name: base, then every setting that differs from the
    /// base defaults, in the order `p0`, `state`, `width`, `height`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let defaults = match self.base {
            PresetBase::Fig5a => Preset::parse("fig5a-width=1"),
            PresetBase::Fig5b => Preset::parse("fig5b-height=1"),
            b => Preset::parse(&format!("{}-p0=1", b.name())),
        }
        .expect("default preset parses");
        write!(f, "{}", self.base.name())?;
        if !matches!(self.base, PresetBase::Fig5a | PresetBase::Fig5b) || self.p0 != 0.75 {
            write!(f, "-p0={:?}", self.p0)?;
        }
        if self.state != StateKind::PositiveEnergy {
            write!(f, "-state={}", state_code(self.state))?;
        }
        if self.base == PresetBase::Fig5a || self.width != defaults.width {
            write!(f, "-width={:?}", self.width)?;
        }
        if self.base == PresetBase::Fig5b || self.height != defaults.height {
            write!(f, "-height={:?}", self.height)?;
        }
        Ok(())
    }
}

/// Canonical names of the catalogued presets.
pub fn catalog() -> Vec<String> {
    let mut out = Vec::new();
    for base in ["fig1", "fig2", "fig3", "fig4"] {
        for state in ["P", "N", "PN"] {
            for p0 in SWEEP_MOMENTA {
                let name = format!("{base}-p0={p0:?}-state={state}");
                out.push(Preset::parse(&name).expect("catalog entry parses").to_string());
            }
        }
    }
    for p0 in SWEEP_MOMENTA {
        out.push(Preset::parse(&format!("fig1-p0={p0:?}-height=1.0")).unwrap().to_string());
        out.push(Preset::parse(&format!("fig1-p0={p0:?}-width=0.4")).unwrap().to_string());
    }
    for w in FIG5A_WIDTHS {
        out.push(Preset::parse(&format!("fig5a-width={w:?}")).unwrap().to_string());
    }
    for h in FIG5B_HEIGHTS {
        out.push(Preset::parse(&format!("fig5b-height={h:?}")).unwrap().to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_matches_published_arrival_setup() {
        let p = Preset::parse("fig1-p0=1.0").unwrap();
        assert!(p.is_arrival());
        let init = p.initial();
        assert_eq!((init.kind, init.p0, init.x0), (StateKind::PositiveEnergy, 1.0, -1.0));
        let d = p.first_detector();
        assert_eq!((d.x_pos, d.width, d.height, d.destructive), (0.0, 0.01, 1e-5, true));
        assert_eq!(p.tau_cut(), 4.5);
        let (g, dx_a) = p.grid(false);
        assert_eq!((g.x_min, g.x_max, g.dx, g.dtau, dx_a), (-6.0, 4.0, 0.0004, 0.0004, 0.0006));
        let (g, _) = p.grid(true);
        assert_eq!(g.dx, COARSE_DX);
    }

    #[test]
    fn fig3_matches_published_traversal_setup() {
        let p = Preset::parse("fig3-p0=0.75").unwrap();
        assert!(!p.is_arrival());
        assert_eq!(p.initial().x0, -1.5);
        let d1 = p.first_detector();
        assert_eq!((d1.x_pos, d1.width, d1.height, d1.destructive), (0.0, 0.5, 1e-3, false));
        let d2 = p.second_detector();
        assert_eq!((d2.x_pos, d2.width, d2.height, d2.destructive), (1.26, 0.02, 1e-3, true));
        assert_eq!(p.tau_cut(), 13.5);
        let (g, dx_a) = p.grid(false);
        assert_eq!((g.x_min, g.x_max, g.dx, dx_a), (-8.0, 8.0, 0.0006, 0.001));
    }

    #[test]
    fn horizon_tables() {
        assert_eq!(arrival_tau_cut(0.3), 13.0);
        assert_eq!(arrival_tau_cut(0.5), 7.0);
        assert_eq!(arrival_tau_cut(0.9), 5.0);
        assert_eq!(arrival_tau_cut(2.0), 4.5);
        assert_eq!(traversal_tau_cut(0.1), 31.5);
        assert_eq!(traversal_tau_cut(0.3), 31.5);
        assert_eq!(traversal_tau_cut(0.6), 17.5);
        assert_eq!(traversal_tau_cut(1.2), 11.5);
        assert_eq!(traversal_tau_cut(1.5), 10.5);
    }

    #[test]
    fn settings_and_exponents() {
        let p = Preset::parse("fig2-p0=2.0-state=PN-height=1e-5-width=0.4").unwrap();
        assert_eq!(p.state, StateKind::Mixed);
        assert_eq!((p.width, p.height), (0.4, 1e-5));
        let p = Preset::parse("fig5b-height=5e-3").unwrap();
        assert_eq!((p.p0, p.height, p.width), (0.75, 5e-3, 0.5));
    }

    #[test]
    fn bad_names_are_rejected() {
        for name in [
            "",
            "fig9-p0=1",
            "fig1",
            "fig1-p0=0",
            "fig1-p0=-1",
            "fig1-p0=abc",
            "fig1-p0=1-p0=2",
            "fig1-p0=1-state=X",
            "fig1-p0=1-color=red",
            "fig5a",
            "fig1-p0",
        ] {
            assert!(Preset::parse(name).is_err(), "{name}");
        }
    }

    #[test]
    fn canonical_names_round_trip() {
        for name in catalog() {
            let p = Preset::parse(&name).unwrap();
            assert_eq!(p.to_string(), name);
        }
        assert_eq!(Preset::parse("fig1-p0=1").unwrap().to_string(), "fig1-p0=1.0");
    }
}
