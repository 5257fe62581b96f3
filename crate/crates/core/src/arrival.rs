//! Time-of-arrival pipeline for a single detector at rest.

use serde::Serialize;

use crate::density::{boost_mean, richardson_error, DensityCurve, Frame};
use crate::detectors::{make_window, DetectorSpec};
use crate::propagator::{evolve, AlignedWindow, EvolutionRecord, EvolveOptions, GridSpec};
use crate::relkin::{build_initial_state, InitialStateSpec, ModelParams, SpinorSlice};
use crate::{Error, Result};

/// Detection probability below which no arrival density is formed.
pub const NO_DETECTION_THRESHOLD: f64 = 1e-8;

/// Everything one arrival run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ArrivalResult {
    pub initial: InitialStateSpec,
    pub detector: DetectorSpec,
    pub grid: GridSpec,
    pub params: ModelParams,
    /// Total detection probability up to the horizon.
    pub p_inf: f64,
    /// Normalized proper-time density `p(tau)`.
    pub proper_density: DensityCurve,
    /// Rest-frame arrival-time density `rho_0(t) = p(t + (x_D - x0))`.
    pub rest_density: DensityCurve,
    /// Mean arrival time in the rest frame.
    pub t_a0: f64,
    /// Richardson error of `t_a0`, when a paired run was made.
    pub error_t_a0: Option<f64>,
    #[serde(skip)]
    pub record: EvolutionRecord,
}

impl ArrivalResult {
    /// Light travel time from the preparation point to the detector.
    pub fn light_time(&self) -> f64 {
        self.detector.x_pos - self.initial.x0
    }
}

/// Co-moving initial field `Omega(0, x) = Psi_0(x0 - x_D, x)`.
pub fn arrival_initial_field(
    initial: &InitialStateSpec,
    detector: &DetectorSpec,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<SpinorSlice> {
    check_geometry(initial, detector)?;
    build_initial_state(initial, params, &grid.grid()?, initial.x0 - detector.x_pos)
}

fn check_geometry(initial: &InitialStateSpec, detector: &DetectorSpec) -> Result<()> {
    initial.validate()?;
    detector.validate("detector")?;
    if !(detector.x_pos > initial.x0) {
        return Err(Error::config(
            "detector.x_pos",
            format!("must lie ahead of the preparation point x0 = {}", initial.x0),
        ));
    }
    Ok(())
}

/// Evolves the co-moving field under one detector and forms the densities.
pub fn run_arrival(
    initial: &InitialStateSpec,
    detector: &DetectorSpec,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<ArrivalResult> {
    let omega0 = arrival_initial_field(initial, detector, grid, params)?;
    let window = make_window(detector, &grid.grid()?, params)?;
    let record = evolve(
        &omega0,
        &[AlignedWindow::co_moving(window)],
        grid,
        *params,
        EvolveOptions::default(),
    )?;
    arrival_from_record(initial, detector, grid, params, record)
}

/// Forms an [`ArrivalResult`] from a finished single-detector evolution.
pub fn arrival_from_record(
    initial: &InitialStateSpec,
    detector: &DetectorSpec,
    grid: &GridSpec,
    params: &ModelParams,
    record: EvolutionRecord,
) -> Result<ArrivalResult> {
    let p_inf = record.detection_probability(0);
    if p_inf < NO_DETECTION_THRESHOLD {
        return Err(Error::NoDetection {
            p_inf,
            threshold: NO_DETECTION_THRESHOLD,
        });
    }
    let values = record.rates(0).iter().map(|r| r / p_inf).collect();
    let proper_density = DensityCurve::new(record.tau().to_vec(), values, Frame::Proper)?;
    let light = detector.x_pos - initial.x0;
    let rest_density = proper_density.shifted(light, Frame::Rest);
    let t_a0 = proper_density.mean() - light;
    Ok(ArrivalResult {
        initial: *initial,
        detector: *detector,
        grid: *grid,
        params: *params,
        p_inf,
        proper_density,
        rest_density,
        t_a0,
        error_t_a0: None,
        record,
    })
}

/// Runs at two step sizes and attaches the Richardson error to the finer run.
///
/// Returns `(fine, coarse)`.
pub fn run_arrival_pair(
    initial: &InitialStateSpec,
    detector: &DetectorSpec,
    grid_b: &GridSpec,
    dx_a: f64,
    params: &ModelParams,
) -> Result<(ArrivalResult, ArrivalResult)> {
    let grid_a = grid_b.with_step(dx_a);
    let (fine, coarse) = rayon::join(
        || run_arrival(initial, detector, grid_b, params),
        || run_arrival(initial, detector, &grid_a, params),
    );
    let (mut fine, coarse) = (fine?, coarse?);
    fine.error_t_a0 = Some(richardson_error(fine.t_a0, coarse.t_a0, grid_b.dx, dx_a)?);
    Ok((fine, coarse))
}

/// Arrival density and mean time seen from a frame moving with velocity `v`.
pub fn boost_arrival(result: &ArrivalResult, v: f64) -> Result<(DensityCurve, f64)> {
    let anchor = result.detector.x_pos;
    let curve = result.rest_density.boosted(v, anchor)?;
    let t = boost_mean(result.t_a0, anchor, v)?;
    Ok((curve, t))
}
