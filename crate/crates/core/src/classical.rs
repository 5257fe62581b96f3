//! Classical relativistic point-particle baselines.

use serde::Serialize;

use crate::density::boost_mean;
use crate::{Error, Result};

/// Classical arrival and traversal times in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalPrediction {
    pub t_arrival: f64,
    pub t_traversal: f64,
    pub v_over_c: f64,
}

fn inverse_speed(p0: f64) -> Result<f64> {
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::Domain(format!("momentum p0 = {p0} must be positive")));
    }
    Ok((1.0 + 1.0 / (p0 * p0)).sqrt())
}

/// Flight time from `x0` to `x_d` at momentum `p0` (units of `m c`).
pub fn classical_arrival(p0: f64, x0: f64, x_d: f64) -> Result<f64> {
    let inv = inverse_speed(p0)?;
    if !(x_d > x0) {
        return Err(Error::Domain(format!("detector at {x_d} is not ahead of x0 = {x0}")));
    }
    Ok((x_d - x0) * inv)
}

/// Flight time from `x1` to `x2` at momentum `p0`.
pub fn classical_traversal(p0: f64, x1: f64, x2: f64) -> Result<f64> {
    let inv = inverse_speed(p0)?;
    if !(x2 > x1) {
        return Err(Error::Domain(format!("second detector at {x2} is not beyond x1 = {x1}")));
    }
    Ok((x2 - x1) * inv)
}

/// `gamma (time - v anchor)`: a rest-frame time difference seen from `K_v`.
pub fn classical_boost(time: f64, anchor: f64, v: f64) -> Result<f64> {
    boost_mean(time, anchor, v)
}

/// Both baselines of the standard two-detector geometry in frame `v`.
pub fn predict(p0: f64, x0: f64, x1: f64, x2: f64, v: f64) -> Result<ClassicalPrediction> {
    let ta = classical_arrival(p0, x0, x1)?;
    let tt = classical_traversal(p0, x1, x2)?;
    Ok(ClassicalPrediction {
        t_arrival: classical_boost(ta, x1, v)?,
        t_traversal: classical_boost(tt, x2 - x1, v)?,
        v_over_c: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrival_examples() {
        let t = classical_arrival(1.0, -1.0, 0.0).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-15);
        let t = classical_arrival(0.25, -1.0, 0.0).unwrap();
        assert!((t - 17f64.sqrt()).abs() < 1e-12);
        let t = classical_arrival(1e9, -1.0, 0.0).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(matches!(classical_arrival(0.0, -1.0, 0.0), Err(Error::Domain(_))));
        assert!(classical_arrival(-1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn traversal_examples() {
        let t = classical_traversal(1.0, 0.0, 1.26).unwrap();
        assert!((t - 1.26 * 2f64.sqrt()).abs() < 1e-12);
        let t = classical_traversal(0.75, 0.0, 1.26).unwrap();
        assert!((t - 2.1).abs() < 1e-12);
        let t = classical_traversal(1e9, 0.0, 1.26).unwrap();
        assert!((t - 1.26).abs() < 1e-12);
    }

    #[test]
    fn boost_examples() {
        assert_eq!(classical_boost(1.7, 3.0, 0.0).unwrap(), 1.7);
        let t = classical_boost(2f64.sqrt(), 0.0, 0.6).unwrap();
        assert!((t - 1.25 * 2f64.sqrt()).abs() < 1e-12);
        assert!(classical_boost(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn prediction_bundles_both_times() {
        let p = predict(1.0, -1.5, 0.0, 1.26, 0.0).unwrap();
        assert!((p.t_arrival - 1.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!((p.t_traversal - 1.26 * 2f64.sqrt()).abs() < 1e-12);
    }
}
