//! Sampled one-dimensional probability densities and the frame changes
//! between proper time, the detectors' rest frame, and boosted frames.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Time axis a density is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Frame {
    /// Proper time of the detector trajectory.
    Proper,
    /// Coordinate time in the detectors' rest frame `K_0`.
    Rest,
    /// Coordinate time in a frame `K_v` moving with velocity `v` (units of c).
    Boosted { v: f64 },
}

/// Density samples on an increasing abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    abscissa: Vec<f64>,
    values: Vec<f64>,
    frame: Frame,
    /// Trapezoid mass before normalization.
    raw_mass: f64,
}

impl DensityCurve {
    /// Builds a curve, checking lengths, ordering and non-negativity.
    pub fn new(abscissa: Vec<f64>, values: Vec<f64>, frame: Frame) -> Result<Self> {
        if abscissa.len() != values.len() {
            return Err(Error::Usage(format!(
                "abscissa has {} samples but values have {}",
                abscissa.len(),
                values.len()
            )));
        }
        if abscissa.len() < 2 {
            return Err(Error::Usage("a density needs at least two samples".into()));
        }
        if abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("abscissa must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Usage(format!("density value {v} is negative or not finite")));
        }
        let raw_mass = trapezoid(&abscissa, &values);
        Ok(DensityCurve {
            abscissa,
            values,
            frame,
            raw_mass,
        })
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid mass the samples had when the curve was created.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Current trapezoid mass.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.abscissa, &self.values)
    }

    /// Rescales to unit trapezoid mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Usage("cannot normalize a density with zero mass".into()));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v /= m);
        Ok(out)
    }

    /// Trapezoid mean `int t rho dt / int rho dt`.
    pub fn mean(&self) -> f64 {
        let tv: Vec<f64> = self
            .abscissa
            .iter()
            .zip(&self.values)
            .map(|(t, v)| t * v)
            .collect();
        trapezoid(&self.abscissa, &tv) / self.mass()
    }

    /// Sample with the largest density, as `(t, value)`.
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (self.abscissa[i], v)
    }

    /// Mean spacing between samples.
    pub fn bin_width(&self) -> f64 {
        (self.abscissa[self.len() - 1] - self.abscissa[0]) / (self.len() - 1) as f64
    }

    /// Linear interpolation, zero outside the sampled range.
    pub fn interpolate(&self, t: f64) -> f64 {
        interpolate(&self.abscissa, &self.values, t)
    }

    /// Moves the abscissa by `t -> t - offset`, keeping the values.
    pub fn shifted(&self, offset: f64, frame: Frame) -> Self {
        DensityCurve {
            abscissa: self.abscissa.iter().map(|t| t - offset).collect(),
            values: self.values.clone(),
            frame,
            raw_mass: self.raw_mass,
        }
    }

    /// Rest-frame density seen from a frame moving with velocity `v`.
    ///
    /// With `s = sqrt(1 - v^2)` the boosted density is
    /// `rho_v(t~) = s rho_0(s t~ + v anchor)`, so each sample moves to
    /// `t~ = (t - v anchor) / s` and is multiplied by `s`. The mean then
    /// transforms as `gamma (T - v anchor)`.
    pub fn boosted(&self, v: f64, anchor: f64) -> Result<Self> {
        let s = contraction(v)?;
        Ok(DensityCurve {
            abscissa: self.abscissa.iter().map(|t| (t - v * anchor) / s).collect(),
            values: self.values.iter().map(|r| r * s).collect(),
            frame: Frame::Boosted { v },
            raw_mass: self.raw_mass,
        })
    }

    /// L1 distance `int |f - g| dt` between two curves, integrating the
    /// linear interpolants over the union of both sample sets.
    pub fn l1_distance(&self, other: &DensityCurve) -> f64 {
        let mut ts: Vec<f64> = self.abscissa.iter().chain(&other.abscissa).copied().collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let diff: Vec<f64> = ts
            .iter()
            .map(|&t| (self.interpolate(t) - other.interpolate(t)).abs())
            .collect();
        trapezoid(&ts, &diff)
    }
}

/// `sqrt(1 - v^2)`, rejecting `|v| >= 1`.
pub fn contraction(v: f64) -> Result<f64> {
    if !(v.abs() < 1.0) {
        return Err(Error::Domain(format!("frame velocity {v} must satisfy |v/c| < 1")));
    }
    Ok((1.0 - v * v).sqrt())
}

/// Closed-form boost `gamma (t - v anchor)` of a rest-frame mean time.
pub fn boost_mean(t: f64, anchor: f64, v: f64) -> Result<f64> {
    Ok((t - v * anchor) / contraction(v)?)
}

/// Step-size extrapolation error `dx_b / (dx_a - dx_b) * |value_b - value_a|`.
pub fn richardson_error(value_b: f64, value_a: f64, dx_b: f64, dx_a: f64) -> Result<f64> {
    if dx_a == dx_b {
        return Err(Error::Usage("Richardson error needs two different step sizes".into()));
    }
    if !(dx_b > 0.0) || !(dx_a > dx_b) {
        return Err(Error::Usage(format!(
            "Richardson error needs dx_a > dx_b > 0, got dx_a = {dx_a}, dx_b = {dx_b}"
        )));
    }
    Ok(dx_b / (dx_a - dx_b) * (value_b - value_a).abs())
}

/// Trapezoid rule on arbitrary (increasing) nodes.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Piecewise-linear interpolation on increasing nodes, zero outside.
pub fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    if x.is_empty() || t < x[0] || t > x[x.len() - 1] {
        return 0.0;
    }
    let i = x.partition_point(|&xi| xi <= t);
    if i == 0 {
        return y[0];
    }
    if i >= x.len() {
        return y[x.len() - 1];
    }
    let f = (t - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + f * (y[i] - y[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> DensityCurve {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let v = t.iter().map(|&t| 1.0 - (t - 1.0).abs()).collect();
        DensityCurve::new(t, v, Frame::Rest).unwrap()
    }

    #[test]
    fn richardson_examples() {
        assert_eq!(richardson_error(1.4, 1.4, 0.0004, 0.0006).unwrap(), 0.0);
        let e = richardson_error(1.40, 1.42, 0.0004, 0.0006).unwrap();
        assert!((e - 0.04).abs() < 1e-12);
        let e = richardson_error(1.78, 1.81, 0.0006, 0.001).unwrap();
        assert!((e - 0.045).abs() < 1e-12);
        assert!(matches!(
            richardson_error(1.0, 1.0, 0.001, 0.001),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn triangle_mass_mean_peak() {
        let c = triangle();
        assert!((c.mass() - 1.0).abs() < 1e-12);
        assert!((c.mean() - 1.0).abs() < 1e-12);
        let (t, v) = c.peak();
        assert!((t - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boost_moves_mean_by_closed_form() {
        let c = triangle();
        for v in [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9] {
            let b = c.boosted(v, 1.26).unwrap();
            let closed = boost_mean(c.mean(), 1.26, v).unwrap();
            assert!((b.mean() - closed).abs() < 1e-12);
            assert!((b.mass() - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.boosted(0.0, 3.0).unwrap().values(), c.values());
        assert!(matches!(c.boosted(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn l1_distance_of_shifted_triangle() {
        // Oracle: two unit triangles offset by h overlap in a triangle of
        // height 1 - h/2 on each side, so the L1 distance is 2 h - h^2 / 2.
        let c = triangle();
        let h = 0.1;
        let d = c.shifted(-h, Frame::Rest);
        let expected = 2.0 * h - h * h / 2.0;
        assert!((c.l1_distance(&d) - expected).abs() < 1e-3);
        assert_eq!(c.l1_distance(&c), 0.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(DensityCurve::new(vec![0.0, 1.0], vec![1.0], Frame::Rest).is_err());
        assert!(DensityCurve::new(vec![1.0, 0.0], vec![1.0, 1.0], Frame::Rest).is_err());
        assert!(DensityCurve::new(vec![0.0, 1.0], vec![-1.0, 1.0], Frame::Rest).is_err());
    }

    #[test]
    fn interpolation_is_zero_outside() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 5.0];
        assert_eq!(interpolate(&x, &y, -0.1), 0.0);
        assert_eq!(interpolate(&x, &y, 0.5), 2.0);
        assert_eq!(interpolate(&x, &y, 2.0), 5.0);
        assert_eq!(interpolate(&x, &y, 2.1), 0.0);
    }
}
