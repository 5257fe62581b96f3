//! Comparison of sampled event times with computed densities.

use crate::density::{interpolate, DensityCurve};

/// Normalized cumulative distribution of a density, piecewise linear
/// between the cumulative trapezoid sums at the sample nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    abscissa: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Cdf {
    pub fn from_curve(curve: &DensityCurve) -> Self {
        let t = curve.abscissa();
        let v = curve.values();
        let mut cumulative = Vec::with_capacity(t.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..t.len() {
            acc += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
            cumulative.push(acc);
        }
        if acc > 0.0 {
            cumulative.iter_mut().for_each(|c| *c /= acc);
        }
        Cdf {
            abscissa: t.to_vec(),
            cumulative,
        }
    }

    /// Probability of a value not larger than `t`.
    pub fn at(&self, t: f64) -> f64 {
        if t <= self.abscissa[0] {
            0.0
        } else if t >= self.abscissa[self.abscissa.len() - 1] {
            1.0
        } else {
            interpolate(&self.abscissa, &self.cumulative, t)
        }
    }
}

/// Kolmogorov-Smirnov distance `sup |F_n - F|` between the empirical
/// distribution of `samples` and a continuous distribution function.
///
/// Returns `NaN` for an empty sample.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = cdf(xi);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Frame;

    #[test]
    fn uniform_cdf_from_flat_density() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let c = DensityCurve::new(t, vec![1.0; 11], Frame::Rest).unwrap();
        let cdf = Cdf::from_curve(&c);
        assert_eq!(cdf.at(-1.0), 0.0);
        assert!((cdf.at(0.25) - 0.25).abs() < 1e-12);
        assert_eq!(cdf.at(2.0), 1.0);
    }

    #[test]
    fn ks_of_known_samples() {
        // Oracle: the grid i/n + 1/(2n) has distance exactly 1/(2n) from U(0,1).
        let n = 100;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&x, |t| t.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        let d = ks_distance(&[0.0; 10], |t| t.clamp(0.0, 1.0));
        assert!((d - 1.0).abs() < 1e-12);
        assert!(ks_distance(&[], |t| t).is_nan());
    }
}
