//! Property tests of the frame, error-bar, file-format, preset and sampling
//! invariants.

use eeqt_core::config::Preset;
use eeqt_core::density::{boost_mean, richardson_error, DensityCurve, Frame};
use eeqt_core::mc_events::RngStream;
use eeqt_core::output::{read_density_csv, write_density_csv};
use eeqt_core::relkin::{charge_conjugate, Grid, SpinorSlice};
use eeqt_core::stats::{ks_distance, Cdf};
use num_complex::Complex64;
use proptest::prelude::*;

fn curve_strategy() -> impl Strategy<Value = DensityCurve> {
    (
        -5.0f64..5.0,
        prop::collection::vec((1e-3f64..1.0, 0.0f64..10.0), 2..60),
    )
        .prop_filter_map("needs positive mass", |(start, steps)| {
            let mut t = start;
            let mut ts = Vec::with_capacity(steps.len());
            let mut vs = Vec::with_capacity(steps.len());
            for (dt, v) in steps {
                ts.push(t);
                vs.push(v);
                t += dt;
            }
            let c = DensityCurve::new(ts, vs, Frame::Rest).ok()?;
            (c.mass() > 1e-6).then_some(c)
        })
}

fn velocity() -> impl Strategy<Value = f64> {
    -0.95f64..0.95
}

proptest! {
    #[test]
    fn boosted_mean_equals_closed_form(c in curve_strategy(), v in velocity(), anchor in -3.0f64..3.0) {
        let b = c.boosted(v, anchor).unwrap();
        let closed = boost_mean(c.mean(), anchor, v).unwrap();
        prop_assert!((b.mean() - closed).abs() <= 1e-9 * (1.0 + closed.abs()));
        prop_assert!((b.mass() - c.mass()).abs() <= 1e-12 * c.mass());
    }

    #[test]
    fn richardson_error_is_symmetric_and_scales(
        a in -10.0f64..10.0, b in -10.0f64..10.0,
        dx_b in 1e-4f64..1e-2, ratio in 1.1f64..3.0, k in 0.1f64..10.0,
    ) {
        let dx_a = dx_b * ratio;
        let e = richardson_error(b, a, dx_b, dx_a).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, richardson_error(a, b, dx_b, dx_a).unwrap());
        prop_assert!((richardson_error(k * b, k * a, dx_b, dx_a).unwrap() - k * e).abs() <= 1e-12 * (1.0 + k * e));
        prop_assert_eq!(richardson_error(a, a, dx_b, dx_a).unwrap(), 0.0);
        prop_assert!(richardson_error(a, b, dx_a, dx_b).is_err());
    }

    #[test]
    fn density_csv_round_trips(c in curve_strategy(), v in velocity(), frame_kind in 0u8..3) {
        let frame = match frame_kind {
            0 => Frame::Proper,
            1 => Frame::Rest,
            _ => Frame::Boosted { v },
        };
        let c = DensityCurve::new(c.abscissa().to_vec(), c.values().to_vec(), frame).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&c, &mut buf).unwrap();
        let back = read_density_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.frame(), c.frame());
        for (x, y) in back.abscissa().iter().zip(c.abscissa()).chain(back.values().iter().zip(c.values())) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn preset_names_round_trip(
        base in 0usize..6, p0 in 0.1f64..3.0, state in 0usize..3,
        width in 1e-3f64..2.0, height in 1e-7f64..2.0,
    ) {
        let base_name = ["fig1", "fig2", "fig3", "fig4", "fig5a", "fig5b"][base];
        let state_code = ["P", "N", "PN"][state];
        let name = format!("{base_name}-p0={p0:?}-state={state_code}-width={width:?}-height={height:e}");
        let preset = Preset::parse(&name).unwrap();
        prop_assert_eq!(preset.p0, p0);
        prop_assert_eq!(preset.width, width);
        prop_assert_eq!(preset.height, height);
        let canonical = preset.to_string();
        prop_assert_eq!(Preset::parse(&canonical).unwrap(), preset);
    }

    #[test]
    fn chain_streams_are_reproducible(seed in any::<u64>(), chain in 0u64..1 << 34, n in 1usize..20) {
        let mut a = RngStream::for_chain(seed, chain);
        let xs: Vec<f64> = (0..n).map(|_| a.uniform()).collect();
        let mut b = RngStream::new(seed);
        b.reset_chain(chain);
        let ys: Vec<f64> = (0..n).map(|_| b.uniform()).collect();
        prop_assert_eq!(&xs, &ys);
        prop_assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn charge_conjugation_is_a_norm_preserving_involution(
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4 * 21),
    ) {
        let grid = Grid::new(-1.0, 1.0, 0.1).unwrap();
        let psi = SpinorSlice::from_fn(grid, 0.0, |x| {
            let j = ((x + 1.0) / 0.1).round() as usize;
            std::array::from_fn(|c| Complex64::new(values[4 * j + c].0, values[4 * j + c].1))
        });
        let once = charge_conjugate(&psi);
        prop_assert!((once.norm_sq() - psi.norm_sq()).abs() <= 1e-12 * (1.0 + psi.norm_sq()));
        prop_assert!(charge_conjugate(&once).max_abs_diff(&psi) <= 1e-15);
    }

    #[test]
    fn cdf_is_monotone_and_ks_is_bounded(
        c in curve_strategy(),
        samples in prop::collection::vec(-6.0f64..70.0, 1..50),
    ) {
        let cdf = Cdf::from_curve(&c);
        let mut prev = 0.0;
        for i in 0..=100 {
            let t = -6.0 + 0.76 * i as f64;
            let f = cdf.at(t);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= prev - 1e-15);
            prev = f;
        }
        let d = ks_distance(&samples, |t| cdf.at(t));
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
