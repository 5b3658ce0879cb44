use proptest::prelude::*;

use roughwave::config::KeyValues;
use roughwave::evolution::{evolve, PropagatorConfig};
use roughwave::field::{read_snapshot, write_snapshot};
use roughwave::output::fmt_f64;
use roughwave::packets::PacketFrame;
use roughwave::potential::from_fn;
use roughwave::resonance::{defect_numerator, signed_defect, two_level_coupling, two_level_power};
use roughwave::{Grid, WaveFunction, C64};

fn state(grid: &Grid, k: f64, coeffs: &[(f64, f64)]) -> WaveFunction {
    let t = grid.t();
    WaveFunction::from_fn(grid, k, |x| {
        coeffs.iter().enumerate().map(|(m, &(re, im))| C64::new(re, im) * C64::from_polar(1.0, m as f64 * x / t)).sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strang_preserves_norm_for_real_potentials(
        a in -2.0f64..2.0, b in -2.0f64..2.0, om in -1.0f64..1.0,
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8),
    ) {
        let grid = Grid::new(4.0, 64).unwrap();
        let f = state(&grid, 1.0, &coeffs);
        prop_assume!(f.l2_norm() > 1e-3);
        let mut v = from_fn(&grid, 0.0, false, move |x, t| C64::new(a * (x / 4.0 + om * t).cos() + b * (x / 2.0).sin(), 0.0));
        v.is_real = true;
        v.bound = a.abs() + b.abs();
        let u = evolve(&f, &v, 0.0, 2.0, &PropagatorConfig::new(0.01)).unwrap();
        prop_assert!((u.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn frame_identity_on_random_states(
        k in 2.0f64..4.0,
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let grid = Grid::new(16.0, 256).unwrap();
        let f = state(&grid, k, &coeffs);
        prop_assume!(f.l2_norm() > 1e-3);
        let frame = PacketFrame::new(&grid, k).unwrap();
        let c = frame.analyze(&f);
        prop_assert!(c.frame_identity_error(&f) < 1e-10);
        prop_assert!(frame.synthesize(&c).distance(&f) / f.l2_norm() < 1e-10);
    }

    #[test]
    fn defect_is_the_integer_numerator_over_kappa_squared(
        kappa in 4u32..64, l in -60i64..60, l2 in -60i64..60, lb in -60i64..60, q in -100i64..100, q2 in -100i64..100,
    ) {
        let k = kappa as f64;
        let d = signed_defect(l as f64 / k, l2 as f64 / k, lb as f64 / k, q, q2);
        let exact = defect_numerator(l, l2, lb, q, q2) as f64 / (k * k);
        prop_assert!((d - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
    }

    #[test]
    fn two_level_norm_grows_geometrically(d in 0.01f64..2.0, amp in 0.0f64..1.0, j in 0u64..40) {
        let lam = two_level_coupling(d, amp);
        let (a, b) = two_level_power(C64::new(1.0, 0.0), C64::new(0.0, 0.0), lam, j);
        let expect = (1.0 + lam.norm_sqr()).powf(j as f64);
        prop_assert!(((a.norm_sqr() + b.norm_sqr()) / expect - 1.0).abs() < 1e-10);
    }

    #[test]
    fn config_text_round_trips(entries in prop::collection::btree_map("[a-z][a-z0-9_]{0,8}", "[A-Za-z0-9_.+-]{1,12}", 0..10)) {
        let mut kv = KeyValues::default();
        for (k, v) in &entries {
            kv.insert(k, v);
        }
        let back = KeyValues::parse(&kv.to_text()).unwrap();
        prop_assert_eq!(back.as_map(), kv.as_map());
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn snapshots_round_trip(k in 0.5f64..4.0, t in 0.0f64..100.0, coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6)) {
        let grid = Grid::new(8.0, 128).unwrap();
        let f = state(&grid, k, &coeffs).with_time(t);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        let snap = read_snapshot(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(snap.grid.m(), 128);
        prop_assert_eq!(snap.values, f.values);
        prop_assert_eq!(snap.k.to_bits(), k.to_bits());
        prop_assert_eq!(snap.time_tag.to_bits(), t.to_bits());
    }
}
