use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::potential::{cosine_with_amplitude, from_fn, trap, trap_well, zero};

fn gaussian(grid: &Grid, k: f64, sigma: f64, xi0: f64) -> WaveFunction {
    WaveFunction::from_fn(grid, k, |x| C64::from_polar((-x * x / (2.0 * sigma * sigma)).exp(), xi0 * x)).normalized()
}

fn random_smooth(grid: &Grid, k: f64, seed: u64, modes: i64) -> WaveFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, C64)> = (-modes..=modes)
        .map(|m| (m as f64 / grid.t(), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    WaveFunction::from_fn(grid, k, |x| coeffs.iter().map(|(xi, c)| c * C64::from_polar(1.0, xi * x)).sum()).normalized()
}

fn smooth_potential(grid: &Grid, seed: u64, amp: f64) -> SpaceTimePotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = grid.t();
    let terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let m = rng.gen_range(1..=4) as f64 / t;
            (m, rng.gen_range(-0.5..0.5), rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let norm: f64 = terms.iter().map(|x| x.3.abs()).sum();
    let mut v = from_fn(grid, 0.0, false, move |x, s| {
        let val: f64 = terms.iter().map(|&(xi, om, ph, c)| c * (xi * x + om * s + ph).cos()).sum();
        C64::new(amp * val / norm, 0.0)
    });
    v.is_real = true;
    v.bound = amp;
    v
}

#[test]
fn free_plane_wave_is_eigenfunction() {
    let grid = Grid::new(16.0, 256).unwrap();
    let xi0 = 3.0 / 16.0;
    let f = WaveFunction::from_fn(&grid, 2.0, |x| C64::from_polar(1.0, xi0 * x));
    let t = 7.3;
    let u = free_propagate(&f, t);
    let want = C64::from_polar(1.0, -2.0 * xi0 * xi0 * t);
    for (a, b) in u.values.iter().zip(&f.values) {
        assert!((a - want * b).norm() < 1e-12);
    }
    assert_eq!(free_propagate(&f, 0.0).values, f.values);
}

#[test]
fn free_group_property() {
    let grid = Grid::new(16.0, 512).unwrap();
    let f = random_smooth(&grid, 1.5, 3, 40);
    let a = free_propagate(&free_propagate(&f, 1.7), 2.9);
    let b = free_propagate(&f, 4.6);
    assert!(a.distance(&b) < 1e-12);
    assert!((b.l2_norm() - 1.0).abs() < 1e-12);
}

#[test]
fn free_gaussian_matches_closed_form() {
    let grid = Grid::new(32.0, 2048).unwrap();
    let (k, sigma, t) = (1.5, 2.0, 3.0);
    let f = WaveFunction::from_fn(&grid, k, |x| C64::new((-x * x / (2.0 * sigma * sigma)).exp(), 0.0));
    let u = free_propagate(&f, t);
    let s2 = C64::new(sigma * sigma, 2.0 * k * t);
    let exact = WaveFunction::from_fn(&grid, k, |x| (C64::new(sigma * sigma, 0.0) / s2).sqrt() * (-x * x / (2.0 * s2)).exp());
    assert!(u.distance(&exact) < 1e-8 * f.l2_norm(), "{}", u.distance(&exact));
}

#[test]
fn zero_potential_matches_free() {
    let grid = Grid::new(16.0, 256).unwrap();
    let f = random_smooth(&grid, 2.0, 5, 30);
    let u = evolve(&f, &zero(&grid), 0.0, 12.5, &PropagatorConfig::new(0.1)).unwrap();
    assert!(u.distance(&free_propagate(&f, 12.5)) < 1e-12);
    assert_eq!(u.time_tag, 12.5);
}

#[test]
fn strang_is_unitary_and_second_order() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 7, 12);
    let v = smooth_potential(&grid, 9, 0.5);
    let u = evolve(&f, &v, 0.0, 200.0, &PropagatorConfig::new(0.02)).unwrap();
    assert!((u.l2_norm() - 1.0).abs() < 1e-10, "{}", u.l2_norm() - 1.0);
    let reference = evolve(&f, &v, 0.0, 2.0, &PropagatorConfig::new(0.0025)).unwrap();
    let e1 = evolve(&f, &v, 0.0, 2.0, &PropagatorConfig::new(0.04)).unwrap().distance(&reference);
    let e2 = evolve(&f, &v, 0.0, 2.0, &PropagatorConfig::new(0.02)).unwrap().distance(&reference);
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn evolution_group_property() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 11, 12);
    let v = smooth_potential(&grid, 12, 0.3);
    let cfg = PropagatorConfig::new(0.05);
    let whole = evolve(&f, &v, 0.0, 10.0, &cfg).unwrap();
    let half = evolve(&f, &v, 0.0, 4.0, &cfg).unwrap();
    let parts = evolve(&half, &v, 4.0, 10.0, &cfg).unwrap();
    assert!(whole.distance(&parts) < 1e-9);
}

#[test]
fn trap_energy_is_conserved() {
    let grid = Grid::new(16.0, 512).unwrap();
    let v = trap(&grid, 0.8, 30.0, Arc::new(trap_well)).unwrap();
    let f = gaussian(&grid, 1.0, 2.0, 0.3);
    let e0 = energy(&f, &v, 0.0);
    let u = evolve(&f, &v, 0.0, 50.0, &PropagatorConfig::new(0.002)).unwrap();
    let e1 = energy(&u, &v, 50.0);
    assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
}

#[test]
fn guards_reject_bad_steps_and_complex_potentials() {
    let grid = Grid::new(16.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 1, 5);
    let v = smooth_potential(&grid, 2, 1.0);
    let err = evolve(&f, &v, 0.0, 1.0, &PropagatorConfig::new(0.5)).unwrap_err();
    assert!(matches!(err, EvolutionError::StepTooLarge { .. }) && err.is_numerical());
    let mut c = from_fn(&grid, 0.0, true, |_, _| C64::new(0.0, 0.01));
    c.is_real = true;
    c.bound = 0.01;
    assert!(matches!(evolve(&f, &c, 0.0, 1.0, &PropagatorConfig::new(0.1)), Err(EvolutionError::ComplexPotential { .. })));
    assert!(matches!(evolve(&f, &v, 2.0, 1.0, &PropagatorConfig::new(0.05)), Err(EvolutionError::BadInterval { .. })));
}

#[test]
fn duhamel_with_zero_potential_is_free() {
    let grid = Grid::new(16.0, 256).unwrap();
    let f = random_smooth(&grid, 2.0, 4, 20);
    let d = duhamel_first_order(&f, &zero(&grid), 5.0, &PropagatorConfig::new(0.1)).unwrap();
    assert!(d.distance(&free_propagate(&f, 5.0)) < 1e-13);
}

#[test]
fn duhamel_error_scales_quadratically() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 21, 4);
    let v = smooth_potential(&grid, 22, 0.02);
    let cfg = PropagatorConfig::new(0.002);
    let err = |v: &SpaceTimePotential, t: f64| {
        let u = evolve(&f, v, 0.0, t, &cfg).unwrap();
        u.distance(&duhamel_first_order(&f, v, t, &cfg).unwrap())
    };
    let r_t = err(&v, 1.0) / err(&v, 0.5);
    let r_v = err(&v.scaled(2.0), 0.5) / err(&v, 0.5);
    assert!((r_t - 4.0).abs() < 0.8, "time ratio {r_t}");
    assert!((r_v - 4.0).abs() < 0.8, "amplitude ratio {r_v}");
}

#[test]
fn one_collision_of_resonant_cosine() {
    // V = A cos 2x couples e^{ix} to the degenerate mode e^{-ix}: that
    // amplitude grows like A t/2, the e^{3ix} one stays bounded.
    let grid = Grid::new(16.0, 256).unwrap();
    let amp = 0.01;
    let v = cosine_with_amplitude(&grid, amp, false).unwrap();
    let f = WaveFunction::from_fn(&grid, 1.0, |x| C64::from_polar(1.0, x)).normalized();
    let t1 = 400.0;
    let q = collision(&f, &v, 0.0, t1, &PropagatorConfig::new(0.01)).unwrap();
    let want = amp * t1 / 2.0;
    assert!((q.l2_norm() / want - 1.0).abs() < 0.02, "{} vs {want}", q.l2_norm());
    assert_eq!(one_collision(&f, &zero(&grid), &PropagatorConfig::new(0.1)).unwrap().l2_norm(), 0.0);
}

#[test]
fn one_collision_matches_full_evolution_to_second_order() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 31, 6);
    for seed in 0..3 {
        let v = smooth_potential(&grid, 40 + seed, 0.002);
        let cfg = PropagatorConfig::new(0.05);
        let h = grid.length();
        let u = evolve(&f, &v, 0.0, h, &cfg).unwrap();
        let mut r = free_propagate(&f, h);
        r.axpy(C64::new(0.0, -1.0), &one_collision(&f, &v, &cfg).unwrap());
        let c = u.distance(&r) / (0.002 * h).powi(2);
        assert!(c <= 2.0, "seed {seed}: C = {c}");
    }
}

#[test]
fn under_resolved_quadrature_is_detected() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 3, 10);
    let v = smooth_potential(&grid, 4, 0.5);
    let cfg = PropagatorConfig { quadrature_nodes: Some(4), ..PropagatorConfig::new(0.1) };
    assert!(matches!(collision(&f, &v, 0.0, 20.0, &cfg), Err(EvolutionError::UnderResolved { .. })));
}

#[test]
fn approximation_product_basics() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 5, 6);
    let cfg = PropagatorConfig::new(0.05);
    let free = approximation_product(&f, &zero(&grid), 4, 20.0, &cfg).unwrap();
    assert!(free.final_deviation() < 1e-12);
    let v = smooth_potential(&grid, 6, 0.01);
    let one = approximation_product(&f, &v, 1, 5.0, &cfg).unwrap();
    let err = evolve(&f, &v, 0.0, 5.0, &cfg).unwrap().distance(&duhamel_first_order(&f, &v, 5.0, &cfg).unwrap());
    assert!((one.final_deviation() - err).abs() < 1e-10 + 1e-3 * err, "{} vs {err}", one.final_deviation());
}

#[test]
fn product_deviation_halves_with_window_count() {
    let grid = Grid::new(16.0, 256).unwrap();
    let amp = 0.01;
    let v = cosine_with_amplitude(&grid, amp, false).unwrap();
    let f = WaveFunction::from_fn(&grid, 1.0, |x| C64::from_polar(1.0, x)).normalized();
    let cfg = PropagatorConfig::new(0.02);
    let d32 = approximation_product(&f, &v, 32, 200.0, &cfg).unwrap().final_deviation();
    let d64 = approximation_product(&f, &v, 64, 200.0, &cfg).unwrap().final_deviation();
    let r = d64 / d32;
    assert!((r - 0.5).abs() < 0.15, "ratio {r}");
}

#[test]
fn gauge_identity() {
    let grid = Grid::new(16.0, 512).unwrap();
    let f = gaussian(&grid, 1.0, 2.0, 0.0);
    let cfg = PropagatorConfig::new(0.002);
    assert_eq!(gauge_modulate(&f, 0.0, 3.0).unwrap().values, f.values);
    let r0 = verify_modulation_identity(&f, &zero(&grid), 1.0, 1.0, &cfg).unwrap();
    assert!(r0 < 1e-6, "{r0}");
    let v = cosine_with_amplitude(&grid, 0.05, false).unwrap();
    let r1 = verify_modulation_identity(&f, &v, 1.0, 1.0, &cfg).unwrap();
    assert!(r1 < 1e-6, "{r1}");
    // The shifted static cosine is the moving one.
    let s = v.shifted(1.0);
    let m = cosine_with_amplitude(&grid, 0.05, true).unwrap();
    for &(x, t) in &[(0.3, 0.7), (-5.0, 2.0), (11.0, 9.5)] {
        assert!((s.value(x, t) - m.value(x, t)).norm() < 1e-12);
    }
    assert!(matches!(gauge_modulate(&f, 0.01, 1.0), Err(EvolutionError::OffLattice(_))));
}

#[test]
fn series_records_norm_and_energy() {
    let grid = Grid::new(8.0, 256).unwrap();
    let f = random_smooth(&grid, 1.0, 8, 6);
    let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let (_, s) = evolve_series(&f, &zero(&grid), &times, &PropagatorConfig::new(0.1)).unwrap();
    assert_eq!(s.len(), 5);
    for p in s {
        assert!(p.deviation < 1e-12);
        assert!((p.norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn collision_energy_basics() {
    let grid = Grid::new(16.0, 256).unwrap();
    let f = gaussian(&grid, 2.0, 8.0, 0.0);
    let cfg = PropagatorConfig::new(0.1);
    let ks = [2.0, 3.0, 4.0];
    let none = collision_energy(&f, &zero(&grid), &ks, 0.5, 4.0, &cfg).unwrap();
    assert_eq!(none.integral, 0.0);
    assert!(none.discarded.iter().all(|d| *d < 1e-3), "{:?}", none.discarded);
    let v = cosine_with_amplitude(&grid, 0.01, false).unwrap();
    let r = collision_energy(&f, &v, &ks, 0.5, 4.0, &cfg).unwrap();
    assert!(r.integral > 0.0 && r.norms_sqr.iter().all(|q| *q > 0.0));
    // three equal-width eta panels: trapezoid by hand
    let e: Vec<f64> = ks.iter().map(|k| 1.0 / k).collect();
    let want = 0.5 * (e[0] - e[1]) * (r.norms_sqr[0] + r.norms_sqr[1]) + 0.5 * (e[1] - e[2]) * (r.norms_sqr[1] + r.norms_sqr[2]);
    assert!((r.integral - want).abs() <= 1e-14 * want);
    assert!(matches!(collision_energy(&f, &v, &[1.0], 0.5, 4.0, &cfg), Err(EvolutionError::Parameter { .. })));
}
