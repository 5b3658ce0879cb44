//! Resonance experiments: the two-mode cosine resonance, the trapped bound
//! state and the dispersion scan.

use rayon::prelude::*;

use super::{two_level_coupling, two_level_power, ResonanceError};
use crate::evolution::{energy, free_propagate, Evolver, PropagatorConfig};
use crate::field::{Grid, WaveFunction, C64};
use crate::output::{Cell, Table};
use crate::potential::{cosine, SpaceTimePotential};
use crate::smooth::lattice_bump;

/// `<L^{-1/2} e^{i xi x}, u>`.
pub fn mode_amplitude(u: &WaveFunction, xi: f64) -> C64 {
    let g = &u.grid;
    let s: C64 = u.values.iter().enumerate().map(|(j, v)| C64::from_polar(1.0, -xi * g.x(j)) * v).sum();
    s * g.dx() / g.length().sqrt()
}

/// Output of [`resonance_demo`].
#[derive(Clone, Debug, PartialEq)]
pub struct DemoReport {
    pub amplitude: f64,
    pub times: Vec<f64>,
    /// Two-level `|b_j|^2` at each time.
    pub model_curve: Vec<f64>,
    /// `|<e_{-1}, u(t)>|^2` from the full evolution.
    pub pde_curve: Vec<f64>,
    /// `max_t ||u(t) - model(t)||`.
    pub max_gap: f64,
    /// `max_t | |b(t)|^2 - sin^2(A t / 2) |`.
    pub transfer_error: f64,
    /// Largest mass found in modes `+-3`.
    pub leak_max: f64,
    /// `leak_max / A^2`.
    pub leak_ratio: f64,
}

/// Full evolution of `f = L^{-1/2} e^{ix}` under `A cos(2x)`, `A = L^{-gamma}`,
/// against the two-level product with windows of length `d`, sampled at
/// `points + 1` times up to `t_max = pi / A` (full transfer).
pub fn resonance_demo(
    grid: &Grid,
    gamma: f64,
    k: f64,
    cfg: &PropagatorConfig,
    points: usize,
    windows_per_point: u64,
) -> Result<DemoReport, ResonanceError> {
    if grid.nyquist() <= 3.5 {
        return Err(ResonanceError::UnderResolved { nyquist: grid.nyquist() });
    }
    if !(k > 0.0) || points == 0 || windows_per_point == 0 {
        return Err(ResonanceError::Parameter { name: "k", value: k, why: "need k > 0 and a positive sample count" });
    }
    let v = cosine(grid, gamma, false).map_err(crate::evolution::EvolutionError::from)?;
    let amp = grid.length().powf(-gamma);
    let l = grid.length();
    let plane = |xi: f64| WaveFunction::from_fn(grid, k, |x| C64::from_polar(l.powf(-0.5), xi * x));
    let (ep, em) = (plane(1.0), plane(-1.0));
    let t_max = std::f64::consts::PI / amp;
    let d = t_max / (points as f64 * windows_per_point as f64);
    let lambda = two_level_coupling(d, amp);

    let mut ev = Evolver::new(&ep, &v, cfg)?;
    let mut rep = DemoReport {
        amplitude: amp,
        times: Vec::new(),
        model_curve: Vec::new(),
        pde_curve: Vec::new(),
        max_gap: 0.0,
        transfer_error: 0.0,
        leak_max: 0.0,
        leak_ratio: 0.0,
    };
    for i in 0..=points {
        let t = t_max * i as f64 / points as f64;
        ev.advance_to(t)?;
        let u = ev.state();
        let j = i as u64 * windows_per_point;
        let (a, b) = two_level_power(C64::new(1.0, 0.0), C64::new(0.0, 0.0), lambda, j);
        let phase = C64::from_polar(1.0, -k * t);
        let mut model = ep.clone();
        model.scale(phase * a);
        model.axpy(phase * b, &em);
        let bp = mode_amplitude(u, -1.0).norm_sqr();
        let leak = mode_amplitude(u, 3.0).norm_sqr() + mode_amplitude(u, -3.0).norm_sqr();
        rep.times.push(t);
        rep.model_curve.push(b.norm_sqr());
        rep.pde_curve.push(bp);
        rep.max_gap = rep.max_gap.max(u.distance(&model));
        rep.transfer_error = rep.transfer_error.max((bp - (0.5 * amp * t).sin().powi(2)).abs());
        rep.leak_max = rep.leak_max.max(leak);
    }
    rep.leak_ratio = rep.leak_max / (amp * amp);
    Ok(rep)
}

impl DemoReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "amplitude": self.amplitude,
            "times": self.times,
            "model_curve": self.model_curve,
            "pde_curve": self.pde_curve,
            "max_gap": self.max_gap,
            "transfer_error": self.transfer_error,
            "leak_max": self.leak_max,
            "leak_ratio": self.leak_ratio,
        })
    }
}

/// Parameters of [`trap_demo`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrapParams {
    pub t: f64,
    pub gamma: f64,
    pub coupling: f64,
    pub k: f64,
    /// Real-time step.
    pub dt: f64,
    /// Imaginary-time step.
    pub tau: f64,
    pub max_iterations: usize,
}

impl TrapParams {
    pub fn new(t: f64, gamma: f64, coupling: f64) -> TrapParams {
        TrapParams { t, gamma, coupling, k: 1.0, dt: 0.05, tau: 0.5, max_iterations: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrapReport {
    pub energy: f64,
    pub iterations: usize,
    pub initial_moment: f64,
    pub trapped_moment: f64,
    pub free_moment: f64,
    pub trapped_ratio: f64,
    pub free_ratio: f64,
    /// Largest `| ||u|| - 1 |` seen in either run.
    pub norm_drift: f64,
}

/// Centred second moment `int (x - xbar)^2 |u|^2 / ||u||^2`.
pub fn second_moment(u: &WaveFunction) -> f64 {
    let g = &u.grid;
    let (mut m0, mut m1) = (0.0, 0.0);
    for (j, v) in u.values.iter().enumerate() {
        let w = v.norm_sqr();
        m0 += w;
        m1 += w * g.x(j);
    }
    let xbar = m1 / m0;
    u.values.iter().enumerate().map(|(j, v)| (g.x(j) - xbar).powi(2) * v.norm_sqr()).sum::<f64>() / m0
}

/// Ground state of `-k Delta + V` by normalised imaginary-time splitting,
/// stopped when the energy changes by less than `1e-10` in one step.
pub fn ground_state(v: &SpaceTimePotential, k: f64, tau: f64, max_iterations: usize) -> (WaveFunction, f64, usize) {
    let grid = &v.grid;
    let width = grid.length() / 32.0;
    let mut u = WaveFunction::from_fn(grid, k, |x| C64::new((-(x / width).powi(2)).exp(), 0.0)).normalized();
    let half: Vec<f64> = v.sample(0.0).iter().map(|z| (-0.5 * tau * z.re).exp()).collect();
    let mut e_old = energy(&u, v, 0.0);
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        for (z, h) in u.values.iter_mut().zip(&half) {
            *z *= h;
        }
        grid.apply_multiplier(&mut u.values, |xi| C64::new((-k * xi * xi * tau).exp(), 0.0));
        for (z, h) in u.values.iter_mut().zip(&half) {
            *z *= h;
        }
        u = u.normalized();
        let e = energy(&u, v, 0.0);
        let change = (e - e_old).abs();
        e_old = e;
        if change < 1e-10 {
            break;
        }
    }
    (u, e_old, iterations)
}

/// Ground state of the trap, then real-time evolution with and without the
/// trap up to `t = T`.
pub fn trap_demo(par: &TrapParams) -> Result<TrapReport, ResonanceError> {
    let grid = Grid::new(par.t, Grid::default_size(par.t))?;
    let v = crate::potential::trap(&grid, par.gamma, par.coupling, std::sync::Arc::new(crate::potential::trap_well))
        .map_err(crate::evolution::EvolutionError::from)?;
    let (phi, e, iterations) = ground_state(&v, par.k, par.tau, par.max_iterations);
    if !(e < -1e-9) {
        return Err(ResonanceError::NoBoundState { energy: e });
    }
    let cfg = PropagatorConfig::new(par.dt);
    let mut ev = Evolver::new(&phi, &v, &cfg)?;
    let mut drift: f64 = 0.0;
    let checkpoints = 16;
    for i in 1..=checkpoints {
        ev.advance_to(par.t * i as f64 / checkpoints as f64)?;
        drift = drift.max((ev.state().l2_norm() - 1.0).abs());
    }
    let trapped = ev.into_state();
    let free = free_propagate(&phi, par.t);
    drift = drift.max((free.l2_norm() - 1.0).abs());
    let m0 = second_moment(&phi);
    let (mt, mf) = (second_moment(&trapped), second_moment(&free));
    Ok(TrapReport {
        energy: e,
        iterations,
        initial_moment: m0,
        trapped_moment: mt,
        free_moment: mf,
        trapped_ratio: mt / m0,
        free_ratio: mf / m0,
        norm_drift: drift,
    })
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn uniform_k_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `L^{-1/2} mu(x / L)` normalised, `mu` a smooth bump on `(-1/2, 1/2)`.
pub fn low_frequency_state(grid: &Grid, k: f64) -> WaveFunction {
    let mu = lattice_bump();
    let l = grid.length();
    WaveFunction::from_fn(grid, k, |x| C64::new(mu.eval(2.0 * x / l), 0.0)).normalized()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub ks: Vec<f64>,
    pub deviations: Vec<f64>,
    pub median: f64,
    pub threshold: f64,
    /// `k` with `D(k) > threshold`.
    pub resonant: Vec<f64>,
    pub resonant_fraction: f64,
}

impl ScanReport {
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for (&k, &d) in self.ks.iter().zip(&self.deviations) {
            if d > best.1 {
                best = (k, d);
            }
        }
        best
    }
}

/// `D(k) = ||u(horizon, k) - S(horizon) f||` for each `k`.
pub fn scan_k(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    ks: &[f64],
    horizon: f64,
    cfg: &PropagatorConfig,
    threshold: f64,
) -> Result<ScanReport, ResonanceError> {
    let deviations: Vec<f64> = ks
        .par_iter()
        .map(|&k| -> Result<f64, ResonanceError> {
            let mut fk = f.clone().with_time(0.0);
            fk.k = k;
            let free = free_propagate(&fk, horizon);
            let mut ev = Evolver::new(&fk, v, cfg)?;
            ev.advance_to(horizon)?;
            Ok(ev.state().distance(&free))
        })
        .collect::<Result<_, _>>()?;
    let mut sorted = deviations.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() {
        0.0
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let resonant: Vec<f64> = ks.iter().zip(&deviations).filter(|(_, d)| **d > threshold).map(|(k, _)| *k).collect();
    let resonant_fraction = if ks.is_empty() { 0.0 } else { resonant.len() as f64 / ks.len() as f64 };
    Ok(ScanReport { ks: ks.to_vec(), deviations, median, threshold, resonant, resonant_fraction })
}

/// Rows `k, deviation`.
pub fn scan_table(r: &ScanReport) -> Table {
    let mut t = Table::new(&["k", "deviation"]);
    for (&k, &d) in r.ks.iter().zip(&r.deviations) {
        t.push(vec![Cell::Float(k), Cell::Float(d)]);
    }
    t
}
