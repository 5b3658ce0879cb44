//! Propagators for `i u_t = -k u_xx + V u`.
//!
//! The free flow `S(t) = e^{ik Delta t}` is the exact Fourier multiplier
//! `e^{-ik xi^2 t}`, so every comparison against free dynamics is free of
//! discretisation error. Full evolution uses a Strang splitting with `V`
//! frozen at the step midpoint; the one-collision integral
//! `int S(t1 - s) V(s) S(s - t0) f ds` is accumulated forward in time with
//! the trapezoid rule.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::field::{Grid, WaveFunction, C64};
use crate::potential::{PotentialError, SpaceTimePotential};

pub mod envelope;

pub use envelope::{
    collision_matrix_element, packet_envelope, restriction_constant, tube_localization, CollisionElement,
    EnvelopeReport, PacketEnvelope, RestrictionReport,
};

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("potential flagged real has imaginary part {im} at t = {t}")]
    ComplexPotential { t: f64, im: f64 },
    #[error("time interval [{t0}, {t1}] is reversed or not finite")]
    BadInterval { t0: f64, t1: f64 },
    #[error("quadrature under-resolved: node doubling changed the result by {change:e} (tolerance {tol:e})")]
    UnderResolved { change: f64, tol: f64 },
    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("modulation frequency beta/2k = {0} is not on the mode lattice")]
    OffLattice(f64),
    #[error("{name} = {value}: {why}")]
    Parameter { name: &'static str, value: f64, why: &'static str },
    #[error("tube ({n}, {ell}) does not meet cube ({p}, {q})")]
    NotIncident { n: i64, ell: i64, p: i64, q: i64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

impl EvolutionError {
    /// True for failures of a numerical guard rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EvolutionError::StepTooLarge { .. } | EvolutionError::UnderResolved { .. } | EvolutionError::NonFinite(_)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Strang split step, unitary for real `V`.
    Strang,
    /// First-order Duhamel: `S(t) f - i Q f`.
    DuhamelAccumulate,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Strang => "strang",
            Scheme::DuhamelAccumulate => "duhamel_accumulate",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "strang" => Some(Scheme::Strang),
            "duhamel_accumulate" => Some(Scheme::DuhamelAccumulate),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Trapezoid intervals for collision integrals; `None` means one per `dt`.
    pub quadrature_nodes: Option<usize>,
    /// Relative change allowed under node doubling.
    pub node_tolerance: f64,
    /// Skip the node-doubling check (callers that already control the error).
    pub check_nodes: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig::new(0.1)
    }
}

impl PropagatorConfig {
    pub fn new(dt: f64) -> Self {
        PropagatorConfig { dt, scheme: Scheme::Strang, quadrature_nodes: None, node_tolerance: 1e-6, check_nodes: true }
    }

    /// `min(kappa/8, 0.1 / sup|V|)`.
    pub fn step_limit(grid: &Grid, v: &SpaceTimePotential) -> f64 {
        let sup = if v.is_zero() { 0.0 } else { v.sup_estimate() };
        let mut limit = grid.kappa() / 8.0;
        if sup > 0.0 {
            limit = limit.min(0.1 / sup);
        }
        limit
    }

    pub fn check(&self, v: &SpaceTimePotential) -> Result<(), EvolutionError> {
        let limit = Self::step_limit(&v.grid, v);
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(EvolutionError::StepTooLarge { dt: self.dt, limit });
        }
        Ok(())
    }

    fn nodes_for(&self, span: f64) -> usize {
        self.quadrature_nodes.unwrap_or_else(|| (span / self.dt - 1e-9).ceil().max(1.0) as usize)
    }
}

/// Multiplier `e^{-ik xi_m^2 t}` in FFT slot order.
pub fn free_phases(grid: &Grid, k: f64, t: f64) -> Vec<C64> {
    (0..grid.m())
        .map(|i| {
            let xi = grid.xi(i);
            C64::from_polar(1.0, -k * xi * xi * t)
        })
        .collect()
}

fn apply_phases(grid: &Grid, values: &mut [C64], phases: &[C64]) {
    grid.fft(values);
    for (v, p) in values.iter_mut().zip(phases) {
        *v *= p;
    }
    grid.ifft(values);
}

/// `S(t) f`; advances the time tag by `t`.
pub fn free_propagate(f: &WaveFunction, t: f64) -> WaveFunction {
    let mut out = f.clone();
    if t != 0.0 {
        apply_phases(&f.grid, &mut out.values, &free_phases(&f.grid, f.k, t));
    }
    out.time_tag = f.time_tag + t;
    out
}

fn check_interval(t0: f64, t1: f64) -> Result<(), EvolutionError> {
    if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
        return Err(EvolutionError::BadInterval { t0, t1 });
    }
    Ok(())
}

fn check_finite(values: &[C64], t: f64) -> Result<(), EvolutionError> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(EvolutionError::NonFinite(t))
    }
}

/// `V` restricted to its active window intersected with `[t0, t1]`.
fn active_span(v: &SpaceTimePotential, t0: f64, t1: f64) -> Option<(f64, f64)> {
    if v.is_zero() {
        return None;
    }
    let (a, b) = v.active_window().unwrap_or((t0, t1));
    let (a, b) = (a.max(t0), b.min(t1));
    (a < b).then_some((a, b))
}

/// Step-by-step Strang propagator holding the current state.
pub struct Evolver<'a> {
    v: &'a SpaceTimePotential,
    dt: f64,
    state: WaveFunction,
    vbuf: Vec<C64>,
    phases: Option<(f64, Vec<C64>)>,
    static_half: Option<(f64, Vec<C64>)>,
    steps: usize,
}

impl<'a> Evolver<'a> {
    pub fn new(f: &WaveFunction, v: &'a SpaceTimePotential, cfg: &PropagatorConfig) -> Result<Self, EvolutionError> {
        cfg.check(v)?;
        Ok(Evolver {
            v,
            dt: cfg.dt,
            state: f.clone(),
            vbuf: vec![C64::new(0.0, 0.0); f.grid.m()],
            phases: None,
            static_half: None,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.state.time_tag
    }

    pub fn state(&self) -> &WaveFunction {
        &self.state
    }

    pub fn into_state(self) -> WaveFunction {
        self.state
    }

    /// Strang steps taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn free_jump(&mut self, t: f64) {
        if t > 0.0 {
            let grid = self.state.grid.clone();
            apply_phases(&grid, &mut self.state.values, &free_phases(&grid, self.state.k, t));
        }
        self.state.time_tag += t;
    }

    fn half_multiplier(&mut self, tm: f64, h: f64) -> Result<(), EvolutionError> {
        self.v.fill(tm, &mut self.vbuf);
        if self.v.is_real {
            if let Some(bad) = self.vbuf.iter().find(|z| z.im.abs() > 1e-12 * z.re.abs().max(1.0)) {
                return Err(EvolutionError::ComplexPotential { t: tm, im: bad.im });
            }
        }
        for z in self.vbuf.iter_mut() {
            // e^{-i V h/2}
            *z = (C64::new(0.0, -0.5 * h) * *z).exp();
        }
        Ok(())
    }

    fn strang(&mut self, span: f64) -> Result<(), EvolutionError> {
        let n = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let grid = self.state.grid.clone();
        if self.phases.as_ref().map_or(true, |(d, _)| *d != h) {
            self.phases = Some((h, free_phases(&grid, self.state.k, h)));
        }
        let fixed = self.v.is_time_independent();
        if fixed && self.static_half.as_ref().map_or(true, |(d, _)| *d != h) {
            self.half_multiplier(0.0, h)?;
            self.static_half = Some((h, self.vbuf.clone()));
        }
        let t0 = self.state.time_tag;
        for i in 0..n {
            let tm = t0 + (i as f64 + 0.5) * h;
            if !fixed {
                self.half_multiplier(tm, h)?;
            }
            let half = if fixed { &self.static_half.as_ref().unwrap().1 } else { &self.vbuf };
            for (u, m) in self.state.values.iter_mut().zip(half) {
                *u *= m;
            }
            let ph = &self.phases.as_ref().unwrap().1;
            apply_phases(&grid, &mut self.state.values, ph);
            let half = if fixed { &self.static_half.as_ref().unwrap().1 } else { &self.vbuf };
            for (u, m) in self.state.values.iter_mut().zip(half) {
                *u *= m;
            }
        }
        self.steps += n;
        self.state.time_tag = t0 + span;
        check_finite(&self.state.values, self.state.time_tag)
    }

    /// Advance to `t1`, jumping freely wherever `V` vanishes.
    pub fn advance_to(&mut self, t1: f64) -> Result<(), EvolutionError> {
        let t0 = self.state.time_tag;
        check_interval(t0, t1)?;
        if t1 == t0 {
            return Ok(());
        }
        match active_span(self.v, t0, t1) {
            None => self.free_jump(t1 - t0),
            Some((a, b)) => {
                self.free_jump(a - t0);
                self.strang(b - a)?;
                self.free_jump(t1 - b);
            }
        }
        self.state.time_tag = t1;
        Ok(())
    }
}

/// `U(t0, t1) f` with `f` given at `t0`.
pub fn evolve(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    t0: f64,
    t1: f64,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, EvolutionError> {
    check_interval(t0, t1)?;
    let start = f.clone().with_time(t0);
    match cfg.scheme {
        Scheme::Strang => {
            let mut ev = Evolver::new(&start, v, cfg)?;
            ev.advance_to(t1)?;
            Ok(ev.into_state())
        }
        Scheme::DuhamelAccumulate => {
            cfg.check(v)?;
            let q = collision(&start, v, t0, t1, cfg)?;
            let mut out = free_propagate(&start, t1 - t0);
            out.axpy(C64::new(0.0, -1.0), &q);
            Ok(out)
        }
    }
}

/// `k ||u_x||^2 + int Re V |u|^2` at time `t`.
pub fn energy(u: &WaveFunction, v: &SpaceTimePotential, t: f64) -> f64 {
    let spec = u.to_spectrum();
    let kinetic: f64 = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let xi = u.grid.xi(i);
            xi * xi * c.norm_sqr()
        })
        .sum::<f64>()
        * spec.mode_measure();
    let pot = if v.is_zero() {
        0.0
    } else {
        v.sample(t).iter().zip(&u.values).map(|(p, z)| p.re * z.norm_sqr()).sum::<f64>() * u.grid.dx()
    };
    u.k * kinetic + pot
}

/// Trapezoid approximation with `nodes` intervals of
/// `int_{t0}^{t1} S(t1 - s) V(s) S(s - t0) f ds`; intervals where `V`
/// vanishes are skipped.
pub fn collision_integral(f: &WaveFunction, v: &SpaceTimePotential, t0: f64, t1: f64, nodes: usize) -> WaveFunction {
    let grid = &f.grid;
    let mut out = WaveFunction::zeros(grid, f.k).with_time(t1);
    let Some((a, b)) = active_span(v, t0, t1) else { return out };
    let n = ((nodes as f64) * (b - a) / (t1 - t0)).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let ph = free_phases(grid, f.k, h);
    let mut g = free_propagate(f, a - t0).values;
    let mut acc = vec![C64::new(0.0, 0.0); grid.m()];
    let mut vb = vec![C64::new(0.0, 0.0); grid.m()];
    let mut add = |acc: &mut [C64], g: &[C64], s: f64, w: f64| {
        v.fill(s, &mut vb);
        for ((a, gv), p) in acc.iter_mut().zip(g).zip(&vb) {
            *a += p * gv * w;
        }
    };
    add(&mut acc, &g, a, 0.5 * h);
    for i in 1..=n {
        apply_phases(grid, &mut g, &ph);
        apply_phases(grid, &mut acc, &ph);
        let w = if i == n { 0.5 * h } else { h };
        add(&mut acc, &g, a + i as f64 * h, w);
    }
    out.values = acc;
    free_propagate(&out, t1 - b).with_time(t1)
}

/// Collision integral with the node-doubling check of `cfg`.
pub fn collision(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    t0: f64,
    t1: f64,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, EvolutionError> {
    check_interval(t0, t1)?;
    if t1 == t0 {
        return Ok(WaveFunction::zeros(&f.grid, f.k).with_time(t1));
    }
    let n = cfg.nodes_for(t1 - t0);
    let fine = collision_integral(f, v, t0, t1, 2 * n);
    if cfg.check_nodes {
        let coarse = collision_integral(f, v, t0, t1, n);
        let scale = f.l2_norm().max(f64::MIN_POSITIVE);
        let change = fine.distance(&coarse) / scale;
        if !change.is_finite() || change > cfg.node_tolerance {
            return Err(EvolutionError::UnderResolved { change, tol: cfg.node_tolerance });
        }
    }
    check_finite(&fine.values, t1)?;
    Ok(fine)
}

/// `Q f` over the grid horizon `[0, 2 pi T]`.
pub fn one_collision(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, EvolutionError> {
    collision(f, v, 0.0, f.grid.length(), cfg)
}

/// `||Q f_o||^2` on a grid of dispersion values and its integral over `eta = 1/k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEnergy {
    pub ks: Vec<f64>,
    pub norms_sqr: Vec<f64>,
    /// Mass removed by the packet truncation, per `k`.
    pub discarded: Vec<f64>,
    /// Trapezoid rule in `eta` over the sampled range.
    pub integral: f64,
}

/// Collision energy of the truncated state `f_o`: packets with `|n| <= 2 kappa`
/// and `|l| <= c delta kappa`. Every `k` must lie in `[2, 4]`.
pub fn collision_energy(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    ks: &[f64],
    delta: f64,
    c: f64,
    cfg: &PropagatorConfig,
) -> Result<CollisionEnergy, EvolutionError> {
    if let Some(&k) = ks.iter().find(|k| !(2.0..=4.0).contains(*k)) {
        return Err(EvolutionError::Parameter { name: "k", value: k, why: "outside the dyadic block [2, 4]" });
    }
    if !(delta > 0.0 && c > 0.0) {
        return Err(EvolutionError::Parameter { name: "delta", value: delta, why: "need delta > 0 and c > 0" });
    }
    let rows: Vec<(f64, f64)> = ks
        .par_iter()
        .map(|&k| -> Result<(f64, f64), EvolutionError> {
            let mut fk = f.clone().with_time(0.0);
            fk.k = k;
            let coeffs = crate::packets::analyze(&fk, k).expect("k checked above");
            let (kept, dropped) = coeffs.truncate(delta, c);
            let fo = crate::packets::synthesize(&kept);
            let q = one_collision(&fo, v, cfg)?;
            Ok((q.norm_sqr(), dropped))
        })
        .collect::<Result<_, _>>()?;
    let (norms_sqr, discarded): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let mut pts: Vec<(f64, f64)> = ks.iter().zip(&norms_sqr).map(|(k, q)| (1.0 / k, *q)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let integral = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(CollisionEnergy { ks: ks.to_vec(), norms_sqr, discarded, integral })
}

/// `S(t) f - i int_0^t S(t - s) V(s) S(s) f ds`.
pub fn duhamel_first_order(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, EvolutionError> {
    let start = f.clone().with_time(0.0);
    let q = collision(&start, v, 0.0, t, cfg)?;
    let mut out = free_propagate(&start, t);
    out.axpy(C64::new(0.0, -1.0), &q);
    Ok(out)
}

/// One point of a time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub deviation: f64,
    pub norm: f64,
    pub energy: f64,
}

/// Evolve through `times` (increasing, starting at or after 0) and record
/// the distance to free evolution, the norm and the energy.
pub fn evolve_series(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    times: &[f64],
    cfg: &PropagatorConfig,
) -> Result<(WaveFunction, Vec<SeriesPoint>), EvolutionError> {
    let start = f.clone().with_time(0.0);
    let mut ev = Evolver::new(&start, v, cfg)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        ev.advance_to(t)?;
        let u = ev.state();
        let free = free_propagate(&start, t);
        out.push(SeriesPoint { t, deviation: u.distance(&free), norm: u.l2_norm(), energy: energy(u, v, t) });
    }
    Ok((ev.into_state(), out))
}

/// Result of the windowed product `prod_j (S(d) - i Q_j) f`.
#[derive(Clone, Debug)]
pub struct ApproxProduct {
    pub state: WaveFunction,
    pub windows: usize,
    pub d: f64,
    /// `N >= horizon^{2 - 2 gamma}`.
    pub precondition_met: bool,
    pub series: Vec<SeriesPoint>,
}

impl ApproxProduct {
    pub fn final_deviation(&self) -> f64 {
        self.series.last().map_or(0.0, |p| p.deviation)
    }
}

/// Windowed product over `[0, horizon]` with `windows` factors. Deviations are
/// measured against the Strang evolution.
pub fn approximation_product(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    windows: usize,
    horizon: f64,
    cfg: &PropagatorConfig,
) -> Result<ApproxProduct, EvolutionError> {
    if windows == 0 {
        return Err(EvolutionError::Parameter { name: "N", value: 0.0, why: "need at least one window" });
    }
    check_interval(0.0, horizon)?;
    let d = horizon / windows as f64;
    let start = f.clone().with_time(0.0);
    let mut exact = Evolver::new(&start, v, cfg)?;
    let nodes = cfg.nodes_for(d);
    let mut p = start.clone();
    let mut series = Vec::with_capacity(windows);
    for j in 1..=windows {
        let (ta, tb) = ((j - 1) as f64 * d, j as f64 * d);
        let q = if j == 1 {
            collision(&p, v, ta, tb, &PropagatorConfig { quadrature_nodes: Some(nodes), ..*cfg })?
        } else {
            collision_integral(&p, v, ta, tb, 2 * nodes)
        };
        p = free_propagate(&p, d);
        p.axpy(C64::new(0.0, -1.0), &q);
        p.time_tag = tb;
        check_finite(&p.values, tb)?;
        exact.advance_to(tb)?;
        series.push(SeriesPoint { t: tb, deviation: p.distance(exact.state()), norm: p.l2_norm(), energy: energy(&p, v, tb) });
    }
    let precondition_met = windows as f64 >= horizon.powf(2.0 - 2.0 * v.gamma);
    Ok(ApproxProduct { state: p, windows, d, precondition_met, series })
}

/// `psi(x) = e^{-i beta^2 t/4k - i beta x/2k} u(x + beta t)`.
pub fn gauge_modulate(u: &WaveFunction, beta: f64, t: f64) -> Result<WaveFunction, EvolutionError> {
    let grid = &u.grid;
    let freq = beta / (2.0 * u.k);
    let m = freq * grid.t();
    if (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
        return Err(EvolutionError::OffLattice(freq));
    }
    let mut out = u.clone();
    if beta == 0.0 {
        return Ok(out);
    }
    let shift = beta * t;
    grid.apply_multiplier(&mut out.values, |xi| C64::from_polar(1.0, xi * shift));
    let c = -beta * beta * t / (4.0 * u.k);
    for (j, z) in out.values.iter_mut().enumerate() {
        *z *= C64::from_polar(1.0, c - freq * grid.x(j));
    }
    Ok(out)
}

/// `|| modulate(U f) - U_shifted(modulate f) ||` at time `t`, where the
/// shifted problem has potential `V(x + beta t, t)`.
pub fn verify_modulation_identity(
    f: &WaveFunction,
    v: &SpaceTimePotential,
    beta: f64,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<f64, EvolutionError> {
    let u = evolve(f, v, 0.0, t, cfg)?;
    let lhs = gauge_modulate(&u, beta, t)?;
    let g = gauge_modulate(&f.clone().with_time(0.0), beta, 0.0)?;
    let rhs = evolve(&g, &v.shifted(beta), 0.0, t, cfg)?;
    Ok(lhs.distance(&rhs))
}

/// Horizon `2 pi T` of a grid.
pub fn horizon(grid: &Grid) -> f64 {
    2.0 * PI * grid.t()
}

#[cfg(test)]
mod tests;
