//! Packet-level dynamics: the evolved window envelope, tube localisation of
//! evolved packets, collision matrix elements and the band-projected Duhamel
//! bound.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{apply_phases, free_phases, free_propagate, EvolutionError};
use crate::field::{FrequencySet, Grid, WaveFunction, C64};
use crate::packets::{packet, Orientation, Tube, Window};
use crate::potential::SpaceTimePotential;
use crate::smooth::cell_cutter;

/// Unit-scale grid for `e^{i s Delta} h`: `y in [-64 pi, 64 pi)`, 8192 points.
const ENVELOPE_T: f64 = 64.0;
const ENVELOPE_M: usize = 8192;
/// Translated tubes reported: `lambda = 0..=LAMBDA_MAX`.
const LAMBDA_MAX: usize = 4;

/// The free evolution of the centred window in scaled variables
/// `y = x/kappa`, `s = k t/kappa^2`.
#[derive(Clone, Debug)]
pub struct PacketEnvelope {
    grid: Grid,
    h0: WaveFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub s: f64,
    /// Mass fraction outside the 3-dilated tube `|y| < 6 pi`.
    pub outside_tube: f64,
    /// Mass fraction in the tube translated by `lambda` tube widths (both
    /// sides), `lambda = 0, 1, ...`.
    pub lambda_masses: Vec<f64>,
}

impl PacketEnvelope {
    pub fn new(window: &Window) -> PacketEnvelope {
        let grid = Grid::new(ENVELOPE_T, ENVELOPE_M).expect("fixed envelope grid");
        let h0 = WaveFunction::from_fn(&grid, 1.0, |y| C64::new(window.centered(y), 0.0));
        PacketEnvelope { grid, h0 }
    }

    /// `e^{i s Delta} h` on the unit grid, centred at the origin.
    pub fn at(&self, s: f64) -> WaveFunction {
        let mut u = self.h0.clone();
        if s != 0.0 {
            apply_phases(&self.grid, &mut u.values, &free_phases(&self.grid, 1.0, s));
        }
        u.time_tag = s;
        u
    }

    pub fn report(&self, s: f64) -> EnvelopeReport {
        let u = self.at(s);
        let total = u.norm_sqr();
        let w = 2.0 * PI;
        let band = |lo: f64, hi: f64| (u.mass_in_region(lo, hi) + u.mass_in_region(-hi, -lo)) / total;
        let mut lambda_masses = vec![u.mass_in_region(-w, w) / total];
        for l in 1..=LAMBDA_MAX {
            let c = 2.0 * w * l as f64;
            lambda_masses.push(band(c - w, c + w));
        }
        EnvelopeReport { s, outside_tube: 1.0 - u.mass_in_region(-3.0 * w, 3.0 * w) / total, lambda_masses }
    }
}

/// Envelope report for a packet at scale `kappa` and dispersion `k`, after
/// time `t`.
pub fn packet_envelope(window: &Window, kappa: f64, k: f64, t: f64) -> EnvelopeReport {
    PacketEnvelope::new(window).report(k * t / (kappa * kappa))
}

/// Largest mass fraction of the freely evolved packet `omega_{n,l}` that lies
/// outside the 3-dilated forward tube, over `times`.
pub fn tube_localization(
    grid: &Grid,
    window: &Window,
    kappa: f64,
    n: i64,
    ell: i64,
    k: f64,
    times: &[f64],
) -> f64 {
    let w = packet(grid, window, k, kappa, n, ell);
    let total = w.norm_sqr();
    let tube = Tube { orientation: Orientation::Forward, n, ell, kappa };
    let half = 3.0 * 2.0 * PI * kappa;
    times
        .par_iter()
        .map(|&t| {
            let u = free_propagate(&w, t);
            let c = tube.center_x(t);
            1.0 - u.mass_in_region(c - half, c + half) / total
        })
        .reduce(|| 0.0, f64::max)
}

/// Contribution of cube `(p, q)` to the collision matrix between a forward
/// and a backward tube.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionElement {
    pub forward: Tube,
    pub backward: Tube,
    pub cube: (i64, i64),
    pub eta: f64,
    /// `int int V_{p,q} conj(B) F dx dt`, `F = S(t) omega_fwd`,
    /// `B = S(t - 2 pi kappa^2) omega_bwd`.
    pub value: C64,
    /// `int int |V_{p,q}| |B| |F| dx dt`.
    pub triangle_bound: f64,
    /// Frequency `(-(a - a') eta, (a^2 - a'^2) eta)` the cell must carry for
    /// the phases to be stationary.
    pub resonant_frequency: (f64, f64),
    /// Max of `|V^_{p,q}|` within `3/kappa` of the resonant frequency.
    pub local_amplitude: f64,
    /// `(2 pi)^-1 int int |V_{p,q}|`, an upper bound for `sup |V^_{p,q}|`.
    pub global_amplitude: f64,
    /// Local amplitude below `1e-3` of the global one.
    pub negligible: bool,
}

/// Sample offsets around the resonant frequency, in units of `1/kappa`.
fn probe_offsets() -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    for r in [1.5, 3.0] {
        for i in 0..8 {
            let a = PI * i as f64 / 4.0;
            out.push((r * a.cos(), r * a.sin()));
        }
    }
    out
}

/// Matrix element of the one-collision operator between two packets,
/// restricted to the cell `V phi(x/s - p) phi(t/s - q)`, `s = 2 pi kappa`,
/// by trapezoid quadrature on the propagation grid with time step at most
/// `time_step`.
#[allow(clippy::too_many_arguments)]
pub fn collision_matrix_element(
    v: &SpaceTimePotential,
    window: &Window,
    forward: &Tube,
    backward: &Tube,
    p: i64,
    q: i64,
    k: f64,
    time_step: f64,
) -> Result<CollisionElement, EvolutionError> {
    for tube in [forward, backward] {
        if !tube.meets_cube(p, q) {
            return Err(EvolutionError::NotIncident { n: tube.n, ell: tube.ell, p, q });
        }
    }
    if !(time_step > 0.0) {
        return Err(EvolutionError::Parameter { name: "time_step", value: time_step, why: "must be positive" });
    }
    let grid = &v.grid;
    let kappa = forward.kappa;
    let s = 2.0 * PI * kappa;
    let eta = 1.0 / k;
    let (a, b) = (forward.alpha(), backward.alpha());
    let xi_res = (-(a - b) * eta, (a * a - b * b) * eta);
    let phi = cell_cutter();
    let (c0, c1) = phi.support();
    let (ta, tb) = (s * (q as f64 + c0), s * (q as f64 + c1));
    let n_t = ((tb - ta) / time_step).ceil() as usize;
    let h = (tb - ta) / n_t as f64;
    let final_time = 2.0 * PI * kappa * kappa;

    let mut fwd = free_propagate(&packet(grid, window, k, kappa, forward.n, forward.ell), ta);
    let mut bwd = free_propagate(&packet(grid, window, k, kappa, backward.n, backward.ell), ta - final_time);
    let step = free_phases(grid, k, h);

    // Spatial cutter on the grid (periodic representative nearest the cube).
    let wx: Vec<f64> = (0..grid.m())
        .map(|j| {
            let rel = grid.wrap(grid.x(j) - s * (p as f64 + 0.5)) / s + 0.5;
            phi.eval(rel)
        })
        .collect();
    let probes: Vec<(f64, f64)> =
        probe_offsets().into_iter().map(|(u, w)| (xi_res.0 + u / kappa, xi_res.1 + w / kappa)).collect();
    let mut probe_acc = vec![C64::new(0.0, 0.0); probes.len()];
    let mut value = C64::new(0.0, 0.0);
    let (mut tri, mut glob) = (0.0, 0.0);
    let mut vb = vec![C64::new(0.0, 0.0); grid.m()];
    let dx = grid.dx();
    for i in 0..=n_t {
        let t = ta + i as f64 * h;
        if i > 0 {
            apply_phases(grid, &mut fwd.values, &step);
            apply_phases(grid, &mut bwd.values, &step);
        }
        let wt = phi.eval(t / s - q as f64);
        if wt == 0.0 {
            continue;
        }
        v.fill(t, &mut vb);
        for j in 0..grid.m() {
            if wx[j] == 0.0 {
                continue;
            }
            let cell = vb[j] * (wx[j] * wt);
            if cell.re == 0.0 && cell.im == 0.0 {
                continue;
            }
            let (f, g) = (fwd.values[j], bwd.values[j]);
            value += cell * g.conj() * f;
            tri += cell.norm() * f.norm() * g.norm();
            glob += cell.norm();
            // Physical coordinate on the cube side of the torus.
            let x = s * (p as f64 + 0.5) + grid.wrap(grid.x(j) - s * (p as f64 + 0.5));
            for (acc, &(u, w)) in probe_acc.iter_mut().zip(&probes) {
                *acc += cell * C64::from_polar(1.0, -(x * u + t * w));
            }
        }
    }
    let meas = dx * h;
    let spec = meas / (2.0 * PI);
    let local_amplitude = probe_acc.iter().map(|z| z.norm() * spec).fold(0.0, f64::max);
    let global_amplitude = glob * spec;
    Ok(CollisionElement {
        forward: *forward,
        backward: *backward,
        cube: (p, q),
        eta,
        value: value * meas,
        triangle_bound: tri * meas,
        resonant_frequency: xi_res,
        local_amplitude,
        global_amplitude,
        negligible: local_amplitude < 1e-3 * global_amplitude,
    })
}

/// Band-projected Duhamel bound at one `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionReport {
    pub delta: f64,
    pub ks: Vec<f64>,
    /// `|| P_{|xi| > delta} int S(H - t) g(t) dt ||^2` per `k`.
    pub band_norms: Vec<f64>,
    pub average: f64,
    /// `int int |g|^2 dx dt`.
    pub g_norm_sqr: f64,
    /// `average * delta^2 / ||g||^2`.
    pub constant: f64,
}

/// Duhamel integrals of the source `g` over `[t0, t1]` for every `k`, up to
/// the final unitary factor (which does not change band norms). The source
/// is sampled once per node and shared across `k`: in Fourier space the
/// integrand is `e^{i k xi^2 t} g^(xi, t)`.
fn source_integrals(g: &SpaceTimePotential, ks: &[f64], t0: f64, t1: f64, nodes: usize) -> Vec<WaveFunction> {
    let grid = &g.grid;
    let m = grid.m();
    let h = (t1 - t0) / nodes as f64;
    let steps: Vec<Vec<C64>> = ks.iter().map(|&k| free_phases(grid, k, -h)).collect();
    let mut phases: Vec<Vec<C64>> = ks.iter().map(|&k| free_phases(grid, k, -t0)).collect();
    let mut acc = vec![vec![C64::new(0.0, 0.0); m]; ks.len()];
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for i in 0..=nodes {
        let w = if i == 0 || i == nodes { 0.5 * h } else { h };
        g.fill(t0 + i as f64 * h, &mut buf);
        grid.fft(&mut buf);
        acc.par_iter_mut().zip(phases.par_iter_mut()).zip(&steps).for_each(|((a, ph), st)| {
            for j in 0..m {
                a[j] += ph[j] * buf[j] * w;
                ph[j] *= st[j];
            }
        });
    }
    acc.into_iter()
        .zip(ks)
        .map(|(mut a, &k)| {
            grid.ifft(&mut a);
            WaveFunction { grid: grid.clone(), values: a, time_tag: t1, k }
        })
        .collect()
}

/// Measure `C` in `avg_k || P_{|xi| > delta} int S(H - t) g dt ||^2 <= C
/// delta^-2 ||g||^2` for a source `g` supported in `[t0, t1]`.
pub fn restriction_constant(
    g: &SpaceTimePotential,
    ks: &[f64],
    deltas: &[f64],
    t0: f64,
    t1: f64,
    nodes: usize,
) -> Result<Vec<RestrictionReport>, EvolutionError> {
    if ks.is_empty() || nodes == 0 || !(t1 > t0) {
        return Err(EvolutionError::Parameter { name: "nodes", value: nodes as f64, why: "need k values, nodes and t1 > t0" });
    }
    let grid = &g.grid;
    let h = (t1 - t0) / nodes as f64;
    let mut buf = vec![C64::new(0.0, 0.0); grid.m()];
    let mut g_norm_sqr = 0.0;
    for i in 0..=nodes {
        let w = if i == 0 || i == nodes { 0.5 * h } else { h };
        g.fill(t0 + i as f64 * h, &mut buf);
        g_norm_sqr += w * buf.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
    }
    let integrals = source_integrals(g, ks, t0, t1, nodes);
    Ok(deltas
        .iter()
        .map(|&delta| {
            let band = FrequencySet::above(delta);
            let band_norms: Vec<f64> = integrals.iter().map(|d| d.project_band(&band).norm_sqr()).collect();
            let average = band_norms.iter().sum::<f64>() / band_norms.len() as f64;
            RestrictionReport {
                delta,
                ks: ks.to_vec(),
                band_norms,
                average,
                g_norm_sqr,
                constant: average * delta * delta / g_norm_sqr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::tube_of;
    use crate::potential::{from_fn, plane_wave, zero};

    #[test]
    fn envelope_at_zero_is_window() {
        let env = PacketEnvelope::new(&Window::new());
        let r = env.report(0.0);
        assert!(r.outside_tube < 1e-14, "{}", r.outside_tube);
        assert!((r.lambda_masses[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn envelope_stays_in_tube_for_unit_dispersion() {
        let env = PacketEnvelope::new(&Window::new());
        for i in 0..=16 {
            let s = 2.0 * PI * i as f64 / 16.0;
            let r = env.report(s);
            assert!(r.outside_tube <= 1e-3, "s={s}: {}", r.outside_tube);
            assert!(r.lambda_masses[2] <= 0.2 * r.lambda_masses[1] + 1e-15, "s={s}: {:?}", r.lambda_masses);
        }
    }

    #[test]
    fn evolved_packet_follows_its_tube() {
        let grid = Grid::new(64.0, 1024).unwrap();
        let kappa = 8.0;
        let times: Vec<f64> = (0..=8).map(|i| 2.0 * PI * 64.0 * i as f64 / 8.0).collect();
        for ell in [-8, -3, 0, 5, 8] {
            let worst = tube_localization(&grid, &Window::new(), kappa, 0, ell, 1.0, &times);
            assert!(worst <= 1e-3, "ell={ell}: {worst}");
        }
    }

    #[test]
    fn zero_cell_gives_zero_element() {
        let grid = Grid::new(64.0, 1024).unwrap();
        let f = tube_of(0, 0, Orientation::Forward, 8.0);
        let b = tube_of(0, 0, Orientation::Backward, 8.0);
        let e = collision_matrix_element(&zero(&grid), &Window::new(), &f, &b, 1, 5, 2.0, 0.25).unwrap();
        assert_eq!(e.value, C64::new(0.0, 0.0));
        let far = tube_of(0, 0, Orientation::Forward, 8.0);
        assert!(collision_matrix_element(&zero(&grid), &Window::new(), &far, &b, -4, 5, 2.0, 0.25).is_err());
    }

    #[test]
    fn matched_plane_wave_is_stationary() {
        // Forward slope 0 and backward slope 1/2 meet near (p, q) = (1, 6).
        let grid = Grid::new(64.0, 1024).unwrap();
        let kappa = 8.0;
        let k = 2.0;
        let f = tube_of(0, 0, Orientation::Forward, kappa);
        let b = tube_of(0, 4, Orientation::Backward, kappa);
        let (p, q) = (0, 6);
        assert!(f.meets_cube(p, q) && b.meets_cube(p, q));
        let eta = 1.0 / k;
        let (a1, a2) = (f.alpha(), b.alpha());
        let xi = (-(a1 - a2) * eta, (a1 * a1 - a2 * a2) * eta);
        let matched = collision_matrix_element(&plane_wave(&grid, 1.0, xi), &Window::new(), &f, &b, p, q, k, 0.25).unwrap();
        assert!(!matched.negligible);
        // The envelopes carry their own chirp, so the stationary value is a
        // large fraction of the triangle bound and beats nearby frequencies.
        assert!(matched.value.norm() >= 0.7 * matched.triangle_bound, "{matched:?}");
        for (du, dw) in [(3.0, 0.0), (-3.0, 0.0), (0.0, 3.0), (0.0, -3.0)] {
            let near = (xi.0 + du / kappa, xi.1 + dw / kappa);
            let e = collision_matrix_element(&plane_wave(&grid, 1.0, near), &Window::new(), &f, &b, p, q, k, 0.25).unwrap();
            assert!(e.value.norm() < matched.value.norm(), "{near:?}: {} vs {}", e.value.norm(), matched.value.norm());
        }
        let off = (xi.0 + 1.0, xi.1 - 1.0);
        let miss = collision_matrix_element(&plane_wave(&grid, 1.0, off), &Window::new(), &f, &b, p, q, k, 0.25).unwrap();
        assert!(miss.value.norm() <= 1e-3 * matched.value.norm(), "{} vs {}", miss.value.norm(), matched.value.norm());
        assert!(miss.negligible);
    }

    #[test]
    fn restriction_constant_is_bounded() {
        let grid = Grid::new(32.0, 1024).unwrap();
        let xi0 = 1.0;
        let g = from_fn(&grid, 0.0, false, move |x, t| {
            let bx = (-(x / 10.0).powi(2)).exp();
            let bt = (-((t - 60.0) / 20.0).powi(2)).exp();
            C64::from_polar(bx * bt, xi0 * x - 3.0 * xi0 * xi0 * t)
        });
        let ks: Vec<f64> = (0..17).map(|i| 2.0 + 2.0 * i as f64 / 16.0).collect();
        let reps = restriction_constant(&g, &ks, &[0.25, 0.5], 0.0, 120.0, 2400).unwrap();
        for r in reps {
            assert!(r.constant <= PI * 1.1, "{r:?}");
            assert!(r.constant > 0.1, "{r:?}");
        }
    }
}
