//! Space-time potentials `V(x, t)` and their decompositions.
//!
//! A potential is an evaluator plus metadata. The builders cover the model
//! cases: a lattice of modulated bumps, the resonant cosine, a static trap,
//! complex plane waves and arbitrary closures. [`cells`] windows a potential
//! into characteristic cubes, sparsifies the cube lattice and splits each
//! cell over a frequency lattice of spacing `1/kappa`.

pub mod cells;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, KeyValues};
use crate::field::{Grid, C64};

pub use cells::{CellDecomposition, CellOptions, CellPatch, CellSplit, FrequencySplit};

#[derive(Debug, thiserror::Error)]
pub enum PotentialError {
    #[error("bump index ({n}, {m}) outside the admissible lattice window")]
    IndexOutOfRange { n: i64, m: i64 },
    #[error("bump coefficient {0} outside [-1, 1]")]
    CoefficientTooLarge(f64),
    #[error("domain length 2 pi T = {0} is not a multiple of 2 pi")]
    NotPeriodic(f64),
    #[error("trap profile must be nonpositive; found q({x}) = {value}")]
    PositiveProfile { x: f64, value: f64 },
    #[error("time step {dt} exceeds kappa/8 = {limit}")]
    TimeSampling { dt: f64, limit: f64 },
    #[error("parameter {name} = {value} out of range: {why}")]
    Parameter { name: &'static str, value: f64, why: &'static str },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Evaluator of `V(x, t)`; `x` may lie anywhere on the real line and is read
/// modulo the domain length.
pub trait PotentialField: Send + Sync + fmt::Debug {
    fn value(&self, x: f64, t: f64) -> C64;

    /// Samples at every grid point at time `t`.
    fn fill(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.value(grid.x(j), t);
        }
    }

    fn is_time_independent(&self) -> bool {
        false
    }

    /// Time interval outside of which `V` vanishes identically.
    fn active_window(&self) -> Option<(f64, f64)> {
        None
    }

    /// Box `((x0, x1), (t0, t1))` containing the support.
    fn support_box(&self) -> Option<((f64, f64), (f64, f64))> {
        None
    }
}

/// A sampled-or-closed-form potential with its metadata.
#[derive(Clone)]
pub struct SpaceTimePotential {
    pub grid: Grid,
    pub field: Arc<dyn PotentialField>,
    pub gamma: f64,
    /// Frequency annulus `(rho1, rho2)` carrying the spectrum, when known.
    pub annulus: Option<(f64, f64)>,
    pub is_real: bool,
    /// Declared constant `C` in `sup |V| <= C T^-gamma`.
    pub bound: f64,
    pub label: String,
}

impl fmt::Debug for SpaceTimePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceTimePotential")
            .field("label", &self.label)
            .field("gamma", &self.gamma)
            .field("annulus", &self.annulus)
            .field("is_real", &self.is_real)
            .finish()
    }
}

impl SpaceTimePotential {
    pub fn new(grid: &Grid, field: Arc<dyn PotentialField>, gamma: f64, label: &str) -> Self {
        SpaceTimePotential {
            grid: grid.clone(),
            field,
            gamma,
            annulus: None,
            is_real: true,
            bound: f64::INFINITY,
            label: label.to_string(),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> C64 {
        self.field.value(x, t)
    }

    pub fn fill(&self, t: f64, out: &mut [C64]) {
        self.field.fill(&self.grid, t, out)
    }

    pub fn sample(&self, t: f64) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.grid.m()];
        self.fill(t, &mut v);
        v
    }

    pub fn is_time_independent(&self) -> bool {
        self.field.is_time_independent()
    }

    pub fn active_window(&self) -> Option<(f64, f64)> {
        self.field.active_window()
    }

    /// True when the declared bound forces `V = 0`.
    pub fn is_zero(&self) -> bool {
        self.bound == 0.0
    }

    /// `sup |V|` over the grid at `nt` equally spaced times in `[t0, t1]`.
    pub fn sup_sampled(&self, t0: f64, t1: f64, nt: usize) -> f64 {
        let mut buf = vec![C64::new(0.0, 0.0); self.grid.m()];
        let mut best: f64 = 0.0;
        for i in 0..nt.max(1) {
            let t = if nt <= 1 { t0 } else { t0 + (t1 - t0) * i as f64 / (nt - 1) as f64 };
            self.fill(t, &mut buf);
            best = buf.iter().fold(best, |m, v| m.max(v.norm()));
            if self.is_time_independent() {
                break;
            }
        }
        best
    }

    /// Upper estimate of `sup |V|`: the declared bound when finite, otherwise
    /// a sampled maximum over the active window (or the whole horizon).
    pub fn sup_estimate(&self) -> f64 {
        if self.bound.is_finite() {
            return self.bound * self.scale();
        }
        let (t0, t1) = self.active_window().unwrap_or((0.0, self.grid.length()));
        self.sup_sampled(t0, t1, 65)
    }

    /// `T^-gamma` for this grid.
    pub fn scale(&self) -> f64 {
        self.grid.t().powf(-self.gamma)
    }

    /// `s V`.
    pub fn scaled(&self, s: f64) -> SpaceTimePotential {
        let mut out = self.clone();
        out.field = Arc::new(Scaled { inner: self.field.clone(), s });
        out.bound = self.bound * s.abs();
        out.label = format!("{}*{}", s, self.label);
        out
    }

    /// `V(x + beta t, t)`, the potential seen in a frame moving with speed `-beta`.
    pub fn shifted(&self, beta: f64) -> SpaceTimePotential {
        let mut out = self.clone();
        out.field = Arc::new(Shifted { inner: self.field.clone(), beta, length: self.grid.length() });
        out.annulus = None;
        out.label = format!("shift({beta})[{}]", self.label);
        out
    }
}

#[derive(Debug)]
struct Scaled {
    inner: Arc<dyn PotentialField>,
    s: f64,
}

impl PotentialField for Scaled {
    fn value(&self, x: f64, t: f64) -> C64 {
        self.inner.value(x, t) * self.s
    }
    fn fill(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        self.inner.fill(grid, t, out);
        for v in out.iter_mut() {
            *v *= self.s;
        }
    }
    fn is_time_independent(&self) -> bool {
        self.inner.is_time_independent()
    }
    fn active_window(&self) -> Option<(f64, f64)> {
        self.inner.active_window()
    }
    fn support_box(&self) -> Option<((f64, f64), (f64, f64))> {
        self.inner.support_box()
    }
}

#[derive(Debug)]
struct Shifted {
    inner: Arc<dyn PotentialField>,
    beta: f64,
    length: f64,
}

impl PotentialField for Shifted {
    fn value(&self, x: f64, t: f64) -> C64 {
        let y = x + self.beta * t;
        self.inner.value(y - self.length * (y / self.length).round(), t)
    }
    fn is_time_independent(&self) -> bool {
        self.beta == 0.0 && self.inner.is_time_independent()
    }
    fn active_window(&self) -> Option<(f64, f64)> {
        self.inner.active_window()
    }
}

/// `V = 0`.
pub fn zero(grid: &Grid) -> SpaceTimePotential {
    let mut v = SpaceTimePotential::new(grid, Arc::new(Zero), 0.0, "zero");
    v.bound = 0.0;
    v
}

#[derive(Debug)]
struct Zero;

impl PotentialField for Zero {
    fn value(&self, _: f64, _: f64) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn fill(&self, _: &Grid, _: f64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }
    fn is_time_independent(&self) -> bool {
        true
    }
    fn active_window(&self) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
    fn support_box(&self) -> Option<((f64, f64), (f64, f64))> {
        Some(((0.0, 0.0), (0.0, 0.0)))
    }
}

/// Any closure `(x, t) -> V`. `x` is passed wrapped into `[-L/2, L/2)`.
pub fn from_fn(
    grid: &Grid,
    gamma: f64,
    time_independent: bool,
    f: impl Fn(f64, f64) -> C64 + Send + Sync + 'static,
) -> SpaceTimePotential {
    let field = Closure { f: Box::new(f), length: grid.length(), static_: time_independent };
    let mut v = SpaceTimePotential::new(grid, Arc::new(field), gamma, "closure");
    v.is_real = false;
    v
}

struct Closure {
    #[allow(clippy::type_complexity)]
    f: Box<dyn Fn(f64, f64) -> C64 + Send + Sync>,
    length: f64,
    static_: bool,
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Closure")
    }
}

impl PotentialField for Closure {
    fn value(&self, x: f64, t: f64) -> C64 {
        let l = self.length;
        (self.f)((x + 0.5 * l).rem_euclid(l) - 0.5 * l, t)
    }
    fn is_time_independent(&self) -> bool {
        self.static_
    }
}

/// `amp cos(2x)` or `amp cos(2x + 2t)`.
#[derive(Debug)]
pub struct Cosine {
    pub amp: f64,
    pub moving: bool,
}

impl PotentialField for Cosine {
    fn value(&self, x: f64, t: f64) -> C64 {
        let ph = if self.moving { 2.0 * x + 2.0 * t } else { 2.0 * x };
        C64::new(self.amp * ph.cos(), 0.0)
    }
    fn is_time_independent(&self) -> bool {
        !self.moving
    }
}

/// Resonant cosine with amplitude `L^-gamma`, `L = 2 pi T` the domain length.
pub fn cosine(grid: &Grid, gamma: f64, moving: bool) -> Result<SpaceTimePotential, PotentialError> {
    let amp = grid.length().powf(-gamma);
    let mut v = cosine_with_amplitude(grid, amp, moving)?;
    v.gamma = gamma;
    v.bound = (2.0 * PI).powf(-gamma);
    Ok(v)
}

pub fn cosine_with_amplitude(grid: &Grid, amp: f64, moving: bool) -> Result<SpaceTimePotential, PotentialError> {
    let t = grid.t();
    if (t - t.round()).abs() > 1e-9 * t.max(1.0) {
        return Err(PotentialError::NotPeriodic(grid.length()));
    }
    let mut v = SpaceTimePotential::new(grid, Arc::new(Cosine { amp, moving }), 0.0, "cosine");
    v.annulus = Some((2.0, if moving { 8f64.sqrt() } else { 2.0 }));
    v.bound = amp.abs();
    Ok(v)
}

/// Complex plane wave `amp e^{i(xi1 x + xi2 t)}` restricted to `t in [t0, t1]`.
#[derive(Debug)]
pub struct PlaneWave {
    pub amp: f64,
    pub xi: (f64, f64),
    pub window: Option<(f64, f64)>,
}

impl PotentialField for PlaneWave {
    fn value(&self, x: f64, t: f64) -> C64 {
        if let Some((a, b)) = self.window {
            if t < a || t > b {
                return C64::new(0.0, 0.0);
            }
        }
        C64::from_polar(self.amp, self.xi.0 * x + self.xi.1 * t)
    }
    fn is_time_independent(&self) -> bool {
        self.xi.1 == 0.0 && self.window.is_none()
    }
    fn active_window(&self) -> Option<(f64, f64)> {
        self.window
    }
}

pub fn plane_wave(grid: &Grid, amp: f64, xi: (f64, f64)) -> SpaceTimePotential {
    let mut v = SpaceTimePotential::new(grid, Arc::new(PlaneWave { amp, xi, window: None }), 0.0, "plane_wave");
    v.is_real = false;
    let r = (xi.0 * xi.0 + xi.1 * xi.1).sqrt();
    v.annulus = Some((r, r));
    v
}

/// Default trap well: `q(y) = -exp(1 - 1/(1 - y^2))` on `(-1, 1)`, minimum `-1`.
pub fn trap_well(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        return 0.0;
    }
    -(1.0 - 1.0 / (1.0 - y * y)).exp()
}

#[derive(Clone)]
pub struct Trap {
    pub coupling: f64,
    pub alpha: f64,
    pub profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Trap(lambda={}, alpha={})", self.coupling, self.alpha)
    }
}

impl PotentialField for Trap {
    fn value(&self, x: f64, _: f64) -> C64 {
        C64::new(self.coupling * self.alpha * self.alpha * (self.profile)(self.alpha * x), 0.0)
    }
    fn is_time_independent(&self) -> bool {
        true
    }
}

/// `V(x) = lambda alpha^2 q(alpha x)`, `alpha = T^{-gamma/2}`.
pub fn trap(
    grid: &Grid,
    gamma: f64,
    coupling: f64,
    profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
) -> Result<SpaceTimePotential, PotentialError> {
    let mut qmin: f64 = 0.0;
    for i in 0..=4000 {
        let y = -2.0 + i as f64 * 0.001;
        let v = profile(y);
        if v > 1e-12 {
            return Err(PotentialError::PositiveProfile { x: y, value: v });
        }
        qmin = qmin.min(v);
    }
    let alpha = grid.t().powf(-0.5 * gamma);
    let field = Trap { coupling, alpha, profile };
    let mut v = SpaceTimePotential::new(grid, Arc::new(field), gamma, "trap");
    v.bound = coupling.abs() * qmin.abs();
    Ok(v)
}

/// Radius, in bump units, of the compact bump profile.
pub const BUMP_RADIUS: f64 = 3.0;
const BUMP_SHARPNESS: f64 = 2.0;
/// Annulus widening of the lattice potential, in units of `1/kappa`.
pub const BUMP_SPECTRAL_WIDTH: f64 = 3.0;

/// One-dimensional bump `beta(s) = exp(a - a/(1 - (s/R)^2))`, `beta(0) = 1`.
pub fn bump_profile(s: f64) -> f64 {
    let u = s / BUMP_RADIUS;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (BUMP_SHARPNESS - BUMP_SHARPNESS / (1.0 - u * u)).exp()
}

/// One term `c cos(lambda x + mu t) phi_kappa(x - 2 pi n kappa, t - 2 pi m kappa)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub n: i64,
    pub m: i64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct BumpLattice {
    pub amp: f64,
    pub kappa: f64,
    pub length: f64,
    pub bumps: Vec<Bump>,
}

impl BumpLattice {
    fn centre(&self, b: &Bump) -> (f64, f64) {
        let s = 2.0 * PI * self.kappa;
        (s * b.n as f64, s * b.m as f64)
    }

    fn term(&self, b: &Bump, x: f64, t: f64) -> f64 {
        let (xc, tc) = self.centre(b);
        let dt = (t - tc) / self.kappa;
        if dt.abs() >= BUMP_RADIUS {
            return 0.0;
        }
        let l = self.length;
        let dx = x - xc - l * ((x - xc) / l).round();
        let u = dx / self.kappa;
        if u.abs() >= BUMP_RADIUS {
            return 0.0;
        }
        b.c * (b.lambda * (xc + dx) + b.mu * t).cos() * bump_profile(u) * bump_profile(dt)
    }
}

impl PotentialField for BumpLattice {
    fn value(&self, x: f64, t: f64) -> C64 {
        C64::new(self.amp * self.bumps.iter().map(|b| self.term(b, x, t)).sum::<f64>(), 0.0)
    }

    fn fill(&self, grid: &Grid, t: f64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        let r = BUMP_RADIUS * self.kappa;
        for b in &self.bumps {
            let (xc, tc) = self.centre(b);
            if (t - tc).abs() >= r {
                continue;
            }
            let wt = bump_profile((t - tc) / self.kappa);
            // grid indices covering [xc - r, xc + r]
            let dx = grid.dx();
            let l = grid.length();
            let j0 = ((xc - r + 0.5 * l) / dx).floor() as i64;
            let j1 = ((xc + r + 0.5 * l) / dx).ceil() as i64;
            let m = grid.m() as i64;
            for j in j0..=j1 {
                let x = -0.5 * l + j as f64 * dx;
                let u = (x - xc) / self.kappa;
                if u.abs() >= BUMP_RADIUS {
                    continue;
                }
                let v = b.c * (b.lambda * x + b.mu * t).cos() * bump_profile(u) * wt;
                out[j.rem_euclid(m) as usize] += C64::new(self.amp * v, 0.0);
            }
        }
    }

    fn active_window(&self) -> Option<(f64, f64)> {
        let r = BUMP_RADIUS * self.kappa;
        let ts = self.bumps.iter().map(|b| self.centre(b).1);
        let lo = ts.clone().fold(f64::INFINITY, f64::min);
        let hi = ts.fold(f64::NEG_INFINITY, f64::max);
        if lo > hi {
            Some((0.0, 0.0))
        } else {
            Some((lo - r, hi + r))
        }
    }

    fn support_box(&self) -> Option<((f64, f64), (f64, f64))> {
        let r = BUMP_RADIUS * self.kappa;
        let (xs, ts): (Vec<f64>, Vec<f64>) = self.bumps.iter().map(|b| self.centre(b)).unzip();
        if xs.is_empty() {
            return Some(((0.0, 0.0), (0.0, 0.0)));
        }
        let mn = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(((mn(&xs) - r, mx(&xs) + r), (mn(&ts) - r, mx(&ts) + r)))
    }
}

/// Admissible lattice indices: `|2 pi n kappa| < T/4`, `|2 pi m kappa - pi T| < T/20`.
pub fn bump_index_window(t: f64) -> (Vec<i64>, Vec<i64>) {
    let s = 2.0 * PI * t.sqrt();
    let ns = (-(t / s) as i64 - 1..=(t / s) as i64 + 1).filter(|&n| (s * n as f64).abs() < 0.25 * t).collect();
    let mc = PI * t / s;
    let ms = ((mc - t / s) as i64 - 1..=(mc + t / s) as i64 + 1)
        .filter(|&m| (s * m as f64 - PI * t).abs() < 0.05 * t)
        .collect();
    (ns, ms)
}

/// Bump lattice with explicit terms; amplitude `T^-gamma`.
pub fn bump_lattice(grid: &Grid, gamma: f64, bumps: Vec<Bump>) -> Result<SpaceTimePotential, PotentialError> {
    let t = grid.t();
    let (ns, ms) = bump_index_window(t);
    let mut rho: (f64, f64) = (f64::INFINITY, 0.0);
    for b in &bumps {
        if !ns.contains(&b.n) || !ms.contains(&b.m) {
            return Err(PotentialError::IndexOutOfRange { n: b.n, m: b.m });
        }
        if !(b.c.abs() <= 1.0) {
            return Err(PotentialError::CoefficientTooLarge(b.c));
        }
        let r = (b.lambda * b.lambda + b.mu * b.mu).sqrt();
        rho = (rho.0.min(r), rho.1.max(r));
    }
    let kappa = grid.kappa();
    let field = BumpLattice { amp: t.powf(-gamma), kappa, length: grid.length(), bumps };
    let mut v = SpaceTimePotential::new(grid, Arc::new(field), gamma, "bump_lattice");
    if rho.0 <= rho.1 {
        let w = BUMP_SPECTRAL_WIDTH / kappa;
        v.annulus = Some(((rho.0 - w).max(0.0), rho.1 + w));
    }
    v.bound = 1.0;
    Ok(v)
}

/// Random lattice: every admissible `(n, m)`, `c` uniform on `[-1, 1]`,
/// direction uniform on the circle, `|(lambda, mu)|` uniform on `[0.9, 1.1]`.
pub fn random_bump_lattice(grid: &Grid, gamma: f64, seed: u64) -> SpaceTimePotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ns, ms) = bump_index_window(grid.t());
    let mut bumps = Vec::new();
    for &n in &ns {
        for &m in &ms {
            let c = rng.gen_range(-1.0..=1.0);
            let ang = rng.gen_range(0.0..2.0 * PI);
            let r = rng.gen_range(0.9..=1.1);
            bumps.push(Bump { n, m, c, lambda: r * ang.cos(), mu: r * ang.sin() });
        }
    }
    bump_lattice(grid, gamma, bumps).expect("indices come from the admissible window")
}

/// Space-time region `|x| <= pi T`, `c T <= t <= 2 pi T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Upsilon {
    pub t: f64,
    pub c: f64,
}

impl Upsilon {
    pub const DEFAULT_C: f64 = PI / 2.0;

    pub fn new(t: f64) -> Upsilon {
        Upsilon { t, c: Self::DEFAULT_C }
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x.abs() <= PI * self.t && t >= self.c * self.t && t <= 2.0 * PI * self.t
    }
}

/// Time-sampled potential, cubic in `t` and periodic cubic in `x`.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub t0: f64,
    pub dt: f64,
    pub frames: Vec<Vec<C64>>,
    grid_dx: f64,
    length: f64,
}

fn lagrange4(p: [C64; 4], s: f64) -> C64 {
    // nodes -1, 0, 1, 2
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3]
}

impl Sampled {
    fn frame_at(&self, i: i64) -> &Vec<C64> {
        &self.frames[i.clamp(0, self.frames.len() as i64 - 1) as usize]
    }

    fn at_time(&self, j: i64, t: f64) -> C64 {
        let m = self.frames[0].len() as i64;
        let j = j.rem_euclid(m) as usize;
        let u = (t - self.t0) / self.dt;
        if self.frames.len() == 1 {
            return self.frames[0][j];
        }
        let i = u.floor() as i64;
        let s = u - i as f64;
        lagrange4([-1, 0, 1, 2].map(|o| self.frame_at(i + o)[j]), s)
    }
}

impl PotentialField for Sampled {
    fn value(&self, x: f64, t: f64) -> C64 {
        let u = (x + 0.5 * self.length) / self.grid_dx;
        let j = u.floor() as i64;
        let s = u - j as f64;
        lagrange4([-1, 0, 1, 2].map(|o| self.at_time(j + o, t)), s)
    }

    fn fill(&self, _: &Grid, t: f64, out: &mut [C64]) {
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.at_time(j as i64, t);
        }
    }

    fn is_time_independent(&self) -> bool {
        self.frames.len() == 1
    }
}

/// Sample `v` on the grid at `t0 + i dt`, `i < count`.
pub fn sampled(v: &SpaceTimePotential, t0: f64, dt: f64, count: usize) -> Result<SpaceTimePotential, PotentialError> {
    let limit = v.grid.kappa() / 8.0;
    if dt > limit {
        return Err(PotentialError::TimeSampling { dt, limit });
    }
    let frames = (0..count.max(1)).map(|i| v.sample(t0 + i as f64 * dt)).collect();
    let field = Sampled { t0, dt, frames, grid_dx: v.grid.dx(), length: v.grid.length() };
    let mut out = v.clone();
    out.field = Arc::new(field);
    out.label = format!("sampled[{}]", v.label);
    Ok(out)
}

/// Potential described by a flat config.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialConfig {
    pub kind: String,
    pub gamma: f64,
    pub seed: u64,
    /// Trap coupling for `kind = trap`; frequency-split parameter otherwise.
    pub lambda: f64,
    pub period: u64,
    pub c: f64,
    pub moving: bool,
}

impl PotentialConfig {
    pub const KEYS: &'static [&'static str] = &["kind", "gamma", "seed", "lambda", "P", "c", "moving"];

    pub fn from_kv(kv: &KeyValues) -> Result<PotentialConfig, PotentialError> {
        let kind: String = kv.get_or("kind", "zero".to_string())?;
        if !["zero", "bump_lattice", "cosine", "trap"].contains(&kind.as_str()) {
            return Err(KeyValues::invalid("kind", &kind, "expected bump_lattice, cosine, trap or zero").into());
        }
        let default_lambda = if kind == "trap" { 30.0 } else { 0.3 };
        let cfg = PotentialConfig {
            kind,
            gamma: kv.get_or("gamma", 0.8)?,
            seed: kv.get_or("seed", 0)?,
            lambda: kv.get_or("lambda", default_lambda)?,
            period: kv.get_or("P", 1)?,
            c: kv.get_or("c", Upsilon::DEFAULT_C)?,
            moving: kv.get_or("moving", false)?,
        };
        if cfg.period == 0 {
            return Err(KeyValues::invalid("P", 0, "period must be positive").into());
        }
        if !(cfg.c > 0.0 && cfg.c < 2.0 * PI) {
            return Err(KeyValues::invalid("c", cfg.c, "need 0 < c < 2 pi").into());
        }
        Ok(cfg)
    }

    pub fn build(&self, grid: &Grid) -> Result<SpaceTimePotential, PotentialError> {
        match self.kind.as_str() {
            "zero" => Ok(zero(grid)),
            "cosine" => cosine(grid, self.gamma, self.moving),
            "trap" => trap(grid, self.gamma, self.lambda, Arc::new(trap_well)),
            _ => Ok(random_bump_lattice(grid, self.gamma, self.seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fft2_energy_near_circle(v: &SpaceTimePotential, t0: f64, t1: f64, n: usize, radius: f64, tol: f64) -> f64 {
        // sample a box around the bump and measure the fraction of spectral
        // energy within `tol` of the circle |xi| = radius
        let grid = &v.grid;
        let l = grid.length();
        let hx = l / n as f64;
        let ht = (t1 - t0) / n as f64;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for it in 0..n {
            for ix in 0..n {
                data[it * n + ix] = v.value(-0.5 * l + ix as f64 * hx, t0 + it as f64 * ht);
            }
        }
        let mut planner = rustfft::FftPlanner::new();
        let f = planner.plan_fft_forward(n);
        for row in data.chunks_mut(n) {
            f.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); n];
        for ix in 0..n {
            for it in 0..n {
                col[it] = data[it * n + ix];
            }
            f.process(&mut col);
            for it in 0..n {
                data[it * n + ix] = col[it];
            }
        }
        let sig = |i: usize| if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        let (mut near, mut total) = (0.0, 0.0);
        for it in 0..n {
            for ix in 0..n {
                let e = data[it * n + ix].norm_sqr();
                let xi = (2.0 * PI * sig(ix) / l, 2.0 * PI * sig(it) / (t1 - t0));
                total += e;
                if ((xi.0 * xi.0 + xi.1 * xi.1).sqrt() - radius).abs() <= tol {
                    near += e;
                }
            }
        }
        near / total
    }

    #[test]
    fn zero_bumps_give_zero() {
        let g = Grid::new(2.0 * PI * 32.0, 4096).unwrap();
        let v = bump_lattice(&g, 0.9, vec![]).unwrap();
        assert_eq!(v.sup_sampled(0.0, g.length(), 9), 0.0);
        let (ns, ms) = bump_index_window(g.t());
        let mut b = vec![];
        for &n in &ns {
            for &m in &ms {
                b.push(Bump { n, m, c: 0.0, lambda: 1.0, mu: 0.0 });
            }
        }
        assert_eq!(bump_lattice(&g, 0.9, b).unwrap().sup_sampled(0.0, g.length(), 33), 0.0);
    }

    #[test]
    fn index_window_counts() {
        for (t, nn, nm) in [(32.0, 1, 1), (64.0, 1, 1), (128.0, 3, 1)] {
            let (ns, ms) = bump_index_window(2.0 * PI * t);
            assert_eq!((ns.len(), ms.len()), (nn, nm), "T = 2 pi {t}");
        }
    }

    #[test]
    fn bump_errors() {
        let g = Grid::new(2.0 * PI * 32.0, 4096).unwrap();
        let m0 = bump_index_window(g.t()).1[0];
        assert!(matches!(
            bump_lattice(&g, 0.9, vec![Bump { n: 3, m: m0, c: 0.5, lambda: 1.0, mu: 0.0 }]),
            Err(PotentialError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            bump_lattice(&g, 0.9, vec![Bump { n: 0, m: m0, c: 1.5, lambda: 1.0, mu: 0.0 }]),
            Err(PotentialError::CoefficientTooLarge(_))
        ));
    }

    #[test]
    fn single_bump_sup_and_spectrum() {
        let g = Grid::new(2.0 * PI * 32.0, 4096).unwrap();
        let m0 = bump_index_window(g.t()).1[0];
        let v = bump_lattice(&g, 0.9, vec![Bump { n: 0, m: m0, c: 1.0, lambda: 1.0, mu: 0.0 }]).unwrap();
        let tc = 2.0 * PI * g.kappa() * m0 as f64;
        // peak at x = 0, t = tc
        assert!((v.value(0.0, tc).re - g.t().powf(-0.9)).abs() < 1e-15);
        let sup = v.sup_sampled(tc - 1.0, tc + 1.0, 21);
        assert!(sup <= g.t().powf(-0.9) * (1.0 + 1e-12));
        let (a, b) = v.active_window().unwrap();
        let frac = fft2_energy_near_circle(&v, a - 50.0, b + 50.0, 1024, 1.0, 2.0 / g.kappa());
        assert!(frac >= 0.99, "fraction {frac}");
    }

    #[test]
    fn bump_lattice_lives_in_upsilon() {
        for t in [32.0, 64.0, 128.0] {
            let g = Grid::new(2.0 * PI * t, Grid::default_size(2.0 * PI * t)).unwrap();
            let v = random_bump_lattice(&g, 0.9, 5);
            let ((x0, x1), (t0, t1)) = v.field.support_box().unwrap();
            let u = Upsilon::new(g.t());
            assert!(u.contains(x0, t0) && u.contains(x1, t1), "T = 2 pi {t}");
            assert!(v.sup_sampled(0.0, 2.0 * PI * g.t(), 129) <= v.scale() * v.bound);
        }
    }

    #[test]
    fn disjoint_bumps_share_sup() {
        let g = Grid::new(2.0 * PI * 128.0, 16384).unwrap();
        let m0 = bump_index_window(g.t()).1[0];
        let one = bump_lattice(&g, 0.9, vec![Bump { n: -1, m: m0, c: 1.0, lambda: 1.0, mu: 0.0 }]).unwrap();
        let two = bump_lattice(
            &g,
            0.9,
            vec![
                Bump { n: -1, m: m0, c: 1.0, lambda: 1.0, mu: 0.0 },
                Bump { n: 1, m: m0, c: 1.0, lambda: 1.0, mu: 0.0 },
            ],
        )
        .unwrap();
        let tc = 2.0 * PI * g.kappa() * m0 as f64;
        let (s1, s2) = (one.sup_sampled(tc, tc, 1), two.sup_sampled(tc, tc, 1));
        assert!((s1 - s2).abs() <= 1e-8 * s1);
    }

    #[test]
    fn fill_matches_value() {
        let g = Grid::new(2.0 * PI * 32.0, 4096).unwrap();
        let v = random_bump_lattice(&g, 0.9, 1);
        let (a, b) = v.active_window().unwrap();
        for t in [a + 1.0, 0.5 * (a + b), b - 3.0] {
            let s = v.sample(t);
            for j in (0..g.m()).step_by(37) {
                assert!((s[j] - v.value(g.x(j), t)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cosine_cases() {
        let g = Grid::new(100.0, 2048).unwrap();
        let v = cosine_with_amplitude(&g, 0.1, false).unwrap();
        assert!(v.is_time_independent());
        for t in [0.0, 3.3, 100.0] {
            assert!((v.value(0.0, t).re - 0.1).abs() < 1e-15);
        }
        let w = cosine(&g, 0.75, true).unwrap();
        for (x, t) in [(0.3, 1.1), (-2.0, 40.0)] {
            assert!((w.value(x, t) - w.value(x + PI, t + PI)).norm() < 1e-14);
        }
        // only modes +-2 in x
        let mut s = v.sample(0.0);
        g.fft(&mut s);
        let slot = g.slot((2.0 * g.t()) as i64).unwrap();
        let slot_m = g.slot(-(2.0 * g.t()) as i64).unwrap();
        for (i, c) in s.iter().enumerate() {
            if i != slot && i != slot_m {
                assert!(c.norm() < 1e-9, "mode {}", g.mode(i));
            }
        }
        assert!(matches!(cosine(&Grid::new(100.5, 2048).unwrap(), 0.75, false), Err(PotentialError::NotPeriodic(_))));
    }

    #[test]
    fn trap_cases() {
        let g = Grid::new(256.0, 4096).unwrap();
        let v = trap(&g, 0.8, 30.0, Arc::new(trap_well)).unwrap();
        let sup = v.sup_sampled(0.0, 0.0, 1);
        assert!((sup - 30.0 * 256f64.powf(-0.8)).abs() < 1e-3 * sup);
        assert!(v.is_time_independent());
        let z = trap(&g, 0.8, 0.0, Arc::new(trap_well)).unwrap();
        assert_eq!(z.sup_sampled(0.0, 0.0, 1), 0.0);
        assert!(matches!(
            trap(&g, 0.8, 1.0, Arc::new(|y: f64| 0.5 - y * y)),
            Err(PotentialError::PositiveProfile { .. })
        ));
    }

    #[test]
    fn shifted_and_scaled() {
        let g = Grid::new(100.0, 2048).unwrap();
        let v = cosine_with_amplitude(&g, 0.2, false).unwrap();
        let m = v.shifted(1.0);
        let w = cosine_with_amplitude(&g, 0.2, true).unwrap();
        for (x, t) in [(0.1, 0.7), (3.0, 12.5), (-300.0, 50.0)] {
            assert!((m.value(x, t) - w.value(x, t)).norm() < 1e-12);
        }
        assert!((v.scaled(2.0).value(0.0, 0.0).re - 0.4).abs() < 1e-15);
    }

    #[test]
    fn sampled_interpolates_cubically() {
        let g = Grid::new(16.0, 512).unwrap();
        let v = from_fn(&g, 0.0, false, |x, t| C64::new((0.5 * x).cos() * (0.2 * t).sin(), 0.0));
        let s = sampled(&v, 0.0, 0.25, 200).unwrap();
        for (x, t) in [(0.37, 3.3), (-7.1, 21.05), (2.0, 40.0)] {
            assert!((s.value(x, t) - v.value(x, t)).norm() < 1e-4);
        }
        assert!(matches!(sampled(&v, 0.0, 1.0, 10), Err(PotentialError::TimeSampling { .. })));
    }

    #[test]
    fn config_builds_each_kind() {
        let g = Grid::new(64.0, 1024).unwrap();
        for (text, label) in [
            ("kind = cosine\ngamma = 0.75", "cosine"),
            ("kind = trap\nlambda = 30", "trap"),
            ("kind = bump_lattice\nseed = 4\nP = 3", "bump_lattice"),
            ("", "zero"),
        ] {
            let kv = KeyValues::parse(text).unwrap();
            kv.reject_unknown(PotentialConfig::KEYS).unwrap();
            let cfg = PotentialConfig::from_kv(&kv).unwrap();
            assert_eq!(cfg.build(&g).unwrap().label, label);
        }
        let kv = KeyValues::parse("kind = swamp").unwrap();
        assert!(PotentialConfig::from_kv(&kv).is_err());
    }
}
