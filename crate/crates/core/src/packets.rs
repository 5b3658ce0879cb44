//! Wave-packet frame: window, analysis, synthesis, truncation and tubes.
//!
//! A packet is `omega_{n,l}(x) = h_n(x) e^{i l eta x / kappa}` with
//! `h_n(x) = kappa^{-1/2} h((x - 2 pi kappa n)/kappa)`. Coefficients are
//! `f_{n,l} = (eta/2pi) \int f h_n e^{-i l eta x/kappa} dx`.
//!
//! The integrals are evaluated exactly for the trigonometric interpolant of
//! the grid data: `f` is refined spectrally onto an oversampled grid on which
//! the integrand is alias free, and the sums over `l` (or over `x` for the
//! synthesis) are chirp-z transforms. The `l` range covers the grid band plus
//! the effective bandwidth of the window, so the frame identity and the
//! reconstruction hold to the window's spectral tail.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::{Grid, WaveFunction, C64};
use crate::output::{Cell, Table};
use crate::smooth::WindowProfile;

#[derive(Debug, thiserror::Error)]
pub enum PacketError {
    #[error("k = {0} outside the dyadic block [2, 4]; rescale first")]
    KOutOfRange(f64),
    #[error("cube ({p}, {q}) lies outside the characteristic region")]
    CubeOutside { p: i64, q: i64 },
    #[error("coefficient table is incomplete: {0}")]
    Incomplete(String),
}

/// Default parameters of the window profile.
pub const WINDOW_KERNEL: f64 = 0.3;
pub const WINDOW_WARP: (f64, f64) = (0.2, -0.1);

/// Relative spectral tail of the window at which the frame is truncated.
pub const FRAME_TAIL_TOL: f64 = 1e-11;

struct WindowInner {
    profile: WindowProfile,
    tails: OnceLock<Vec<(f64, f64)>>,
}

/// The window `h`, supported in `[0, 4 pi]`, with `sum_n h^2(s - 2 pi n) = 1`.
#[derive(Clone)]
pub struct Window {
    inner: Arc<WindowInner>,
}

impl std::fmt::Debug for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = &self.inner.profile;
        write!(f, "Window(a={}, A={}, B={})", p.a, p.coef_a, p.coef_b)
    }
}

impl Default for Window {
    fn default() -> Self {
        Window::new()
    }
}

impl Window {
    pub fn new() -> Window {
        Window::with_profile(WindowProfile::new(WINDOW_KERNEL, WINDOW_WARP.0, WINDOW_WARP.1))
    }

    pub fn with_profile(profile: WindowProfile) -> Window {
        Window { inner: Arc::new(WindowInner { profile, tails: OnceLock::new() }) }
    }

    pub fn h(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 4.0 * PI {
            return 0.0;
        }
        let p = &self.inner.profile;
        if s <= 2.0 * PI {
            p.theta(s / (2.0 * PI)).sin()
        } else {
            p.theta(s / (2.0 * PI) - 1.0).cos()
        }
    }

    /// `G = h^2`, the mollified indicator of `[pi, 3 pi]`.
    pub fn g(&self, s: f64) -> f64 {
        let v = self.h(s);
        v * v
    }

    /// Window re-centred at the origin: support `[-2 pi, 2 pi]`.
    pub fn centered(&self, s: f64) -> f64 {
        self.h(s + 2.0 * PI)
    }

    pub fn h_n(&self, x: f64, n: i64, kappa: f64) -> f64 {
        self.h((x - 2.0 * PI * kappa * n as f64) / kappa) / kappa.sqrt()
    }

    /// Pairs `(nu, r(nu))` where `r(nu)` is the relative L2 mass of `h^` on
    /// `|freq| > nu`.
    pub fn tail_profile(&self) -> &[(f64, f64)] {
        self.inner.tails.get_or_init(|| {
            let n = 1usize << 14;
            let pad = 8;
            let ds = 4.0 * PI / n as f64;
            let mut buf = vec![C64::new(0.0, 0.0); n * pad];
            for (j, v) in buf.iter_mut().take(n).enumerate() {
                *v = C64::new(self.h(j as f64 * ds), 0.0);
            }
            FftPlanner::new().plan_fft_forward(n * pad).process(&mut buf);
            let len = buf.len();
            let dnu = 2.0 * PI / (len as f64 * ds);
            let mut e: Vec<(f64, f64)> = buf
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let m = if i < len / 2 { i as f64 } else { i as f64 - len as f64 };
                    ((m * dnu).abs(), c.norm_sqr())
                })
                .collect();
            e.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let total: f64 = e.iter().map(|p| p.1).sum();
            // Suffix sums from the high end; subtracting from the total would
            // floor the relative tail at sqrt(eps).
            let mut out = Vec::with_capacity(e.len() / 2);
            let mut rest = 0.0;
            let mut i = e.len();
            while i > 0 {
                let nu = e[i - 1].0;
                out.push((nu, (rest / total).sqrt()));
                while i > 0 && e[i - 1].0 == nu {
                    rest += e[i - 1].1;
                    i -= 1;
                }
            }
            out.reverse();
            out
        })
    }

    /// Smallest `nu` with relative spectral tail below `tol`.
    pub fn tail_width(&self, tol: f64) -> f64 {
        let prof = self.tail_profile();
        prof.iter().find(|p| p.1 < tol).map(|p| p.0).unwrap_or(prof.last().unwrap().0)
    }
}

/// `y_r = sum_j a_j e^{-i w j r}` for `r = 0..out_len`, via Bluestein.
fn chirp(a: &[C64], w: f64, out_len: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let j_len = a.len();
    if j_len == 0 || out_len == 0 {
        return vec![C64::new(0.0, 0.0); out_len];
    }
    let n = (j_len + out_len - 1).next_power_of_two();
    let phase = |m: i64| -> C64 {
        // w m^2 / 2, reduced before the trigonometric call
        let p = 0.5 * w * (m as f64) * (m as f64);
        C64::from_polar(1.0, p.rem_euclid(2.0 * PI))
    };
    let mut u = vec![C64::new(0.0, 0.0); n];
    for (j, v) in a.iter().enumerate() {
        u[j] = v * phase(j as i64).conj();
    }
    let mut v = vec![C64::new(0.0, 0.0); n];
    for m in -(j_len as i64 - 1)..(out_len as i64) {
        v[m.rem_euclid(n as i64) as usize] = phase(m);
    }
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut u);
    fwd.process(&mut v);
    for (x, y) in u.iter_mut().zip(&v) {
        *x *= y;
    }
    inv.process(&mut u);
    let s = 1.0 / n as f64;
    (0..out_len).map(|r| u[r] * s * phase(r as i64).conj()).collect()
}

/// Frame geometry for one grid and one `k`.
#[derive(Clone, Debug)]
pub struct PacketFrame {
    pub grid: Grid,
    pub k: f64,
    pub window: Window,
    /// Window scale; equals `sqrt(T)` when that tiles the torus.
    pub kappa_w: f64,
    pub n_windows: usize,
    pub n_lo: i64,
    pub ell_max: i64,
    pub upsample: usize,
}

impl PacketFrame {
    pub fn new(grid: &Grid, k: f64) -> Result<PacketFrame, PacketError> {
        PacketFrame::with_window(grid, k, Window::new(), FRAME_TAIL_TOL)
    }

    pub fn with_window(grid: &Grid, k: f64, window: Window, tol: f64) -> Result<PacketFrame, PacketError> {
        if !(2.0..=4.0).contains(&k) {
            return Err(PacketError::KOutOfRange(k));
        }
        let t = grid.t();
        let n_windows = (t.sqrt().round() as usize).max(2);
        let kappa_w = t / n_windows as f64;
        let n_lo = -((n_windows / 2) as i64) - 1;
        let width = window.tail_width(tol);
        let nyq = grid.nyquist();
        let ell_max = (k * kappa_w * nyq + k * width).ceil() as i64 + 4;
        let upsample = (1.0 + 1.25 * width / (kappa_w * nyq)).ceil().max(2.0) as usize;
        Ok(PacketFrame { grid: grid.clone(), k, window, kappa_w, n_windows, n_lo, ell_max, upsample })
    }

    pub fn eta(&self) -> f64 {
        1.0 / self.k
    }

    /// Frequency spacing `eta / kappa_w` of the `l` lattice.
    pub fn theta(&self) -> f64 {
        self.eta() / self.kappa_w
    }

    pub fn n_values(&self) -> std::ops::Range<i64> {
        self.n_lo..self.n_lo + self.n_windows as i64
    }

    pub fn ell_count(&self) -> usize {
        (2 * self.ell_max + 1) as usize
    }

    /// Window `n` support `[a, a + 4 pi kappa_w]` in unwrapped coordinates.
    fn support(&self, n: i64) -> (f64, f64) {
        let a = 2.0 * PI * self.kappa_w * n as f64;
        (a, a + 4.0 * PI * self.kappa_w)
    }

    /// Unwrapped sample indices of a grid with spacing `h` (origin `-L/2`)
    /// strictly inside the support of window `n`.
    fn sample_range(&self, n: i64, h: f64) -> (i64, i64) {
        let l = self.grid.length();
        let (a, b) = self.support(n);
        let lo = ((a + 0.5 * l) / h).floor() as i64 + 1;
        let hi = ((b + 0.5 * l) / h).ceil() as i64 - 1;
        (lo, hi)
    }

    pub fn analyze(&self, f: &WaveFunction) -> PacketCoefficients {
        let grid = &self.grid;
        let u = self.upsample;
        let fine = f.upsample(u);
        let big = fine.len() as i64;
        let h = grid.dx() / u as f64;
        let l = grid.length();
        let theta = self.theta();
        let pref = self.eta() / (2.0 * PI) * h;
        let r_len = self.ell_count();
        let ell_min = -self.ell_max;
        let mut planner = FftPlanner::new();
        let mut table = Vec::with_capacity(self.n_windows * r_len);
        for n in self.n_values() {
            let (lo, hi) = self.sample_range(n, h);
            let xs = -0.5 * l + lo as f64 * h;
            let w = theta * h;
            let a: Vec<C64> = (lo..=hi)
                .enumerate()
                .map(|(j, iu)| {
                    let x = -0.5 * l + iu as f64 * h;
                    let hv = self.window.h_n(x, n, self.kappa_w);
                    // shift l -> l_min + r: factor e^{-i w j l_min}
                    let shift = C64::from_polar(1.0, (-w * j as f64 * ell_min as f64).rem_euclid(2.0 * PI));
                    fine[iu.rem_euclid(big) as usize] * hv * shift
                })
                .collect();
            let y = chirp(&a, w, r_len, &mut planner);
            for (r, v) in y.into_iter().enumerate() {
                let ell = ell_min + r as i64;
                let ph = C64::from_polar(1.0, (-(ell as f64) * theta * xs).rem_euclid(2.0 * PI));
                table.push(v * ph * pref);
            }
        }
        PacketCoefficients {
            frame: self.clone(),
            n_lo: self.n_lo,
            n_count: self.n_windows,
            ell_min,
            ell_max: self.ell_max,
            table,
        }
    }

    pub fn synthesize(&self, c: &PacketCoefficients) -> WaveFunction {
        let grid = &self.grid;
        let m = grid.m() as i64;
        let dx = grid.dx();
        let l = grid.length();
        let theta = self.theta();
        let mut out = vec![C64::new(0.0, 0.0); grid.m()];
        let mut planner = FftPlanner::new();
        let r_len = (c.ell_max - c.ell_min + 1) as usize;
        for (wi, n) in (c.n_lo..c.n_lo + c.n_count as i64).enumerate() {
            let row = &c.table[wi * r_len..(wi + 1) * r_len];
            if row.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                continue;
            }
            let (lo, hi) = self.sample_range(n, dx);
            let xs = -0.5 * l + lo as f64 * dx;
            // value at x_s + i dx: sum_r C_r e^{i (l_min + r) theta (x_s + i dx)}
            let pre: Vec<C64> = row
                .iter()
                .enumerate()
                .map(|(r, v)| {
                    let ell = c.ell_min + r as i64;
                    v * C64::from_polar(1.0, (ell as f64 * theta * xs).rem_euclid(2.0 * PI))
                })
                .collect();
            let w = theta * dx;
            let count = (hi - lo + 1) as usize;
            let y = chirp(&pre, -w, count, &mut planner);
            for (i, v) in y.into_iter().enumerate() {
                let iu = lo + i as i64;
                let x = xs + i as f64 * dx;
                let post = C64::from_polar(1.0, (w * i as f64 * c.ell_min as f64).rem_euclid(2.0 * PI));
                out[iu.rem_euclid(m) as usize] += v * post * self.window.h_n(x, n, self.kappa_w);
            }
        }
        WaveFunction { grid: grid.clone(), values: out, time_tag: 0.0, k: self.k }
    }
}

/// `analyze(f, k)` with the default frame.
pub fn analyze(f: &WaveFunction, k: f64) -> Result<PacketCoefficients, PacketError> {
    Ok(PacketFrame::new(&f.grid, k)?.analyze(f))
}

/// `synthesize(coeffs)` on the frame the coefficients came from.
pub fn synthesize(c: &PacketCoefficients) -> WaveFunction {
    c.frame.synthesize(c)
}

/// Table of `f_{n,l}` over `n in [n_lo, n_lo + n_count)`, `l in [l_min, l_max]`.
#[derive(Clone, Debug)]
pub struct PacketCoefficients {
    pub frame: PacketFrame,
    pub n_lo: i64,
    pub n_count: usize,
    pub ell_min: i64,
    pub ell_max: i64,
    pub table: Vec<C64>,
}

impl PacketCoefficients {
    pub fn k(&self) -> f64 {
        self.frame.k
    }

    fn index(&self, n: i64, ell: i64) -> Option<usize> {
        if n < self.n_lo || n >= self.n_lo + self.n_count as i64 || ell < self.ell_min || ell > self.ell_max {
            return None;
        }
        let r_len = (self.ell_max - self.ell_min + 1) as usize;
        Some((n - self.n_lo) as usize * r_len + (ell - self.ell_min) as usize)
    }

    pub fn get(&self, n: i64, ell: i64) -> C64 {
        self.index(n, ell).map(|i| self.table[i]).unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn set(&mut self, n: i64, ell: i64, v: C64) -> Result<(), PacketError> {
        let i = self
            .index(n, ell)
            .ok_or_else(|| PacketError::Incomplete(format!("({n}, {ell}) outside the table")))?;
        self.table[i] = v;
        Ok(())
    }

    /// Coefficient measured from the start of its window,
    /// `f*_{n,l} = f_{n,l} e^{i l eta 2 pi n}`; same modulus as `f_{n,l}`.
    pub fn star(&self, n: i64, ell: i64) -> C64 {
        let phase = ell as f64 * self.frame.theta() * 2.0 * PI * self.frame.kappa_w * n as f64;
        self.get(n, ell) * C64::from_polar(1.0, phase.rem_euclid(2.0 * PI))
    }

    /// An all-zero table over the full ranges of `frame`.
    pub fn zeros(frame: &PacketFrame) -> PacketCoefficients {
        PacketCoefficients {
            frame: frame.clone(),
            n_lo: frame.n_lo,
            n_count: frame.n_windows,
            ell_min: -frame.ell_max,
            ell_max: frame.ell_max,
            table: vec![C64::new(0.0, 0.0); frame.n_windows * frame.ell_count()],
        }
    }

    /// `sum |f_{n,l}|^2`.
    pub fn energy(&self) -> f64 {
        self.table.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Relative error of `sum |f*|^2 = (eta / 2 pi) ||f||^2`.
    pub fn frame_identity_error(&self, f: &WaveFunction) -> f64 {
        let expected = self.frame.eta() / (2.0 * PI) * f.norm_sqr();
        if expected == 0.0 {
            return self.energy();
        }
        (self.energy() - expected).abs() / expected
    }

    /// Keep `|n| <= 2 kappa` and `|l| <= c delta kappa`; report the discarded
    /// mass `(2 pi / eta) sum |f_{n,l}|^2` over the dropped entries.
    pub fn truncate(&self, delta: f64, c: f64) -> (PacketCoefficients, f64) {
        let kappa = self.frame.kappa_w;
        let n_lim = 2.0 * kappa;
        let ell_lim = c * delta * kappa;
        let mut out = self.clone();
        let mut dropped = 0.0;
        let r_len = (self.ell_max - self.ell_min + 1) as usize;
        for (i, v) in out.table.iter_mut().enumerate() {
            let n = self.n_lo + (i / r_len) as i64;
            let ell = self.ell_min + (i % r_len) as i64;
            if (n as f64).abs() > n_lim || (ell as f64).abs() > ell_lim {
                dropped += v.norm_sqr();
                *v = C64::new(0.0, 0.0);
            }
        }
        (out, dropped * 2.0 * PI / self.frame.eta())
    }

    /// CSV with columns `n, ell, re, im, abs`; zero entries are skipped.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "ell", "re", "im", "abs"]);
        let r_len = (self.ell_max - self.ell_min + 1) as usize;
        for (i, v) in self.table.iter().enumerate() {
            if v.norm() == 0.0 {
                continue;
            }
            let n = self.n_lo + (i / r_len) as i64;
            let ell = self.ell_min + (i % r_len) as i64;
            t.push(vec![Cell::Int(n), Cell::Int(ell), v.re.into(), v.im.into(), v.norm().into()]);
        }
        t
    }
}

/// The packet `omega_{n,l}` at scale `kappa` sampled on `grid`.
pub fn packet(grid: &Grid, window: &Window, k: f64, kappa: f64, n: i64, ell: i64) -> WaveFunction {
    let l = grid.length();
    let a = 2.0 * PI * kappa * n as f64;
    let freq = ell as f64 / (k * kappa);
    WaveFunction::from_fn(grid, k, |x| {
        // representative of x in [a, a + L)
        let xu = a + (x - a).rem_euclid(l);
        let hv = window.h_n(xu, n, kappa);
        if hv == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(hv, freq * xu)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Forward,
    Backward,
}

impl Orientation {
    pub fn name(&self) -> &'static str {
        match self {
            Orientation::Forward => "forward",
            Orientation::Backward => "backward",
        }
    }
}

/// Space-time tube. Coordinates are measured in units of the cube side
/// `2 pi kappa`: the slab is `|u - c(tau)| < 1` with centre
/// `c(tau) = n + 1 + 2 alpha tau` (forward) or `n + 1 + 2 alpha (tau - kappa)`
/// (backward, anchored at the final time), for `|tau| < kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tube {
    pub orientation: Orientation,
    pub n: i64,
    pub ell: i64,
    pub kappa: f64,
}

pub fn tube_of(n: i64, ell: i64, orientation: Orientation, kappa: f64) -> Tube {
    Tube { orientation, n, ell, kappa }
}

impl Tube {
    pub fn alpha(&self) -> f64 {
        self.ell as f64 / self.kappa
    }

    /// Centre line in cube units at cube-time `tau`.
    pub fn center(&self, tau: f64) -> f64 {
        let base = self.n as f64 + 1.0;
        match self.orientation {
            Orientation::Forward => base + 2.0 * self.alpha() * tau,
            Orientation::Backward => base + 2.0 * self.alpha() * (tau - self.kappa),
        }
    }

    /// Physical centre `x(t)`.
    pub fn center_x(&self, t: f64) -> f64 {
        2.0 * PI * self.kappa * self.center(t / (2.0 * PI * self.kappa))
    }

    /// Point test in physical coordinates.
    pub fn contains(&self, x: f64, t: f64) -> bool {
        let s = 2.0 * PI * self.kappa;
        let tau = t / s;
        tau.abs() < self.kappa && (x / s - self.center(tau)).abs() < 1.0
    }

    /// Exact intersection of the open slab with the closed cube `[p,p+1] x [q,q+1]`.
    pub fn meets_cube(&self, p: i64, q: i64) -> bool {
        let t0 = (q as f64).max(-self.kappa);
        let t1 = (q as f64 + 1.0).min(self.kappa);
        if t0 > t1 || (t0 == t1 && t0.abs() >= self.kappa) {
            return false;
        }
        let (c0, c1) = (self.center(t0), self.center(t1));
        let (lo, hi) = (c0.min(c1), c0.max(c1));
        lo - 1.0 < p as f64 + 1.0 && hi + 1.0 > p as f64
    }

    /// Cube-time range `[t0, t1]` within row `q` where the tube meets column `p`.
    pub fn time_window_in_cube(&self, p: i64, q: i64) -> Option<(f64, f64)> {
        if !self.meets_cube(p, q) {
            return None;
        }
        let a = 2.0 * self.alpha();
        let (mut t0, mut t1) = ((q as f64).max(-self.kappa), (q as f64 + 1.0).min(self.kappa));
        if a != 0.0 {
            // |c(tau) - [p, p+1]| < 1  <=>  p - 1 < c(tau) < p + 2
            let c_at = |tau: f64| self.center(tau);
            let ta = (p as f64 - 1.0 - c_at(0.0)) / a;
            let tb = (p as f64 + 2.0 - c_at(0.0)) / a;
            let (lo, hi) = (ta.min(tb), ta.max(tb));
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        Some((t0, t1))
    }
}

/// Admissible tube family: `n in [n_min, n_max]`, `l in [ell_min, ell_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeSet {
    pub orientation: Orientation,
    pub n_min: i64,
    pub n_max: i64,
    pub ell_min: i64,
    pub ell_max: i64,
    pub kappa: f64,
}

impl TubeSet {
    /// `|n| <= 2 kappa`, `|alpha| <= c delta`.
    pub fn forward(kappa: f64, delta: f64, c: f64) -> TubeSet {
        let nl = (2.0 * kappa).floor() as i64;
        let ll = (c * delta * kappa + 1e-9).floor() as i64;
        TubeSet { orientation: Orientation::Forward, n_min: -nl, n_max: nl, ell_min: -ll, ell_max: ll, kappa }
    }

    /// `|n| <= c_n kappa`, `c1 <= alpha <= c2`.
    pub fn backward(kappa: f64, c_n: f64, c1: f64, c2: f64) -> TubeSet {
        let nl = (c_n * kappa).floor() as i64;
        TubeSet {
            orientation: Orientation::Backward,
            n_min: -nl,
            n_max: nl,
            ell_min: (c1 * kappa - 1e-9).ceil() as i64,
            ell_max: (c2 * kappa + 1e-9).floor() as i64,
            kappa,
        }
    }

    pub fn len(&self) -> usize {
        if self.n_max < self.n_min || self.ell_max < self.ell_min {
            return 0;
        }
        ((self.n_max - self.n_min + 1) * (self.ell_max - self.ell_min + 1)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tubes(&self) -> impl Iterator<Item = Tube> + '_ {
        (self.n_min..=self.n_max)
            .flat_map(move |n| (self.ell_min..=self.ell_max).map(move |l| tube_of(n, l, self.orientation, self.kappa)))
    }

    /// Base indices `n` (within the set) of slope `ell` meeting cube `(p, q)`.
    pub fn n_range_through(&self, ell: i64, p: i64, q: i64) -> (i64, i64) {
        let a2 = 2.0 * ell as f64 / self.kappa;
        let shift = match self.orientation {
            Orientation::Forward => q as f64,
            Orientation::Backward => q as f64 - self.kappa,
        };
        // centre c(tau) = n + 1 + a2 (tau - anchor); over tau in [q, q+1]
        // the slab meets [p, p+1] iff n lies in the open interval below.
        let lo = p as f64 - 2.0 - a2 * shift - a2.max(0.0);
        let hi = p as f64 + 1.0 - a2 * shift - a2.min(0.0);
        let mut n0 = lo.floor() as i64 + 1;
        let mut n1 = hi.ceil() as i64 - 1;
        n0 = n0.max(self.n_min);
        n1 = n1.min(self.n_max);
        (n0, n1)
    }
}

/// Characteristic region in cube units: `|p| <= c1 kappa`, `c2 kappa < q < kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeRegion {
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CubeRegion {
    /// Region for the default constant `c = pi/2` of the time window `[cT, 2 pi T]`.
    pub fn standard(kappa: f64) -> CubeRegion {
        CubeRegion { kappa, c1: 0.5, c2: 0.25 }
    }

    pub fn contains(&self, p: i64, q: i64) -> bool {
        (p as f64).abs() <= self.c1 * self.kappa && (q as f64) > self.c2 * self.kappa && (q as f64) < self.kappa
    }

    pub fn rows(&self) -> std::ops::RangeInclusive<i64> {
        let q0 = (self.c2 * self.kappa).floor() as i64 + 1;
        let q1 = self.kappa.ceil() as i64 - 1;
        q0..=q1
    }

    pub fn columns(&self) -> std::ops::RangeInclusive<i64> {
        let p = (self.c1 * self.kappa).floor() as i64;
        -p..=p
    }
}

/// Tubes of `set` meeting cube `(p, q)`, which must lie in `region`.
pub fn tubes_through_cube(p: i64, q: i64, set: &TubeSet, region: &CubeRegion) -> Result<Vec<Tube>, PacketError> {
    if !region.contains(p, q) {
        return Err(PacketError::CubeOutside { p, q });
    }
    let mut out = Vec::new();
    for ell in set.ell_min..=set.ell_max {
        let (n0, n1) = set.n_range_through(ell, p, q);
        for n in n0..=n1 {
            out.push(tube_of(n, ell, set.orientation, set.kappa));
        }
    }
    Ok(out)
}

/// CSV with columns `orientation, n, ell, alpha`.
pub fn tube_table(tubes: &[Tube]) -> Table {
    let mut t = Table::new(&["orientation", "n", "ell", "alpha"]);
    for tb in tubes {
        t.push(vec![tb.orientation.name().into(), Cell::Int(tb.n), Cell::Int(tb.ell), tb.alpha().into()]);
    }
    t
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<PacketFrame>();
    check::<PacketCoefficients>();
    check::<Arc<dyn Fft<f64>>>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FrequencySet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_f(grid: &Grid, k: f64, seed: u64) -> WaveFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WaveFunction::from_fn(grid, k, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).normalized()
    }

    #[test]
    fn window_partition_and_support() {
        let w = Window::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s: f64 = rng.gen_range(-20.0..20.0);
            let sum: f64 = (-6..=6).map(|n| w.g(s - 2.0 * PI * n as f64)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "s={s} sum={sum}");
        }
        assert_eq!(w.h(-0.1), 0.0);
        assert_eq!(w.h(4.0 * PI + 0.1), 0.0);
        assert!((w.h(2.0 * PI) - 1.0).abs() < 1e-15);
        assert!((0..400).all(|i| w.h(i as f64 * 0.0315) >= 0.0));
    }

    #[test]
    fn tail_profile_is_monotone_and_decays() {
        let w = Window::new();
        let p = w.tail_profile();
        assert!(p.windows(2).all(|a| a[1].1 <= a[0].1 + 1e-18));
        assert!(w.tail_width(1e-6) < w.tail_width(1e-11));
        assert!(w.tail_width(1e-11) < 400.0);
    }

    #[test]
    fn k_outside_block_rejected() {
        let g = Grid::new(16.0, 256).unwrap();
        assert!(matches!(PacketFrame::new(&g, 1.5), Err(PacketError::KOutOfRange(_))));
        assert!(matches!(PacketFrame::new(&g, 4.5), Err(PacketError::KOutOfRange(_))));
        assert!(PacketFrame::new(&g, 4.0).is_ok());
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::new(16.0, 256).unwrap();
        let c = analyze(&WaveFunction::zeros(&g, 2.0), 2.0).unwrap();
        assert_eq!(c.energy(), 0.0);
        assert_eq!(synthesize(&c).l2_norm(), 0.0);
    }

    #[test]
    fn frame_identity_and_round_trip() {
        let g = Grid::new(64.0, 1024).unwrap();
        for (i, &k) in [2.0, 2.5, 3.0, 3.7].iter().enumerate() {
            let f = random_f(&g, k, i as u64);
            let c = analyze(&f, k).unwrap();
            assert!(c.frame_identity_error(&f) < 1e-8);
            assert!(synthesize(&c).distance(&f) < 1e-8);
        }
    }

    #[test]
    fn star_has_same_modulus() {
        let g = Grid::new(16.0, 256).unwrap();
        let f = random_f(&g, 3.0, 11);
        let c = analyze(&f, 3.0).unwrap();
        for n in c.frame.n_values() {
            for ell in [-40, -3, 0, 5, 77] {
                assert!((c.star(n, ell).norm() - c.get(n, ell).norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plane_wave_concentrates_near_its_frequency() {
        let g = Grid::new(64.0, 1024).unwrap();
        let k = 2.5;
        let xi0 = g.xi(37);
        let f = WaveFunction::from_fn(&g, k, |x| C64::from_polar(1.0, xi0 * x));
        let c = analyze(&f, k).unwrap();
        let fr = &c.frame;
        for n in fr.n_values() {
            let (mut inside, mut outside) = (0.0, 0.0);
            for ell in c.ell_min..=c.ell_max {
                let m = c.get(n, ell).norm_sqr();
                if (ell as f64 * fr.theta() - xi0).abs() <= 3.0 * 2.0 * PI / fr.kappa_w {
                    inside += m;
                } else {
                    outside += m;
                }
            }
            assert!(outside <= 1e-3 * (inside + outside), "n={n}");
        }
    }

    #[test]
    fn single_coefficient_gives_window() {
        let g = Grid::new(16.0, 256).unwrap();
        let fr = PacketFrame::new(&g, 2.0).unwrap();
        let mut c = PacketCoefficients::zeros(&fr);
        c.set(0, 0, C64::new(1.0, 0.0)).unwrap();
        let out = fr.synthesize(&c);
        let expect = packet(&g, &fr.window, 2.0, fr.kappa_w, 0, 0);
        assert!(out.distance(&expect) < 1e-12);
        assert!(c.set(0, fr.ell_max + 1, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn truncation() {
        let g = Grid::new(64.0, 1024).unwrap();
        let k = 2.0;
        let delta = 0.5;
        // smooth low-frequency profile well inside the domain
        let f = WaveFunction::from_fn(&g, k, |x| C64::new((-(x / 20.0).powi(2)).exp(), 0.0));
        let f = f.project_band(&FrequencySet::new(vec![(-delta / 2.0, delta / 2.0)])).normalized();
        let c = analyze(&f, k).unwrap();
        let (kept, dropped) = c.truncate(delta, 4.0);
        assert!(dropped <= 1e-3, "dropped {dropped}");
        let (again, zero) = kept.truncate(delta, 4.0);
        assert_eq!(zero, 0.0);
        assert_eq!(again.table, kept.table);
        let (only0, _) = c.truncate(0.0, 4.0);
        for n in c.frame.n_values() {
            for ell in c.ell_min..=c.ell_max {
                if ell != 0 {
                    assert_eq!(only0.get(n, ell), C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn coefficient_csv_columns() {
        let g = Grid::new(4.0, 64).unwrap();
        let fr = PacketFrame::new(&g, 2.0).unwrap();
        let mut c = PacketCoefficients::zeros(&fr);
        c.set(-1, 2, C64::new(0.5, -0.5)).unwrap();
        let t = c.to_table();
        assert_eq!(t.header, vec!["n", "ell", "re", "im", "abs"]);
        assert_eq!(t.rows.len(), 1);
    }

    // Point-sampling oracle in cube units. `grow` widens the slab.
    fn sampled_hit(t: &Tube, p: i64, q: i64, grow: f64, steps: usize) -> bool {
        for i in 0..=steps {
            let tau = q as f64 + i as f64 / steps as f64;
            if tau.abs() >= t.kappa + grow {
                continue;
            }
            let c = t.center(tau);
            for j in 0..=steps {
                let u = p as f64 + j as f64 / steps as f64;
                if (u - c).abs() < 1.0 + grow {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn cube_incidence_matches_sampling() {
        let kappa = 16.0;
        let region = CubeRegion::standard(kappa);
        let sets = [TubeSet::forward(kappa, 0.1, 4.0), TubeSet::backward(kappa, 4.0, 0.4, 1.2)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for set in sets {
            for _ in 0..6 {
                let p = rng.gen_range(*region.columns().start()..=*region.columns().end());
                let q = rng.gen_range(*region.rows().start()..=*region.rows().end());
                let listed = tubes_through_cube(p, q, &set, &region).unwrap();
                for tube in set.tubes() {
                    let exact = tube.meets_cube(p, q);
                    assert_eq!(exact, listed.contains(&tube), "{tube:?} ({p},{q})");
                    if sampled_hit(&tube, p, q, 0.0, 200) {
                        assert!(exact, "{tube:?} ({p},{q})");
                    }
                    if exact {
                        assert!(sampled_hit(&tube, p, q, 0.01, 200), "{tube:?} ({p},{q})");
                    }
                }
            }
        }
    }

    #[test]
    fn vertical_tube_meets_every_row() {
        let kappa = 16.0;
        let region = CubeRegion::standard(kappa);
        for p in [-3, 0, 5] {
            let t = tube_of(p, 0, Orientation::Forward, kappa);
            assert!(region.rows().all(|q| t.meets_cube(p, q)));
        }
        assert!(matches!(
            tubes_through_cube(0, 0, &TubeSet::forward(kappa, 0.1, 4.0), &region),
            Err(PacketError::CubeOutside { .. })
        ));
    }

    #[test]
    fn parallel_tubes_two_apart_are_disjoint() {
        let kappa = 9.0;
        for ell in [-3, 0, 4] {
            let a = tube_of(1, ell, Orientation::Forward, kappa);
            let b = tube_of(3, ell, Orientation::Forward, kappa);
            let s = 2.0 * PI * kappa;
            for i in 0..200 {
                let t = (i as f64 / 100.0 - 1.0) * kappa * s * 0.99;
                for j in 0..400 {
                    let x = a.center_x(t) + (j as f64 / 100.0 - 2.0) * s;
                    assert!(!(a.contains(x, t) && b.contains(x, t)));
                }
            }
        }
    }

    #[test]
    fn resonance_relation_within_two() {
        // 2 alpha q = p - n + O(1) forward, 2 alpha (kappa - q) = n - p + O(1) backward
        let kappa = 16.0;
        let region = CubeRegion::standard(kappa);
        for set in [TubeSet::forward(kappa, 0.1, 4.0), TubeSet::backward(kappa, 4.0, 0.4, 1.2)] {
            for q in region.rows() {
                for p in region.columns() {
                    for t in tubes_through_cube(p, q, &set, &region).unwrap() {
                        let a2 = 2.0 * t.alpha();
                        let resid = match t.orientation {
                            Orientation::Forward => a2 * q as f64 - (p - t.n) as f64,
                            Orientation::Backward => a2 * (kappa - q as f64) - (t.n - p) as f64,
                        };
                        assert!(resid.abs() <= 2.0 + 2.0 * a2.abs(), "{t:?} ({p},{q}) {resid}");
                    }
                }
            }
        }
    }
}
