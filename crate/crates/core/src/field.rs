//! Periodic grid, wave functions, spectral transform and band projections.
//!
//! The domain is the torus `[-L/2, L/2)` with `L = 2 pi T`, sampled at `M`
//! points. Spectra use the unitary convention
//! `f^(xi) = (2 pi)^{-1/2} \int f(x) e^{-i x xi} dx` sampled at `xi_m = m/T`,
//! so `sum_m |f^_m|^2 / T = ||f||^2`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("grid size M={0} must be a power of two and at least 8")]
    BadSize(usize),
    #[error("grid parameter T must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("wave functions live on different grids")]
    GridMismatch,
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct GridInner {
    t: f64,
    m: usize,
    dx: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("T", &self.t()).field("M", &self.m()).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || (self.t() == other.t() && self.m() == other.m())
    }
}

impl Grid {
    pub fn new(t: f64, m: usize) -> Result<Grid, FieldError> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(FieldError::BadHorizon(t));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(FieldError::BadSize(m));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let dx = 2.0 * PI * t / m as f64;
        Ok(Grid { inner: Arc::new(GridInner { t, m, dx, fwd, inv }) })
    }

    /// `M = max(1024, 16 T)` rounded up to a power of two.
    pub fn default_size(t: f64) -> usize {
        ((16.0 * t).ceil() as usize).max(1024).next_power_of_two()
    }

    pub fn t(&self) -> f64 {
        self.inner.t
    }
    pub fn m(&self) -> usize {
        self.inner.m
    }
    pub fn dx(&self) -> f64 {
        self.inner.dx
    }
    pub fn length(&self) -> f64 {
        2.0 * PI * self.inner.t
    }
    pub fn kappa(&self) -> f64 {
        self.inner.t.sqrt()
    }
    /// Largest representable frequency `M/(2T)`.
    pub fn nyquist(&self) -> f64 {
        self.inner.m as f64 / (2.0 * self.inner.t)
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length() + j as f64 * self.inner.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.m()).map(|j| self.x(j)).collect()
    }

    /// Signed mode number of FFT slot `idx`, in `[-M/2, M/2)`.
    pub fn mode(&self, idx: usize) -> i64 {
        let m = self.m();
        if idx < m / 2 {
            idx as i64
        } else {
            idx as i64 - m as i64
        }
    }

    /// FFT slot of signed mode `m`, if representable.
    pub fn slot(&self, mode: i64) -> Option<usize> {
        let m = self.m() as i64;
        if mode < -m / 2 || mode >= m / 2 {
            return None;
        }
        Some(mode.rem_euclid(m) as usize)
    }

    pub fn xi(&self, idx: usize) -> f64 {
        self.mode(idx) as f64 / self.t()
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.xi(i)).collect()
    }

    /// Wrap a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length();
        (x + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    /// In-place unnormalised forward DFT.
    pub fn fft(&self, data: &mut [C64]) {
        self.inner.fwd.process(data);
    }

    /// In-place inverse DFT including the `1/M` factor.
    pub fn ifft(&self, data: &mut [C64]) {
        self.inner.inv.process(data);
        let s = 1.0 / self.m() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Multiply the spectrum of `data` by `mult(xi)`.
    pub fn apply_multiplier(&self, data: &mut [C64], mult: impl Fn(f64) -> C64) {
        self.fft(data);
        for (i, v) in data.iter_mut().enumerate() {
            *v *= mult(self.xi(i));
        }
        self.ifft(data);
    }
}

/// Sampled complex state `u(., t, k)`.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    pub grid: Grid,
    pub values: Vec<C64>,
    pub time_tag: f64,
    pub k: f64,
}

impl WaveFunction {
    pub fn new(grid: &Grid, values: Vec<C64>, k: f64) -> Result<Self, FieldError> {
        if values.len() != grid.m() {
            return Err(FieldError::LengthMismatch { expected: grid.m(), got: values.len() });
        }
        Ok(WaveFunction { grid: grid.clone(), values, time_tag: 0.0, k })
    }

    pub fn zeros(grid: &Grid, k: f64) -> Self {
        WaveFunction { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.m()], time_tag: 0.0, k }
    }

    pub fn from_fn(grid: &Grid, k: f64, mut f: impl FnMut(f64) -> C64) -> Self {
        let values = (0..grid.m()).map(|j| f(grid.x(j))).collect();
        WaveFunction { grid: grid.clone(), values, time_tag: 0.0, k }
    }

    pub fn eta(&self) -> f64 {
        1.0 / self.k
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time_tag = t;
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = \int conj(self) other dx`.
    pub fn inner(&self, other: &WaveFunction) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.dx()
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &WaveFunction) -> f64 {
        (self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            * self.grid.dx())
        .sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.l2_norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        self
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &WaveFunction) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Mass `\int_a^b |f|^2` over grid points in `[a, b)`, read modulo `L`.
    pub fn mass_in_region(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let l = self.grid.length();
        if b - a >= l {
            return self.norm_sqr();
        }
        let start = (a + 0.5 * l).rem_euclid(l);
        let width = b - a;
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let off = (*j as f64 * dx - start).rem_euclid(l);
                off < width
            })
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn to_spectrum(&self) -> Spectrum {
        let mut c = self.values.clone();
        self.grid.fft(&mut c);
        let s = self.grid.dx() / (2.0 * PI).sqrt();
        for (i, v) in c.iter_mut().enumerate() {
            // e^{-i xi_m x_0} with x_0 = -L/2 is (-1)^m.
            let sign = if self.grid.mode(i).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            *v *= s * sign;
        }
        Spectrum { grid: self.grid.clone(), coeffs: c }
    }

    pub fn from_spectrum(spec: &Spectrum, k: f64) -> WaveFunction {
        let grid = &spec.grid;
        let s = (2.0 * PI).sqrt() / grid.dx();
        let mut c: Vec<C64> = spec
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let sign = if grid.mode(i).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                v * (s * sign)
            })
            .collect();
        grid.ifft(&mut c);
        WaveFunction { grid: grid.clone(), values: c, time_tag: 0.0, k }
    }

    /// Fourier projection onto the frequency set `e`.
    pub fn project_band(&self, e: &FrequencySet) -> WaveFunction {
        let mut c = self.values.clone();
        self.grid.fft(&mut c);
        for (i, v) in c.iter_mut().enumerate() {
            if !e.contains(self.grid.xi(i)) {
                *v = C64::new(0.0, 0.0);
            }
        }
        self.grid.ifft(&mut c);
        WaveFunction { grid: self.grid.clone(), values: c, time_tag: self.time_tag, k: self.k }
    }

    /// Evaluate the trigonometric interpolant at arbitrary `x` (O(M)).
    pub fn eval_at(&self, x: f64) -> C64 {
        let spec = self.to_spectrum();
        let s = (2.0 * PI).sqrt() / self.grid.length();
        spec.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * C64::from_polar(1.0, self.grid.xi(i) * x))
            .sum::<C64>()
            * s
    }

    /// Samples on a grid refined by `factor` (spectral zero padding).
    pub fn upsample(&self, factor: usize) -> Vec<C64> {
        let m = self.grid.m();
        let mut c = self.values.clone();
        self.grid.fft(&mut c);
        let big = m * factor;
        let mut padded = vec![C64::new(0.0, 0.0); big];
        for i in 0..m {
            let mode = self.grid.mode(i);
            padded[mode.rem_euclid(big as i64) as usize] = c[i];
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(big).process(&mut padded);
        let s = 1.0 / m as f64;
        // The fine grid starts at -L/2 as well; mode m picks up the phase
        // e^{i xi_m (-L/2)} on both grids, so no correction is needed.
        for v in &mut padded {
            *v *= s;
        }
        padded
    }
}

/// Spectrum in FFT slot order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<C64>,
}

impl Spectrum {
    pub fn mode_measure(&self) -> f64 {
        1.0 / self.grid.t()
    }

    pub fn at_mode(&self, mode: i64) -> C64 {
        self.grid.slot(mode).map(|i| self.coeffs[i]).unwrap_or(C64::new(0.0, 0.0))
    }

    /// `sum_m |f^_m|^2 / T`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.mode_measure()
    }
}

/// Finite union of closed frequency intervals, or its complement.
#[derive(Clone, Debug, Default)]
pub struct FrequencySet {
    pub intervals: Vec<(f64, f64)>,
    pub complement: bool,
}

impl FrequencySet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        FrequencySet { intervals, complement: false }
    }

    /// `{ |xi| > delta }`.
    pub fn above(delta: f64) -> Self {
        FrequencySet { intervals: vec![(-delta, delta)], complement: true }
    }

    pub fn complement(&self) -> Self {
        FrequencySet { intervals: self.intervals.clone(), complement: !self.complement }
    }

    pub fn contains(&self, xi: f64) -> bool {
        let inside = self.intervals.iter().any(|&(a, b)| xi >= a && xi <= b);
        inside != self.complement
    }
}

/// Header of an RWAV snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub m: u64,
    pub t: f64,
    pub k: f64,
    pub time_tag: f64,
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"RWAV";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(w: &mut W, f: &WaveFunction) -> Result<(), FieldError> {
    let mut buf = Vec::with_capacity(40 + 16 * f.values.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(f.grid.m() as u64).to_le_bytes());
    buf.extend_from_slice(&f.grid.t().to_le_bytes());
    buf.extend_from_slice(&f.k.to_le_bytes());
    buf.extend_from_slice(&f.time_tag.to_le_bytes());
    for v in &f.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<WaveFunction, FieldError> {
    let mut head = [0u8; 40];
    r.read_exact(&mut head).map_err(|_| FieldError::Snapshot("truncated header".into()))?;
    if &head[0..4] != SNAPSHOT_MAGIC {
        return Err(FieldError::Snapshot("bad magic".into()));
    }
    let word = |a: usize| -> [u8; 8] { head[a..a + 8].try_into().unwrap() };
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(FieldError::Snapshot(format!("unsupported version {version}")));
    }
    let m = u64::from_le_bytes(word(8)) as usize;
    let t = f64::from_le_bytes(word(16));
    let k = f64::from_le_bytes(word(24));
    let time_tag = f64::from_le_bytes(word(32));
    let grid = Grid::new(t, m)?;
    let mut body = vec![0u8; 16 * m];
    r.read_exact(&mut body).map_err(|_| FieldError::Snapshot("truncated body".into()))?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok(WaveFunction { grid, values, time_tag, k })
}

/// Parse only the header of a snapshot.
pub fn snapshot_header(bytes: &[u8]) -> Result<SnapshotHeader, FieldError> {
    if bytes.len() < 40 || &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(FieldError::Snapshot("bad header".into()));
    }
    let word = |a: usize| -> [u8; 8] { bytes[a..a + 8].try_into().unwrap() };
    Ok(SnapshotHeader {
        version: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        m: u64::from_le_bytes(word(8)),
        t: f64::from_le_bytes(word(16)),
        k: f64::from_le_bytes(word(24)),
        time_tag: f64::from_le_bytes(word(32)),
    })
}

pub fn save_snapshot(path: &Path, f: &WaveFunction) -> Result<(), FieldError> {
    let mut buf = Vec::new();
    write_snapshot(&mut buf, f)?;
    crate::output::atomic_write(path, &buf)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<WaveFunction, FieldError> {
    let mut file = std::fs::File::open(path)?;
    read_snapshot(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(grid: &Grid, seed: u64) -> WaveFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.m()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        WaveFunction::new(grid, v, 2.0).unwrap()
    }

    #[test]
    fn grid_arithmetic() {
        let g = Grid::new(64.0, 1024).unwrap();
        assert!((g.dx() - 128.0 * PI / 1024.0).abs() < 1e-15);
        assert!((g.dx() * 1024.0 - 2.0 * PI * 64.0).abs() < 1e-12);
        assert_eq!(g.kappa(), 8.0);
        let g1 = Grid::new(1.0, 8).unwrap();
        let mut modes: Vec<f64> = g1.xis();
        modes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(modes, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(Grid::new(64.0, 7), Err(FieldError::BadSize(7))));
        assert!(matches!(Grid::new(64.0, 4), Err(FieldError::BadSize(4))));
        assert!(matches!(Grid::new(0.0, 64), Err(FieldError::BadHorizon(_))));
        assert_eq!(Grid::default_size(64.0), 1024);
        assert_eq!(Grid::default_size(100.0), 2048);
    }

    #[test]
    fn pure_mode_has_single_line_spectrum() {
        let g = Grid::new(64.0, 256).unwrap();
        let xi3 = 3.0 / g.t();
        let f = WaveFunction::from_fn(&g, 2.0, |x| C64::from_polar(1.0, xi3 * x));
        let s = f.to_spectrum();
        for i in 0..g.m() {
            let v = s.coeffs[i].norm();
            if g.mode(i) == 3 {
                assert!(v > 1.0);
            } else {
                assert!(v < 1e-10, "mode {} = {v}", g.mode(i));
            }
        }
        // value matches the unitary transform of a plane wave over the torus
        let expected = g.length() / (2.0 * PI).sqrt();
        assert!((s.at_mode(3) - C64::new(expected, 0.0)).norm() < 1e-9 * expected);
        let z = WaveFunction::zeros(&g, 2.0).to_spectrum();
        assert!(z.coeffs.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = Grid::new(64.0, 1024).unwrap();
        for seed in 0..20 {
            let f = random_wave(&g, seed);
            let s = f.to_spectrum();
            let back = WaveFunction::from_spectrum(&s, f.k);
            assert!(back.distance(&f) <= 1e-12 * f.l2_norm());
            assert!((s.energy() - f.norm_sqr()).abs() <= 1e-12 * f.norm_sqr());
        }
    }

    #[test]
    fn projection_properties() {
        let g = Grid::new(16.0, 256).unwrap();
        let xi3 = 3.0 / g.t();
        let f = WaveFunction::from_fn(&g, 2.0, |x| C64::from_polar(1.0, xi3 * x));
        let keep = FrequencySet::new(vec![(2.5 / g.t(), 3.5 / g.t())]);
        assert!(f.project_band(&keep).distance(&f) < 1e-12);
        let drop = FrequencySet::new(vec![(3.5 / g.t(), 10.0)]);
        assert!(f.project_band(&drop).l2_norm() < 1e-12);

        let r = random_wave(&g, 7);
        let e = FrequencySet::new(vec![(-0.3, 0.1), (0.7, 2.0)]);
        let a = r.project_band(&e);
        let b = r.project_band(&e.complement());
        let mut sum = a.clone();
        sum.axpy(C64::new(1.0, 0.0), &b);
        assert!(sum.distance(&r) <= 1e-12 * r.l2_norm());
        assert!(a.project_band(&e).distance(&a) <= 1e-12 * r.l2_norm());
        assert!(a.l2_norm() <= r.l2_norm());
        // self-adjoint: <Pa, b> = <a, Pb>
        let s = random_wave(&g, 8);
        let lhs = r.project_band(&e).inner(&s);
        let rhs = r.inner(&s.project_band(&e));
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn norms_and_regions() {
        let g = Grid::new(64.0, 512).unwrap();
        let c = 1.0 / g.length().sqrt();
        let f = WaveFunction::from_fn(&g, 2.0, |_| C64::new(c, 0.0));
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(f.mass_in_region(1.0, 1.0), 0.0);
        assert!(f.mass_in_region(-10.0, 50.0) <= f.norm_sqr());
        // smooth bump occupying the right half of the domain
        let l = g.length();
        let half = WaveFunction::from_fn(&g, 2.0, |x| {
            let u = x / (0.5 * l);
            if u > 0.0 && u < 1.0 {
                C64::new((PI * u).sin().powi(4), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let frac = half.mass_in_region(0.0, 0.5 * l) / half.norm_sqr();
        assert!((frac - 1.0).abs() < 1e-12);
        // closed form: \int_0^{L/2} sin^8(pi x/(L/2)) dx = (L/2)*35/128
        assert!((half.norm_sqr() - 0.5 * l * 35.0 / 128.0).abs() < 1e-10);
        // wrap-around interval covering the same set
        let wrapped = half.mass_in_region(l, 1.5 * l);
        assert!((wrapped - half.norm_sqr()).abs() < 1e-12, "{wrapped} vs {}", half.norm_sqr());
        assert_eq!(WaveFunction::zeros(&g, 2.0).l2_norm(), 0.0);
    }

    #[test]
    fn upsample_and_point_evaluation_agree() {
        let g = Grid::new(8.0, 64).unwrap();
        let f = WaveFunction::from_fn(&g, 2.0, |x| C64::new((0.5 * x).cos(), (x / 8.0).sin()));
        let fine = f.upsample(4);
        for j in [0usize, 3, 17, 101, 255] {
            let x = -0.5 * g.length() + j as f64 * g.dx() / 4.0;
            assert!((fine[j] - f.eval_at(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(4.0, 16).unwrap();
        let f = random_wave(&g, 1).with_time(3.25);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 40 + 16 * 16);
        assert_eq!(&buf[0..4], b"RWAV");
        let h = snapshot_header(&buf).unwrap();
        assert_eq!(h, SnapshotHeader { version: 1, m: 16, t: 4.0, k: 2.0, time_tag: 3.25 });
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.time_tag, 3.25);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
        assert!(read_snapshot(&mut &buf[..50]).is_err());
    }
}
