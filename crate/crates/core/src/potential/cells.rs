//! Characteristic-cube windowing, sparsification and the frequency split.
//!
//! Cubes have side `s = 2 pi kappa`. Cell `(p, q)` holds
//! `V(x + s p, t + s q) phi(x/s) phi(t/s)` sampled on a square lattice of
//! spacing `h = s / n_cube`, so neighbouring patches share lattice points and
//! the resummation can be checked pointwise.
//!
//! Spectra use the unitary 2D transform
//! `V^(xi) = (2 pi)^-1 \int V(x, t) e^{-i (x xi1 + t xi2)} dx dt`, evaluated on a
//! zero-padded periodic box. The lattice split multiplies by
//! `phi^(kappa xi - n)` on that box, so the pieces sum back to the cell exactly.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{PotentialError, SpaceTimePotential};
use crate::field::C64;
use crate::output::{Cell, Table};
use crate::smooth::{cell_cutter, lattice_bump, MollifiedIndicator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellOptions {
    /// Target lattice spacing in both `x` and `t`.
    pub spacing: f64,
    /// Zero padding of the spectral box relative to the patch.
    pub pad_factor: usize,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions { spacing: 0.75, pad_factor: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct CellPatch {
    pub p: i64,
    pub q: i64,
    /// Row-major `[it][ix]`, side `n_cube + 2 n_pad + 1`.
    pub samples: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct CellDecomposition {
    pub kappa: f64,
    pub t: f64,
    pub gamma: f64,
    pub annulus: Option<(f64, f64)>,
    pub h: f64,
    pub n_cube: usize,
    pub n_pad: usize,
    pub n_box: usize,
    /// Sparsification period and retained class, `(1, (0, 0))` when unsparsified.
    pub period: u64,
    pub class: (u64, u64),
    pub cells: Vec<CellPatch>,
    domain: (f64, f64),
}

fn cutter() -> MollifiedIndicator {
    cell_cutter()
}

/// In-place 2D FFT of an `n x n` row-major array.
pub(crate) fn fft2(data: &mut [C64], n: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let f = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
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
    if inverse {
        let s = 1.0 / (n * n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

fn signed(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Window `v` into characteristic cubes.
pub fn window_cells(v: &SpaceTimePotential, opts: CellOptions) -> Result<CellDecomposition, PotentialError> {
    let grid = &v.grid;
    let kappa = grid.kappa();
    let limit = kappa / 8.0;
    if opts.spacing > limit {
        return Err(PotentialError::TimeSampling { dt: opts.spacing, limit });
    }
    if opts.pad_factor < 1 {
        return Err(PotentialError::Parameter { name: "pad_factor", value: 0.0, why: "must be at least 1" });
    }
    let s = 2.0 * PI * kappa;
    let n_cube = (s / opts.spacing).ceil() as usize;
    let h = s / n_cube as f64;
    let n_pad = (0.05 * n_cube as f64).ceil() as usize + 1;
    let side = n_cube + 2 * n_pad + 1;
    let n_box = (side * opts.pad_factor).next_power_of_two();
    let half = 0.5 * grid.length();
    let ((x0, x1), (t0, t1)) = v.field.support_box().unwrap_or(((-half, half), (0.0, 2.0 * half)));
    let mut idx = Vec::new();
    if x1 > x0 || t1 > t0 {
        for q in (t0 / s - 1.05).floor() as i64..=(t1 / s + 0.05).floor() as i64 {
            for p in (x0 / s - 1.05).floor() as i64..=(x1 / s + 0.05).floor() as i64 {
                idx.push((p, q));
            }
        }
    }
    let phi = cutter();
    let weights: Vec<f64> = (0..side).map(|i| phi.eval((i as f64 - n_pad as f64) / n_cube as f64)).collect();
    let mut cells: Vec<CellPatch> = idx
        .par_iter()
        .filter_map(|&(p, q)| {
            let mut samples = vec![C64::new(0.0, 0.0); side * side];
            let mut any = false;
            for it in 0..side {
                let wt = weights[it];
                if wt == 0.0 {
                    continue;
                }
                let t = s * q as f64 + (it as f64 - n_pad as f64) * h;
                for ix in 0..side {
                    let w = wt * weights[ix];
                    if w == 0.0 {
                        continue;
                    }
                    let x = s * p as f64 + (ix as f64 - n_pad as f64) * h;
                    let val = v.value(x, t) * w;
                    any |= val.re != 0.0 || val.im != 0.0;
                    samples[it * side + ix] = val;
                }
            }
            any.then_some(CellPatch { p, q, samples })
        })
        .collect();
    cells.sort_by_key(|c| (c.q, c.p));
    Ok(CellDecomposition {
        kappa,
        t: grid.t(),
        gamma: v.gamma,
        annulus: v.annulus,
        h,
        n_cube,
        n_pad,
        n_box,
        period: 1,
        class: (0, 0),
        cells,
        domain: (half, 2.0 * half),
    })
}

impl CellDecomposition {
    pub fn side(&self) -> usize {
        self.n_cube + 2 * self.n_pad + 1
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, p: i64, q: i64) -> Option<&CellPatch> {
        self.cells.iter().find(|c| c.p == p && c.q == q)
    }

    /// Cells with `p = alpha`, `q = beta (mod period)`.
    pub fn sparsify(&self, period: u64, alpha: u64, beta: u64) -> Result<CellDecomposition, PotentialError> {
        if period == 0 {
            return Err(PotentialError::Parameter { name: "P", value: 0.0, why: "period must be positive" });
        }
        if alpha >= period || beta >= period {
            return Err(PotentialError::Parameter {
                name: "class",
                value: alpha.max(beta) as f64,
                why: "residue must lie in 0..P",
            });
        }
        let mut out = self.clone();
        let pm = period as i64;
        out.cells.retain(|c| c.p.rem_euclid(pm) == alpha as i64 && c.q.rem_euclid(pm) == beta as i64);
        out.period = period;
        out.class = (alpha, beta);
        Ok(out)
    }

    /// Physical coordinates of global lattice point `(ix, it)`.
    pub fn point(&self, ix: i64, it: i64) -> (f64, f64) {
        (ix as f64 * self.h, it as f64 * self.h)
    }

    /// `sum_{p,q} V_{p,q}(x - s p, t - s q)` on the global lattice.
    pub fn resum(&self) -> HashMap<(i64, i64), C64> {
        let side = self.side() as i64;
        let nc = self.n_cube as i64;
        let np = self.n_pad as i64;
        let mut acc: HashMap<(i64, i64), C64> = HashMap::new();
        for c in &self.cells {
            for it in 0..side {
                for ix in 0..side {
                    let v = c.samples[(it * side + ix) as usize];
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    *acc.entry((c.p * nc + ix - np, c.q * nc + it - np)).or_default() += v;
                }
            }
        }
        acc
    }

    /// Max over lattice points in the fundamental domain of
    /// `|resum - V| / max |V|`.
    pub fn reconstruction_error(&self, v: &SpaceTimePotential) -> f64 {
        let acc = self.resum();
        let (half, tmax) = self.domain;
        let (mut err, mut vmax): (f64, f64) = (0.0, 0.0);
        for (&(ix, it), &r) in &acc {
            let (x, t) = self.point(ix, it);
            if x < -half || x >= half || t < 0.0 || t > tmax {
                continue;
            }
            let exact = v.value(x, t);
            err = err.max((r - exact).norm());
            vmax = vmax.max(exact.norm());
        }
        if vmax == 0.0 {
            err
        } else {
            err / vmax
        }
    }

    /// Box spacing in frequency.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / (self.n_box as f64 * self.h)
    }

    /// Raw (unscaled) 2D DFT of cell `i` on the padded box.
    fn box_fft(&self, i: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
        let n = self.n_box;
        let side = self.side();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        let np = self.n_pad as i64;
        for it in 0..side {
            let bt = (it as i64 - np).rem_euclid(n as i64) as usize;
            for ix in 0..side {
                let bx = (ix as i64 - np).rem_euclid(n as i64) as usize;
                data[bt * n + bx] = self.cells[i].samples[it * side + ix];
            }
        }
        fft2(&mut data, n, false, planner);
        data
    }

    /// Factor turning the raw DFT into the unitary transform.
    fn spectral_scale(&self) -> f64 {
        self.h * self.h / (2.0 * PI)
    }

    /// `|V^_{p,q}(xi)|` on the box, row-major `[xi2][xi1]`, with the mode
    /// frequencies `(2 pi j / (n_box h))`.
    pub fn cell_spectrum(&self, i: usize) -> Vec<f64> {
        let mut planner = FftPlanner::new();
        let sc = self.spectral_scale();
        self.box_fft(i, &mut planner).iter().map(|v| v.norm() * sc).collect()
    }

    /// Largest, over cells, fraction of spectral mass outside
    /// `rho1 - eps < |xi| < rho2 + eps`: `(L^2 fraction, L^infinity fraction)`.
    pub fn annulus_tail(&self, eps: f64) -> Option<(f64, f64)> {
        let (r1, r2) = self.annulus?;
        let n = self.n_box;
        let dxi = self.dxi();
        let worst = (0..self.cells.len())
            .into_par_iter()
            .map(|i| {
                let spec = self.cell_spectrum(i);
                let (mut out2, mut tot2, mut outi, mut toti): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
                for j2 in 0..n {
                    let x2 = signed(j2, n) as f64 * dxi;
                    for j1 in 0..n {
                        let x1 = signed(j1, n) as f64 * dxi;
                        let a = spec[j2 * n + j1];
                        let r = (x1 * x1 + x2 * x2).sqrt();
                        tot2 += a * a;
                        toti = toti.max(a);
                        if r <= r1 - eps || r >= r2 + eps {
                            out2 += a * a;
                            outi = outi.max(a);
                        }
                    }
                }
                if tot2 == 0.0 {
                    (0.0, 0.0)
                } else {
                    (out2 / tot2, outi / toti)
                }
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        Some(worst)
    }

    /// Nonzero lattice weights `phi^(kappa xi - n)` along one axis of the box.
    fn axis_weights(&self) -> Vec<Vec<(i64, f64)>> {
        let bump = lattice_bump();
        let n = self.n_box;
        let dxi = self.dxi();
        (0..n)
            .map(|j| {
                let u = self.kappa * signed(j, n) as f64 * dxi;
                ((u - 1.0).ceil() as i64..=(u + 1.0).floor() as i64)
                    .map(|m| (m, bump.eval(u - m as f64)))
                    .filter(|&(_, w)| w > 0.0)
                    .collect()
            })
            .collect()
    }

    /// Split every cell over the `1/kappa` frequency lattice with threshold
    /// `T^{1 - gamma - lambda}`.
    pub fn frequency_split(&self, lambda: f64) -> Result<FrequencySplit, PotentialError> {
        if !(lambda > 0.0 && lambda < 0.5) {
            return Err(PotentialError::Parameter { name: "lambda", value: lambda, why: "need 0 < lambda < 1/2" });
        }
        let threshold = self.t.powf(1.0 - self.gamma - lambda);
        let weights = self.axis_weights();
        let n = self.n_box;
        let sc = self.spectral_scale();
        let cells: Vec<CellSplit> = (0..self.cells.len())
            .into_par_iter()
            .map(|i| {
                let mut planner = FftPlanner::new();
                let raw = self.box_fft(i, &mut planner);
                let mut norms: HashMap<[i64; 2], f64> = HashMap::new();
                let mut l2 = 0.0;
                for j2 in 0..n {
                    for j1 in 0..n {
                        let a = raw[j2 * n + j1].norm() * sc;
                        l2 += a * a;
                        if a == 0.0 {
                            continue;
                        }
                        for &(m2, w2) in &weights[j2] {
                            for &(m1, w1) in &weights[j1] {
                                let e = norms.entry([m1, m2]).or_insert(0.0);
                                *e = e.max(a * w1 * w2);
                            }
                        }
                    }
                }
                let mut norms: Vec<([i64; 2], f64)> = norms.into_iter().collect();
                norms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let omega: Vec<([i64; 2], f64)> = norms.iter().cloned().filter(|x| x.1 > threshold).collect();
                // |V^_low| = |V^| |1 - sum_{n in Omega} phi^_n|
                let mut low_sup: f64 = 0.0;
                for j2 in 0..n {
                    for j1 in 0..n {
                        let a = raw[j2 * n + j1].norm() * sc;
                        if a == 0.0 {
                            continue;
                        }
                        let mut cover = 0.0;
                        for &(m2, w2) in &weights[j2] {
                            for &(m1, w1) in &weights[j1] {
                                if omega.iter().any(|o| o.0 == [m1, m2]) {
                                    cover += w1 * w2;
                                }
                            }
                        }
                        low_sup = low_sup.max(a * (1.0 - cover).abs());
                    }
                }
                let c = &self.cells[i];
                CellSplit {
                    p: c.p,
                    q: c.q,
                    omega,
                    norms,
                    low_sup,
                    l2_sqr: l2 * self.dxi() * self.dxi(),
                }
            })
            .collect();
        let k_max = cells.iter().map(|c| c.omega.len()).max().unwrap_or(0);
        Ok(FrequencySplit { lambda, threshold, kappa: self.kappa, t: self.t, k_max, cells })
    }
}

#[derive(Clone, Debug)]
pub struct CellSplit {
    pub p: i64,
    pub q: i64,
    /// Retained lattice points, by descending norm then lexicographically.
    pub omega: Vec<([i64; 2], f64)>,
    /// `||V^_{p,q,n}||_inf` for every lattice point touched by the spectrum.
    pub norms: Vec<([i64; 2], f64)>,
    pub low_sup: f64,
    /// `||V_{p,q}||_2^2` by Parseval on the box.
    pub l2_sqr: f64,
}

impl CellSplit {
    pub fn norm_sum_sqr(&self) -> f64 {
        self.norms.iter().map(|x| x.1 * x.1).sum()
    }
}

#[derive(Clone, Debug)]
pub struct FrequencySplit {
    pub lambda: f64,
    pub threshold: f64,
    pub kappa: f64,
    pub t: f64,
    /// `K = max |Omega(p, q, lambda)|`.
    pub k_max: usize,
    pub cells: Vec<CellSplit>,
}

impl FrequencySplit {
    /// Fitted `C` in `|Omega| <= C T^{2 lambda}`.
    pub fn omega_constant(&self) -> f64 {
        self.k_max as f64 / self.t.powf(2.0 * self.lambda)
    }

    /// Piece `V^(s)_{p,q}` (1-based `s`) of cell `i`, on the padded box.
    pub fn piece(&self, dec: &CellDecomposition, i: usize, s: usize) -> Vec<C64> {
        let n = dec.n_box;
        let Some(&(target, _)) = self.cells[i].omega.get(s.wrapping_sub(1)) else {
            return vec![C64::new(0.0, 0.0); n * n];
        };
        let weights = dec.axis_weights();
        let mut planner = FftPlanner::new();
        let mut raw = dec.box_fft(i, &mut planner);
        for j2 in 0..n {
            let w2 = weights[j2].iter().find(|w| w.0 == target[1]).map(|w| w.1).unwrap_or(0.0);
            for j1 in 0..n {
                let w1 = weights[j1].iter().find(|w| w.0 == target[0]).map(|w| w.1).unwrap_or(0.0);
                raw[j2 * n + j1] *= w1 * w2;
            }
        }
        fft2(&mut raw, n, true, &mut planner);
        raw
    }

    /// Cell `i` on the padded box.
    pub fn cell_on_box(&self, dec: &CellDecomposition, i: usize) -> Vec<C64> {
        let mut planner = FftPlanner::new();
        let mut raw = dec.box_fft(i, &mut planner);
        fft2(&mut raw, dec.n_box, true, &mut planner);
        raw
    }

    /// `V_{p,q} - sum_s V^(s)_{p,q}`.
    pub fn low(&self, dec: &CellDecomposition, i: usize) -> Vec<C64> {
        let mut out = self.cell_on_box(dec, i);
        for s in 1..=self.cells[i].omega.len() {
            for (o, v) in out.iter_mut().zip(self.piece(dec, i, s)) {
                *o -= v;
            }
        }
        out
    }

    /// CSV `p, q, n1, n2, abs_coeff`; entries below `1e-6` of the cell maximum are dropped.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["p", "q", "n1", "n2", "abs_coeff"]);
        for c in &self.cells {
            let top = c.norms.first().map(|x| x.1).unwrap_or(0.0);
            for (nv, a) in &c.norms {
                if *a >= 1e-6 * top && *a > 0.0 {
                    t.push(vec![Cell::Int(c.p), Cell::Int(c.q), Cell::Int(nv[0]), Cell::Int(nv[1]), (*a).into()]);
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::potential::{self, bump_index_window, Bump};

    fn lattice_grid() -> Grid {
        Grid::new(2.0 * PI * 32.0, 4096).unwrap()
    }

    #[test]
    fn zero_potential_has_no_cells() {
        let g = lattice_grid();
        let d = window_cells(&potential::zero(&g), CellOptions::default()).unwrap();
        assert!(d.is_empty());
        let split = d.frequency_split(0.3).unwrap();
        assert_eq!(split.k_max, 0);
    }

    #[test]
    fn coarse_sampling_rejected() {
        let g = Grid::new(64.0, 1024).unwrap();
        let opts = CellOptions { spacing: 2.0, pad_factor: 2 };
        assert!(matches!(window_cells(&potential::zero(&g), opts), Err(PotentialError::TimeSampling { .. })));
    }

    #[test]
    fn constant_potential_gives_cutter_patches() {
        let g = Grid::new(64.0, 1024).unwrap();
        let v = potential::from_fn(&g, 0.0, true, |_, _| C64::new(0.25, 0.0));
        let d = window_cells(&v, CellOptions::default()).unwrap();
        let phi = cell_cutter();
        let side = d.side();
        let c = &d.cells[d.len() / 2];
        for it in (0..side).step_by(7) {
            for ix in (0..side).step_by(5) {
                let u = (ix as f64 - d.n_pad as f64) / d.n_cube as f64;
                let w = (it as f64 - d.n_pad as f64) / d.n_cube as f64;
                let expect = 0.25 * phi.eval(u) * phi.eval(w);
                assert!((c.samples[it * side + ix].re - expect).abs() < 1e-15);
            }
        }
        assert!(d.reconstruction_error(&v) < 1e-12);
    }

    #[test]
    fn bump_lattice_resums() {
        let g = lattice_grid();
        for seed in 0..3 {
            let v = potential::random_bump_lattice(&g, 0.9, seed);
            let d = window_cells(&v, CellOptions::default()).unwrap();
            assert!(!d.is_empty());
            assert!(d.reconstruction_error(&v) < 1e-10);
        }
    }

    #[test]
    fn sparsify_partitions_cells() {
        let g = Grid::new(64.0, 1024).unwrap();
        let v = potential::cosine_with_amplitude(&g, 0.1, true).unwrap();
        let d = window_cells(&v, CellOptions::default()).unwrap();
        assert_eq!(d.sparsify(1, 0, 0).unwrap().len(), d.len());
        let p = 3;
        let mut total = 0;
        for a in 0..p {
            for b in 0..p {
                let part = d.sparsify(p, a, b).unwrap();
                total += part.len();
                for c in &part.cells {
                    for o in &part.cells {
                        if (c.p, c.q) != (o.p, o.q) {
                            let gap = ((c.p - o.p).abs().max((c.q - o.q).abs()) - 1) as f64;
                            assert!(gap >= (p as f64 - 1.0) - 1e-12);
                        }
                    }
                }
            }
        }
        assert_eq!(total, d.len());
        assert!(d.sparsify(3, 3, 0).is_err());
        assert!(d.sparsify(0, 0, 0).is_err());
    }

    #[test]
    fn split_of_pure_frequency_cell() {
        // the bump centre sits on a cube corner, so the retained set is
        // nonempty at lambda = 0.3 only once T^lambda beats the quartering
        let g = Grid::new(2.0 * PI * 128.0, 16384).unwrap();
        let m0 = bump_index_window(g.t()).1[0];
        let v = potential::bump_lattice(&g, 0.9, vec![Bump { n: 0, m: m0, c: 1.0, lambda: 1.0, mu: 0.0 }]).unwrap();
        let d = window_cells(&v, CellOptions::default()).unwrap();
        let lambda = 0.3;
        let split = d.frequency_split(lambda).unwrap();
        let kappa = d.kappa;
        assert!(split.k_max > 0);
        for (i, c) in split.cells.iter().enumerate() {
            // retained lattice points sit near (+-1, 0) in frequency
            for (nv, _) in &c.omega {
                let xi = (nv[0] as f64 / kappa, nv[1] as f64 / kappa);
                let dist = ((xi.0.abs() - 1.0).powi(2) + xi.1 * xi.1).sqrt();
                assert!(dist <= 6.0 / kappa, "{nv:?}");
            }
            assert!(c.low_sup <= 4.0 * split.threshold * (1.0 + 1e-12));
            let lhs = c.omega.len() as f64 * split.threshold.powi(2);
            assert!(lhs <= c.norm_sum_sqr());
            if i == 0 {
                let cell = split.cell_on_box(&d, i);
                let mut sum = split.low(&d, i);
                for s in 1..=c.omega.len() {
                    for (a, b) in sum.iter_mut().zip(split.piece(&d, i, s)) {
                        *a += b;
                    }
                }
                let err = cell.iter().zip(&sum).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err <= 1e-8);
            }
        }
        assert!(split.to_table().rows.len() >= split.k_max);
        assert!(d.frequency_split(0.6).is_err());
    }

    #[test]
    fn annulus_tail_is_reported() {
        let g = lattice_grid();
        let v = potential::random_bump_lattice(&g, 0.9, 2);
        let d = window_cells(&v, CellOptions::default()).unwrap();
        let (l2, linf) = d.annulus_tail(0.25).unwrap();
        assert!(l2 < 1e-2 && linf < 1e-1, "{l2} {linf}");
    }
}
