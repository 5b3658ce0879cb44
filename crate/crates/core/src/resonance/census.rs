//! Brute-force censuses over the integer tube lattice.
//!
//! Every intersection is represented by the centre cube: a tube meets row
//! `q` in the cube holding its centre line at mid-row, so two tubes share at
//! most one cube per row. Such cubes always pass the exact slab test.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    base_for_center, budget_from_env, center_column, default_backward_slopes, defect_numerator, signed_defect,
    ResonanceError, DEFAULT_EPS_PRIME,
};
use crate::output::{Cell, Table};
use crate::packets::{tube_of, CubeRegion, Orientation, Tube, TubeSet};

/// Parameters shared by the censuses.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusParams {
    pub kappa: f64,
    pub delta: f64,
    /// Forward slopes satisfy `|alpha| <= c_forward * delta`.
    pub c_forward: f64,
    /// Backward base indices satisfy `|n| <= c_backward_n * kappa`.
    pub c_backward_n: f64,
    pub c1: f64,
    pub c2: f64,
    pub eps_prime: f64,
    /// Exponent of the gap check `s > kappa^{1 - tau}`.
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    pub budget: u64,
}

impl CensusParams {
    pub fn new(kappa: f64) -> CensusParams {
        let (delta, c_forward) = (0.1, 4.0);
        let (c1, c2) = default_backward_slopes(delta, c_forward);
        CensusParams {
            kappa,
            delta,
            c_forward,
            c_backward_n: 4.0,
            c1,
            c2,
            eps_prime: DEFAULT_EPS_PRIME,
            tau: 0.25,
            samples: 64,
            seed: 0,
            budget: budget_from_env(),
        }
    }

    fn validate(&self, max_kappa: f64) -> Result<(), ResonanceError> {
        let k = self.kappa;
        if !(k >= 8.0 && k <= max_kappa) || k.fract() != 0.0 {
            return Err(ResonanceError::Parameter { name: "kappa", value: k, why: "need an integer in the desk range" });
        }
        if !(self.delta > 0.0 && self.c_forward > 0.0) {
            return Err(ResonanceError::Parameter { name: "delta", value: self.delta, why: "must be positive" });
        }
        if !(self.c1 > 0.0 && self.c2 >= self.c1) {
            return Err(ResonanceError::Parameter { name: "c1", value: self.c1, why: "need 0 < c1 <= c2" });
        }
        if !(self.eps_prime > 0.0 && self.eps_prime < 1.0) {
            return Err(ResonanceError::Parameter { name: "eps_prime", value: self.eps_prime, why: "need 0 < eps' < 1" });
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(ResonanceError::Parameter { name: "tau", value: self.tau, why: "need 0 < tau < 1/2" });
        }
        Ok(())
    }

    pub fn forward_set(&self) -> TubeSet {
        TubeSet::forward(self.kappa, self.delta, self.c_forward)
    }

    pub fn backward_set(&self) -> TubeSet {
        TubeSet::backward(self.kappa, self.c_backward_n, self.c1, self.c2)
    }

    pub fn region(&self) -> CubeRegion {
        CubeRegion::standard(self.kappa)
    }

    /// Resonance threshold on the integer numerator `kappa^2 * defect`.
    fn threshold_num(&self) -> f64 {
        self.kappa.powf(self.eps_prime) * self.kappa * self.kappa
    }

    fn check_budget(&self, needed: u64) -> Result<(), ResonanceError> {
        if needed > self.budget {
            return Err(ResonanceError::Budget { needed, budget: self.budget });
        }
        Ok(())
    }
}

/// Draw a forward tube and a row whose centre cube lies in the region, then
/// a backward tube with the same centre cube.
fn draw_pair(par: &CensusParams, rng: &mut ChaCha8Rng) -> Option<(Tube, Tube, i64, i64)> {
    let (fs, bs, region) = (par.forward_set(), par.backward_set(), par.region());
    let rows = region.rows();
    for _ in 0..10_000 {
        let t = tube_of(rng.gen_range(fs.n_min..=fs.n_max), rng.gen_range(fs.ell_min..=fs.ell_max), Orientation::Forward, par.kappa);
        let q = rng.gen_range(rows.clone());
        let p = center_column(&t, q);
        if !region.contains(p, q) {
            continue;
        }
        let lb = rng.gen_range(bs.ell_min..=bs.ell_max);
        let nb = base_for_center(lb, Orientation::Backward, par.kappa, p, q);
        if nb < bs.n_min || nb > bs.n_max {
            continue;
        }
        return Some((t, tube_of(nb, lb, Orientation::Backward, par.kappa), p, q));
    }
    None
}

/// One sampled `(T->, T<-, B)` with its histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusSample {
    pub forward: Tube,
    pub backward: Tube,
    pub cube: (i64, i64),
    /// `-q alpha^2 / alpha<-^2`: the row offset where the resonant partner slope vanishes.
    pub s0: f64,
    /// `#(s)` for every admissible row offset `s = q' - q`.
    pub counts: BTreeMap<i64, usize>,
    pub total: usize,
    /// Resonant partners `(n', ell', p', q')`.
    pub partners: Vec<(i64, i64, i64, i64)>,
    /// Largest number of rows through which a single partner resonates.
    pub max_rows_per_partner: usize,
    /// `min (|alpha'| - |alpha|)` over partners with `s > kappa^{1 - tau}`.
    pub min_gap: Option<f64>,
    /// Offsets at or above the resonance band whose principal partner slope
    /// `((a<-^2 - a^2)(s - s0)/q')^{1/2}` lies in the forward slope range.
    pub admissible: Vec<i64>,
}

/// Census histograms and fitted constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceCensus {
    pub kappa: f64,
    pub eps_prime: f64,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub samples: Vec<CensusSample>,
    /// Mean `#(s)` against `d = s - round(s0)`: `(sum, samples covering d)`.
    pub histogram: BTreeMap<i64, (usize, usize)>,
    pub mean_total: f64,
    /// `max Sigma_s #(s) / kappa` over samples.
    pub total_constant: f64,
    /// Geometric-mean fit of `#(s) / (kappa^{1/2} <s - s0>^{-1/2})` over
    /// admissible offsets, binned by `d`.
    pub envelope_constant: f64,
    /// Worst factor by which a bin at or above `s0` leaves the envelope, either way.
    pub envelope_spread: f64,
    /// `(d, mean #(s), #(s) / envelope)` for every fitted bin.
    pub envelope_profile: Vec<(i64, f64, f64)>,
    /// Largest `ratio / envelope_constant` over bins below `s0`, where the
    /// envelope is only an upper bound.
    pub below_band_excess: f64,
    /// Number of bins entering the envelope fit.
    pub envelope_bins: usize,
    /// Offset `d` of the histogram maximum.
    pub peak_offset: i64,
    /// `max rows per partner / kappa^eps'`.
    pub observation1_constant: f64,
    /// `min (|alpha'| - |alpha|) kappa^tau` over the gap range.
    pub gap_constant: Option<f64>,
}

impl ResonanceCensus {
    /// `<d> = max(|d|, kappa^{0.1})`, the O(R) band being `|d| <= kappa^{0.1}`.
    pub fn bracket(&self, d: f64) -> f64 {
        d.abs().max(self.kappa.powf(0.1))
    }

    pub fn envelope(&self, d: f64) -> f64 {
        self.kappa.sqrt() / self.bracket(d).sqrt()
    }

    pub fn mean_count(&self, d: i64) -> Option<f64> {
        self.histogram.get(&d).filter(|(_, n)| *n > 0).map(|(s, n)| *s as f64 / *n as f64)
    }
}

/// Histograms of globally resonant partners `T'->` for sampled `(T->, T<-, B)`.
pub fn census_counts(par: &CensusParams) -> Result<ResonanceCensus, ResonanceError> {
    par.validate(64.0)?;
    let fs = par.forward_set();
    let region = par.region();
    let rows: Vec<i64> = region.rows().collect();
    let ell_count = (fs.ell_max - fs.ell_min + 1) as u64;
    par.check_budget(par.samples as u64 * rows.len() as u64 * ell_count)?;

    let mut rng = ChaCha8Rng::seed_from_u64(par.seed);
    let mut draws = Vec::with_capacity(par.samples);
    for _ in 0..par.samples {
        match draw_pair(par, &mut rng) {
            Some(d) => draws.push(d),
            None => break,
        }
    }
    let samples: Vec<CensusSample> = draws.par_iter().map(|&(t, b, p, q)| census_sample(par, &rows, t, b, p, q)).collect();
    Ok(summarize(par, samples))
}

fn census_sample(par: &CensusParams, rows: &[i64], t: Tube, b: Tube, p: i64, q: i64) -> CensusSample {
    let fs = par.forward_set();
    let region = par.region();
    let thr = par.threshold_num();
    let (alpha, alpha_b) = (t.alpha(), b.alpha());
    let s0 = -(q as f64) * alpha * alpha / (alpha_b * alpha_b);
    let gap_from = par.kappa.powf(1.0 - par.tau);
    let mut counts = BTreeMap::new();
    let mut partners = Vec::new();
    let mut rows_per: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut min_gap: Option<f64> = None;
    let mut admissible = Vec::new();
    for &q2 in rows {
        let p2 = center_column(&b, q2);
        if !region.contains(p2, q2) {
            continue;
        }
        let mut c = 0;
        for l2 in fs.ell_min..=fs.ell_max {
            let num = defect_numerator(t.ell, l2, b.ell, q, q2);
            if (num.unsigned_abs() as f64) >= thr {
                continue;
            }
            let n2 = base_for_center(l2, Orientation::Forward, par.kappa, p2, q2);
            if n2 < fs.n_min || n2 > fs.n_max {
                continue;
            }
            c += 1;
            partners.push((n2, l2, p2, q2));
            *rows_per.entry((n2, l2)).or_default() += 1;
            let s = (q2 - q) as f64;
            if s > gap_from {
                let g = (l2 as f64 / par.kappa).abs() - alpha.abs();
                min_gap = Some(min_gap.map_or(g, |m: f64| m.min(g)));
            }
        }
        counts.insert(q2 - q, c);
        let s = (q2 - q) as f64;
        let principal = ((alpha_b * alpha_b - alpha * alpha) * (s - s0) / q2 as f64).max(0.0).sqrt();
        if s - s0 >= -par.kappa.powf(0.1) && principal <= fs.ell_max as f64 / par.kappa {
            admissible.push(q2 - q);
        }
    }
    let total = counts.values().sum();
    CensusSample {
        forward: t,
        backward: b,
        cube: (p, q),
        s0,
        counts,
        total,
        partners,
        max_rows_per_partner: rows_per.values().copied().max().unwrap_or(0),
        min_gap,
        admissible,
    }
}

fn summarize(par: &CensusParams, samples: Vec<CensusSample>) -> ResonanceCensus {
    let kappa = par.kappa;
    let mut histogram: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for s in &samples {
        let shift = s.s0.round() as i64;
        for (&off, &c) in &s.counts {
            let e = histogram.entry(off - shift).or_default();
            e.0 += c;
            e.1 += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    let mean_total = samples.iter().map(|s| s.total as f64).sum::<f64>() / n;
    let total_constant = samples.iter().map(|s| s.total as f64 / kappa).fold(0.0, f64::max);
    let obs1 = samples.iter().map(|s| s.max_rows_per_partner).max().unwrap_or(0) as f64 / kappa.powf(par.eps_prime);
    let gap_constant = samples
        .iter()
        .filter_map(|s| s.min_gap)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))))
        .map(|g| g * kappa.powf(par.tau));

    let mut census = ResonanceCensus {
        kappa,
        eps_prime: par.eps_prime,
        delta: par.delta,
        c1: par.c1,
        c2: par.c2,
        samples,
        histogram,
        mean_total,
        total_constant,
        envelope_constant: 0.0,
        envelope_spread: f64::INFINITY,
        envelope_bins: 0,
        below_band_excess: 0.0,
        envelope_profile: Vec::new(),
        peak_offset: 0,
        observation1_constant: obs1,
        gap_constant,
    };
    // Envelope fit: per bin d, the ratio of summed counts to summed
    // envelopes over admissible (sample, s), for bins covered by at least a
    // quarter of the samples.
    let mut bins: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for smp in &census.samples {
        let shift = smp.s0.round() as i64;
        for &off in &smp.admissible {
            let e = bins.entry(off - shift).or_default();
            e.0 += smp.counts[&off] as f64;
            e.1 += census.envelope(off as f64 - smp.s0);
            e.2 += 1;
        }
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (&d, &(sum, cover)) in &census.histogram {
        let m = sum as f64 / cover.max(1) as f64;
        if m > best.0 {
            best = (m, d);
        }
    }
    census.peak_offset = best.1;
    let min_cover = (census.samples.len() / 4).max(1);
    census.envelope_profile = bins
        .iter()
        .filter(|(_, b)| b.2 >= min_cover)
        .map(|(&d, b)| (d, b.0 / b.2 as f64, b.0 / b.1))
        .collect();
    // two-sided at and above s0, upper bound only below it
    let ratios: Vec<f64> = census.envelope_profile.iter().filter(|p| p.0 >= 0 && p.1 > 0.0).map(|p| p.2).collect();
    if !ratios.is_empty() {
        let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
        census.envelope_constant = c;
        census.envelope_spread = ratios.iter().map(|r| (r / c).max(c / r)).fold(1.0, f64::max);
        census.envelope_bins = ratios.len();
        census.below_band_excess = census.envelope_profile.iter().filter(|p| p.0 < 0).map(|p| p.2 / c).fold(0.0, f64::max);
    }
    census
}

/// Rows `s, count, s0, kappa`, one per sample and offset.
pub fn census_table(c: &ResonanceCensus) -> Table {
    let mut t = Table::new(&["s", "count", "s0", "kappa"]);
    for s in &c.samples {
        for (&off, &n) in &s.counts {
            t.push(vec![Cell::Int(off), Cell::from(n), Cell::Float(s.s0), Cell::Float(c.kappa)]);
        }
    }
    t
}

/// Parameters of the no-lattice census.
#[derive(Clone, Debug, PartialEq)]
pub struct NoLatticeParams {
    pub census: CensusParams,
    pub upsilon: f64,
    pub eps: f64,
    /// Constant in `q2 - q1 >= c kappa^{1 - upsilon}` and
    /// `|alpha0 - alpha_j| >= c kappa^{-eps}`.
    pub separation: f64,
    /// Sampled base tubes `T0->`; backward pairs and rows are exhaustive.
    pub base_tubes: usize,
}

impl NoLatticeParams {
    pub fn new(kappa: f64) -> NoLatticeParams {
        let mut census = CensusParams::new(kappa);
        census.samples = 0;
        NoLatticeParams { census, upsilon: 0.125, eps: 0.125, separation: 0.5, base_tubes: 32 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoLatticeReport {
    pub kappa: f64,
    pub max_family: usize,
    /// `kappa^{2 (eps + upsilon)}`.
    pub scale: f64,
    pub fitted_constant: f64,
    /// Largest family when the slope separation is dropped.
    pub control_max: usize,
    pub configurations: usize,
}

/// Largest family of forward tubes resonating with a base tube through two
/// row-separated backward tubes.
pub fn no_lattice_census(par: &NoLatticeParams) -> Result<NoLatticeReport, ResonanceError> {
    let cp = &par.census;
    cp.validate(32.0)?;
    if !(par.upsilon > 0.0 && par.eps > 0.0 && 2.0 * (par.upsilon + par.eps) < 1.0) {
        return Err(ResonanceError::Parameter {
            name: "upsilon",
            value: par.upsilon,
            why: "need positive upsilon, eps with 2 (upsilon + eps) < 1",
        });
    }
    let kappa = cp.kappa;
    let (fs, bs, region) = (cp.forward_set(), cp.backward_set(), cp.region());
    let rows: Vec<i64> = region.rows().collect();
    let min_sep = par.separation * kappa.powf(1.0 - par.upsilon);
    let pairs: Vec<(i64, i64)> = rows
        .iter()
        .flat_map(|&a| rows.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| (b - a) as f64 >= min_sep)
        .collect();
    let scale = kappa.powf(2.0 * (par.eps + par.upsilon));
    let bl = (bs.ell_max - bs.ell_min + 1) as u64;
    let fl = (fs.ell_max - fs.ell_min + 1) as u64;
    cp.check_budget(par.base_tubes as u64 * pairs.len() as u64 * bl * bl * fl * rows.len() as u64 * 2 / 4)?;
    let empty = NoLatticeReport { kappa, max_family: 0, scale, fitted_constant: 0.0, control_max: 0, configurations: 0 };
    if pairs.is_empty() {
        return Ok(empty);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cp.seed);
    let mut bases = Vec::new();
    let mut tries = 0;
    while bases.len() < par.base_tubes && tries < 100_000 {
        tries += 1;
        let t = tube_of(rng.gen_range(fs.n_min..=fs.n_max), rng.gen_range(fs.ell_min..=fs.ell_max), Orientation::Forward, kappa);
        // at least one admissible row pair must keep both centre cubes inside
        if pairs.iter().any(|&(a, b)| region.contains(center_column(&t, a), a) && region.contains(center_column(&t, b), b)) {
            bases.push(t);
        }
    }
    let alpha_sep = par.separation * kappa.powf(-par.eps);
    let thr = cp.threshold_num();

    // Forward tubes resonating with t0 through backward tube b crossing t0 at row q.
    let resonant_set = |t0: &Tube, b: &Tube, q: i64| -> HashSet<(i64, i64)> {
        let mut out = HashSet::new();
        for &r in &rows {
            let p = center_column(b, r);
            if !region.contains(p, r) {
                continue;
            }
            for l in fs.ell_min..=fs.ell_max {
                if (defect_numerator(t0.ell, l, b.ell, q, r).unsigned_abs() as f64) >= thr {
                    continue;
                }
                let n = base_for_center(l, Orientation::Forward, kappa, p, r);
                if n >= fs.n_min && n <= fs.n_max {
                    out.insert((n, l));
                }
            }
        }
        out
    };

    let per_base: Vec<(usize, usize, usize)> = bases
        .par_iter()
        .map(|t0| {
            let (mut best, mut control, mut configs) = (0usize, 0usize, 0usize);
            for &(q1, q2) in &pairs {
                let (p1, p2) = (center_column(t0, q1), center_column(t0, q2));
                if !region.contains(p1, q1) || !region.contains(p2, q2) {
                    continue;
                }
                let through = |p: i64, q: i64| -> Vec<Tube> {
                    (bs.ell_min..=bs.ell_max)
                        .filter_map(|l| {
                            let n = base_for_center(l, Orientation::Backward, kappa, p, q);
                            (n >= bs.n_min && n <= bs.n_max).then(|| tube_of(n, l, Orientation::Backward, kappa))
                        })
                        .collect()
                };
                let b1s = through(p1, q1);
                let b2s = through(p2, q2);
                let sets2: Vec<HashSet<(i64, i64)>> = b2s.iter().map(|b2| resonant_set(t0, b2, q2)).collect();
                for b1 in &b1s {
                    let s1 = resonant_set(t0, b1, q1);
                    for s2 in &sets2 {
                        configs += 1;
                        let mut all = 0;
                        let mut sep = 0;
                        for key in s1.intersection(s2) {
                            if *key == (t0.n, t0.ell) {
                                continue;
                            }
                            all += 1;
                            if ((key.1 - t0.ell) as f64 / kappa).abs() >= alpha_sep {
                                sep += 1;
                            }
                        }
                        best = best.max(sep);
                        control = control.max(all);
                    }
                }
            }
            (best, control, configs)
        })
        .collect();
    let max_family = per_base.iter().map(|x| x.0).max().unwrap_or(0);
    let control_max = per_base.iter().map(|x| x.1).max().unwrap_or(0);
    let configurations = per_base.iter().map(|x| x.2).sum();
    Ok(NoLatticeReport { kappa, max_family, scale, fitted_constant: max_family as f64 / scale, control_max, configurations })
}

/// Backward tubes of `set` whose centre cubes include both `B` and `B'`
/// and which make `(T->, T'->)` resonate.
pub fn pair_resonance_count(
    forward: &Tube,
    forward2: &Tube,
    cube: (i64, i64),
    cube2: (i64, i64),
    set: &TubeSet,
    eps_prime: f64,
) -> Result<usize, ResonanceError> {
    if !forward.meets_cube(cube.0, cube.1) {
        return Err(ResonanceError::NotIncident { n: forward.n, ell: forward.ell, p: cube.0, q: cube.1 });
    }
    let thr = forward.kappa.powf(eps_prime);
    let mut count = 0;
    for lb in set.ell_min..=set.ell_max {
        let ab = lb as f64 / set.kappa;
        if signed_defect(forward.alpha(), forward2.alpha(), ab, cube.1, cube2.1).abs() >= thr {
            continue;
        }
        let n = base_for_center(lb, set.orientation, set.kappa, cube.0, cube.1);
        if n < set.n_min || n > set.n_max {
            continue;
        }
        if center_column(&tube_of(n, lb, set.orientation, set.kappa), cube2.1) == cube2.0 {
            count += 1;
        }
    }
    Ok(count)
}

/// Fitted constants of `count <= C T / (dist(B, B') + kappa)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub kappa: f64,
    /// Max over all sampled pairs.
    pub fitted_constant: f64,
    /// Max count with `B' = B`, divided by `kappa`.
    pub same_cube_constant: f64,
    /// Max count over pairs at least `kappa/2` cube units apart.
    pub far_max: usize,
    pub pairs: usize,
}

/// Pair counts over sampled `(T->, B)` against every forward partner and
/// every partner centre cube.
pub fn pair_census(par: &CensusParams) -> Result<PairReport, ResonanceError> {
    par.validate(64.0)?;
    let (fs, bs, region) = (par.forward_set(), par.backward_set(), par.region());
    let kappa = par.kappa;
    let rows: Vec<i64> = region.rows().collect();
    let bl = (bs.ell_max - bs.ell_min + 1) as u64;
    par.check_budget(par.samples as u64 * fs.len() as u64 * rows.len() as u64 * bl)?;
    let mut rng = ChaCha8Rng::seed_from_u64(par.seed ^ 0x9e37_79b9);
    let mut draws = Vec::new();
    let mut tries = 0;
    while draws.len() < par.samples && tries < 100_000 {
        tries += 1;
        let t = tube_of(rng.gen_range(fs.n_min..=fs.n_max), rng.gen_range(fs.ell_min..=fs.ell_max), Orientation::Forward, kappa);
        let q = rng.gen_range(region.rows());
        let p = center_column(&t, q);
        if region.contains(p, q) {
            draws.push((t, (p, q)));
        }
    }
    let tt = kappa * kappa;
    let unit = 2.0 * std::f64::consts::PI * kappa;
    let parts: Vec<(f64, f64, usize, usize)> = draws
        .par_iter()
        .map(|(t, cube)| {
            let (mut fit, mut same, mut far, mut pairs) = (0.0f64, 0.0f64, 0usize, 0usize);
            for t2 in fs.tubes() {
                for &q2 in &rows {
                    let p2 = center_column(&t2, q2);
                    if !region.contains(p2, q2) {
                        continue;
                    }
                    let c = pair_resonance_count(t, &t2, *cube, (p2, q2), &bs, par.eps_prime).unwrap_or(0);
                    pairs += 1;
                    let cubes = (((p2 - cube.0) as f64).powi(2) + ((q2 - cube.1) as f64).powi(2)).sqrt();
                    fit = fit.max(c as f64 * (unit * cubes + kappa) / tt);
                    if (p2, q2) == *cube {
                        same = same.max(c as f64 / kappa);
                    }
                    if cubes >= 0.5 * kappa {
                        far = far.max(c);
                    }
                }
            }
            (fit, same, far, pairs)
        })
        .collect();
    Ok(PairReport {
        kappa,
        fitted_constant: parts.iter().map(|p| p.0).fold(0.0, f64::max),
        same_cube_constant: parts.iter().map(|p| p.1).fold(0.0, f64::max),
        far_max: parts.iter().map(|p| p.2).max().unwrap_or(0),
        pairs: parts.iter().map(|p| p.3).sum(),
    })
}

/// Mean modulus of the `eta`-averaged phase `int mu(eta) e^{2 pi i eta Phi}`
/// for resonant and non-resonant partners, with the phase measured in units
/// of the envelope bandwidth `kappa` and `mu` the mollified indicator of
/// `[1/4, 1/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProbe {
    pub resonant_mean: f64,
    pub nonresonant_mean: f64,
    pub resonant: usize,
    pub nonresonant: usize,
}

pub fn phase_average_probe(par: &CensusParams) -> Result<PhaseProbe, ResonanceError> {
    par.validate(64.0)?;
    let fs = par.forward_set();
    let region = par.region();
    let rows: Vec<i64> = region.rows().collect();
    let mu = crate::smooth::MollifiedIndicator::new(0.3, 0.45, 0.05, crate::smooth::SmoothStep::new(crate::smooth::CUTTER_KERNEL));
    let nodes = 400;
    let etas: Vec<(f64, f64)> = (0..nodes)
        .map(|i| {
            let e = 0.25 + 0.25 * (i as f64 + 0.5) / nodes as f64;
            (e, mu.eval(e))
        })
        .collect();
    let norm: f64 = etas.iter().map(|e| e.1).sum();
    let average = |phi: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for &(e, w) in &etas {
            let a = 2.0 * std::f64::consts::PI * e * phi;
            re += w * a.cos();
            im += w * a.sin();
        }
        (re * re + im * im).sqrt() / norm
    };
    let thr = par.kappa.powf(par.eps_prime);
    let mut rng = ChaCha8Rng::seed_from_u64(par.seed);
    let (mut rs, mut rn, mut ns, mut nn) = (0.0, 0, 0.0, 0);
    for _ in 0..par.samples {
        let Some((t, b, _, q)) = draw_pair(par, &mut rng) else { break };
        for &q2 in &rows {
            let p2 = center_column(&b, q2);
            if !region.contains(p2, q2) {
                continue;
            }
            for l2 in fs.ell_min..=fs.ell_max {
                let n2 = base_for_center(l2, Orientation::Forward, par.kappa, p2, q2);
                if n2 < fs.n_min || n2 > fs.n_max {
                    continue;
                }
                let phi = signed_defect(t.alpha(), l2 as f64 / par.kappa, b.alpha(), q, q2);
                let a = average(phi);
                if phi.abs() < thr {
                    rs += a;
                    rn += 1;
                } else {
                    ns += a;
                    nn += 1;
                }
            }
        }
    }
    Ok(PhaseProbe {
        resonant_mean: if rn > 0 { rs / rn as f64 } else { 0.0 },
        nonresonant_mean: if nn > 0 { ns / nn as f64 } else { 0.0 },
        resonant: rn,
        nonresonant: nn,
    })
}
