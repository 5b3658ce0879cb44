//! Resonance geometry and the resonance experiments.
//!
//! Tube arithmetic works in cube units (`2 pi kappa`). A forward tube
//! `T->` and a forward tube `T'->` resonate through a backward tube `T<-`
//! when the phase defect
//! `|(a^2(T->) - a^2(T<-)) q - (a^2(T'->) - a^2(T<-)) q'|`
//! is below `kappa^eps'`, where `q`, `q'` are the rows of the cubes shared
//! with `T<-`.

use std::f64::consts::PI;

use crate::evolution::EvolutionError;
use crate::field::{FieldError, C64};
use crate::packets::{Orientation, Tube};

pub mod census;
pub mod demos;

pub use census::{
    census_counts, census_table, no_lattice_census, pair_census, pair_resonance_count, phase_average_probe,
    CensusParams, CensusSample, NoLatticeParams, NoLatticeReport, PairReport, PhaseProbe, ResonanceCensus,
};
pub use demos::{
    ground_state, low_frequency_state, mode_amplitude, resonance_demo, second_moment, scan_k, scan_table, trap_demo, uniform_k_grid, DemoReport, ScanReport,
    TrapParams, TrapReport,
};

/// Default exponent of the resonance cutoff `kappa^eps'`.
pub const DEFAULT_EPS_PRIME: f64 = 0.1;
/// Smallest `|xi_1|` accepted by [`local_resonance_directions`].
pub const XI1_THRESHOLD: f64 = 0.05;
/// Default work-unit budget for the censuses when `ROUGHWAVE_BUDGET` is unset.
pub const DEFAULT_BUDGET: u64 = 4_000_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ResonanceError {
    #[error("tube ({n}, {ell}) does not meet cube ({p}, {q})")]
    NotIncident { n: i64, ell: i64, p: i64, q: i64 },
    #[error("|xi_1| = {xi1} is below the threshold {threshold}")]
    SmallXi1 { xi1: f64, threshold: f64 },
    #[error("enumeration needs {needed} work units, budget is {budget}")]
    Budget { needed: u64, budget: u64 },
    #[error("{name} = {value}: {why}")]
    Parameter { name: &'static str, value: f64, why: &'static str },
    #[error("no bound state: imaginary-time energy {energy} is not negative")]
    NoBoundState { energy: f64 },
    #[error("grid Nyquist frequency {nyquist} cannot resolve mode 3")]
    UnderResolved { nyquist: f64 },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl ResonanceError {
    pub fn is_numerical(&self) -> bool {
        match self {
            ResonanceError::Evolution(e) => e.is_numerical(),
            ResonanceError::UnderResolved { .. } => true,
            _ => false,
        }
    }
}

/// Work budget from `ROUGHWAVE_BUDGET`, falling back to [`DEFAULT_BUDGET`].
pub fn budget_from_env() -> u64 {
    std::env::var("ROUGHWAVE_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|b| *b >= 0.0)
        .map(|b| b as u64)
        .unwrap_or(DEFAULT_BUDGET)
}

/// Two forward tubes, one backward tube and the two shared cubes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceTriple {
    pub forward: Tube,
    pub forward2: Tube,
    pub backward: Tube,
    pub cube: (i64, i64),
    pub cube2: (i64, i64),
    pub global_defect: f64,
}

impl ResonanceTriple {
    /// Checks incidences and computes the defect.
    pub fn new(forward: Tube, forward2: Tube, backward: Tube, cube: (i64, i64), cube2: (i64, i64)) -> Result<Self, ResonanceError> {
        let global_defect = global_resonance_defect(&forward, &forward2, &backward, cube, cube2)?;
        Ok(ResonanceTriple { forward, forward2, backward, cube, cube2, global_defect })
    }

    pub fn is_resonant(&self, eps_prime: f64) -> bool {
        self.global_defect < self.forward.kappa.powf(eps_prime)
    }
}

fn require_incident(t: &Tube, (p, q): (i64, i64)) -> Result<(), ResonanceError> {
    if t.meets_cube(p, q) {
        Ok(())
    } else {
        Err(ResonanceError::NotIncident { n: t.n, ell: t.ell, p, q })
    }
}

/// Signed defect without incidence checks.
pub fn signed_defect(alpha: f64, alpha2: f64, alpha_b: f64, q: i64, q2: i64) -> f64 {
    let b2 = alpha_b * alpha_b;
    (alpha * alpha - b2) * q as f64 - (alpha2 * alpha2 - b2) * q2 as f64
}

/// `|(a^2(T->) - a^2(T<-)) q - (a^2(T'->) - a^2(T<-)) q'|`.
pub fn global_resonance_defect(
    forward: &Tube,
    forward2: &Tube,
    backward: &Tube,
    cube: (i64, i64),
    cube2: (i64, i64),
) -> Result<f64, ResonanceError> {
    require_incident(forward, cube)?;
    require_incident(backward, cube)?;
    require_incident(forward2, cube2)?;
    require_incident(backward, cube2)?;
    Ok(signed_defect(forward.alpha(), forward2.alpha(), backward.alpha(), cube.1, cube2.1).abs())
}

pub fn is_global_resonant(
    forward: &Tube,
    forward2: &Tube,
    backward: &Tube,
    cube: (i64, i64),
    cube2: (i64, i64),
    eps_prime: f64,
) -> Result<bool, ResonanceError> {
    let d = global_resonance_defect(forward, forward2, backward, cube, cube2)?;
    Ok(d < forward.kappa.powf(eps_prime))
}

/// Defect numerator `kappa^2 * defect` in exact integer arithmetic, valid
/// when all three tubes share an integer `kappa`.
pub fn defect_numerator(ell: i64, ell2: i64, ell_b: i64, q: i64, q2: i64) -> i128 {
    let (l, l2, lb) = (ell as i128, ell2 as i128, ell_b as i128);
    (l * l - lb * lb) * q as i128 - (l2 * l2 - lb * lb) * q2 as i128
}

/// Slopes `(alpha->, alpha<-)` matching a cell frequency `xi*` at `eta = 1/k`.
pub fn local_resonance_directions(xi_star: (f64, f64), eta: f64) -> Result<(f64, f64), ResonanceError> {
    let (x1, x2) = xi_star;
    if !(x1.abs() >= XI1_THRESHOLD) {
        return Err(ResonanceError::SmallXi1 { xi1: x1, threshold: XI1_THRESHOLD });
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(ResonanceError::Parameter { name: "eta", value: eta, why: "must be positive" });
    }
    let fwd = -0.5 * (x1 / eta + x2 / x1);
    let bwd = 0.5 * (x1 / eta - x2 / x1);
    Ok((fwd, bwd))
}

/// Range `[c1, c2]` of backward slopes produced by frequencies on the
/// annulus `rho1 <= |xi| <= rho2` for `eta` in `[eta_lo, eta_hi]`, keeping
/// only those whose forward slope satisfies `|alpha->| <= fwd_max` and whose
/// backward slope is positive.
pub fn backward_slope_range(rho: (f64, f64), eta: (f64, f64), fwd_max: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let n = 200;
    for ir in 0..=8 {
        let r = rho.0 + (rho.1 - rho.0) * ir as f64 / 8.0;
        for ie in 0..=8 {
            let e = eta.0 + (eta.1 - eta.0) * ie as f64 / 8.0;
            for ia in 0..n {
                let th = 2.0 * PI * ia as f64 / n as f64;
                let xi = (r * th.cos(), r * th.sin());
                if let Ok((f, b)) = local_resonance_directions(xi, e) {
                    if f.abs() <= fwd_max && b > 0.0 {
                        lo = lo.min(b);
                        hi = hi.max(b);
                    }
                }
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Backward slope constants for the default annulus `[0.9, 1.1]`,
/// `k in [2, 4]`, forward slopes `|alpha| <= c delta`.
pub fn default_backward_slopes(delta: f64, c: f64) -> (f64, f64) {
    backward_slope_range((0.9, 1.1), (0.25, 0.5), c * delta).unwrap_or((1.0, 2.0))
}

/// Column of the cube holding the centre line of `t` at mid-row `q + 1/2`.
pub fn center_column(t: &Tube, q: i64) -> i64 {
    t.center(q as f64 + 0.5).floor() as i64
}

/// Base index `n` giving a tube of slope `ell` its centre cube at `(p, q)`.
pub fn base_for_center(ell: i64, orientation: Orientation, kappa: f64, p: i64, q: i64) -> i64 {
    let probe = crate::packets::tube_of(0, ell, orientation, kappa);
    // centre = n + probe.center; need p <= centre < p + 1
    let mut n = (p as f64 - probe.center(q as f64 + 0.5)).ceil() as i64;
    // guard the floor against rounding
    let col = |n: i64| (n as f64 + probe.center(q as f64 + 0.5)).floor() as i64;
    while col(n) > p {
        n -= 1;
    }
    while col(n) < p {
        n += 1;
    }
    n
}

/// Two-level amplitudes of `e^{ix}` and `e^{-ix}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelState {
    pub a: C64,
    pub b: C64,
    pub lambda: C64,
    pub j: u64,
}

/// Coupling `-i d A / 2` of one window of length `d` for amplitude `A`.
pub fn two_level_coupling(d: f64, amp: f64) -> C64 {
    C64::new(0.0, -0.5 * d * amp)
}

/// One multiplication by `[[1, lambda], [lambda, 1]]`.
pub fn two_level_step(s: TwoLevelState) -> TwoLevelState {
    TwoLevelState { a: s.a + s.lambda * s.b, b: s.lambda * s.a + s.b, lambda: s.lambda, j: s.j + 1 }
}

/// Eigenvalues `(1 + lambda, 1 - lambda)` for eigenvectors `(1, 1)`, `(1, -1)`.
pub fn two_level_eigenvalues(lambda: C64) -> (C64, C64) {
    (C64::new(1.0, 0.0) + lambda, C64::new(1.0, 0.0) - lambda)
}

/// `[[1, lambda], [lambda, 1]]^j (a0, b0)` through the eigen-decomposition.
pub fn two_level_power(a0: C64, b0: C64, lambda: C64, j: u64) -> (C64, C64) {
    let (zp, zm) = two_level_eigenvalues(lambda);
    let p = zp.powu(j as u32) * (a0 + b0) * 0.5;
    let m = zm.powu(j as u32) * (a0 - b0) * 0.5;
    (p + m, p - m)
}
