//! Smooth compactly supported profiles.
//!
//! Everything that needs an exact partition of unity (the packet window, the
//! cube cutter, the frequency-lattice bump) is built from one primitive: the
//! normalised cumulative integral `K_a` of the kernel `exp(-a/(1-u^2))` on
//! `[-1, 1]`. Differences of shifted copies of `K_a` telescope, so partition
//! sums equal one up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

const TABLE_INTERVALS: usize = 4096;

/// Tabulated smooth step `K_a: R -> [0, 1]`, equal to 0 below -1 and 1 above 1.
#[derive(Clone, Debug)]
pub struct SmoothStep {
    a: f64,
    norm: f64,
    values: Arc<Vec<f64>>,
}

// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn raw_kernel(a: f64, u: f64) -> f64 {
    if u <= -1.0 || u >= 1.0 {
        return 0.0;
    }
    (-a / (1.0 - u * u)).exp()
}

fn gauss(a: f64, lo: f64, hi: f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut s = 0.0;
    for i in 0..5 {
        s += GL_W[i] * (raw_kernel(a, c - h * GL_X[i]) + raw_kernel(a, c + h * GL_X[i]));
    }
    s * h
}

impl SmoothStep {
    pub fn new(a: f64) -> Self {
        assert!(a > 0.0, "kernel parameter must be positive");
        let h = 2.0 / TABLE_INTERVALS as f64;
        // Integrate the left half and mirror, so K(-u) = 1 - K(u) holds exactly
        // at the nodes.
        let half = TABLE_INTERVALS / 2;
        let mut left = vec![0.0; half + 1];
        for i in 0..half {
            let lo = -1.0 + i as f64 * h;
            // Sub-divide each table interval to keep the quadrature exact to
            // rounding even where the kernel has a thin boundary layer.
            let sub = 4;
            let mut acc = 0.0;
            for s in 0..sub {
                let a0 = lo + s as f64 * h / sub as f64;
                acc += gauss(a, a0, a0 + h / sub as f64);
            }
            left[i + 1] = left[i] + acc;
        }
        let total = 2.0 * left[half];
        let mut values = vec![0.0; TABLE_INTERVALS + 1];
        for i in 0..=half {
            values[i] = left[i] / total;
            values[TABLE_INTERVALS - i] = 1.0 - left[i] / total;
        }
        values[half] = 0.5;
        SmoothStep { a, norm: total, values: Arc::new(values) }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Normalised kernel density `K_a'(u)`.
    pub fn density(&self, u: f64) -> f64 {
        raw_kernel(self.a, u) / self.norm
    }

    fn density_slope(&self, u: f64) -> f64 {
        if u <= -1.0 || u >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u * u;
        self.density(u) * (-2.0 * self.a * u / (d * d))
    }

    /// `K_a(u)` by quintic Hermite interpolation of the table.
    pub fn step(&self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        if u > 0.0 {
            return 1.0 - self.step(-u);
        }
        let h = 2.0 / TABLE_INTERVALS as f64;
        let pos = (u + 1.0) / h;
        let i = (pos.floor() as usize).min(TABLE_INTERVALS - 1);
        let x0 = -1.0 + i as f64 * h;
        let t = (u - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.density(x0) * h, self.density(x0 + h) * h);
        let (s0, s1) = (self.density_slope(x0) * h * h, self.density_slope(x0 + h) * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
        y0 * h00 + d0 * h10 + s0 * h20 + y1 * h01 + d1 * h11 + s1 * h21
    }
}

/// Indicator of `[lo, hi]` convolved with the kernel of half-width `w`.
///
/// Integer translates of `mollified_indicator(0, 1, w)` sum to one.
#[derive(Clone, Debug)]
pub struct MollifiedIndicator {
    pub lo: f64,
    pub hi: f64,
    pub w: f64,
    step: SmoothStep,
}

impl MollifiedIndicator {
    pub fn new(lo: f64, hi: f64, w: f64, step: SmoothStep) -> Self {
        assert!(hi > lo && w > 0.0);
        MollifiedIndicator { lo, hi, w, step }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.step.step((u - self.lo) / self.w) - self.step.step((u - self.hi) / self.w)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo - self.w, self.hi + self.w)
    }
}

/// Kernel parameter used for cutters and frequency bumps.
pub const CUTTER_KERNEL: f64 = 1.0;

/// Unit-cell cutter: equals 1 on `[0.05, 0.95]`, vanishes outside `[-0.05, 1.05]`.
pub fn cell_cutter() -> MollifiedIndicator {
    MollifiedIndicator::new(0.0, 1.0, 0.05, SmoothStep::new(CUTTER_KERNEL))
}

/// Frequency-lattice bump: supported in `[-1, 1]`, integer translates sum to one.
pub fn lattice_bump() -> MollifiedIndicator {
    MollifiedIndicator::new(-0.5, 0.5, 0.5, SmoothStep::new(CUTTER_KERNEL))
}

/// Angle profile of the packet window.
///
/// `theta(x) = (pi/2) K_a(2 g(x) - 1)` on `[0, 1]`, with the monotone
/// reparametrisation `g(x) = x - A sin(2 pi x)/(2 pi) - B sin(4 pi x)/(4 pi)`.
/// `theta(x) + theta(1 - x) = pi/2`, which gives the exact partition of unity.
#[derive(Clone, Debug)]
pub struct WindowProfile {
    pub a: f64,
    pub coef_a: f64,
    pub coef_b: f64,
    step: SmoothStep,
}

impl WindowProfile {
    pub fn new(a: f64, coef_a: f64, coef_b: f64) -> Self {
        assert!(
            coef_a.abs() + coef_b.abs() < 1.0,
            "reparametrisation must stay monotone"
        );
        WindowProfile { a, coef_a, coef_b, step: SmoothStep::new(a) }
    }

    fn g(&self, x: f64) -> f64 {
        x - self.coef_a * (2.0 * PI * x).sin() / (2.0 * PI)
            - self.coef_b * (4.0 * PI * x).sin() / (4.0 * PI)
    }

    /// Rising angle on `[0, 1]`, 0 below and pi/2 above.
    pub fn theta(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 0.5 * PI;
        }
        if x > 0.5 {
            return 0.5 * PI - self.theta(1.0 - x);
        }
        0.5 * PI * self.step.step(2.0 * self.g(x) - 1.0)
    }
}
