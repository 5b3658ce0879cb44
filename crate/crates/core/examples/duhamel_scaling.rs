//! First-order Duhamel error: quadruples when the time or the amplitude
//! doubles.
//!
//! cargo run --release --example duhamel_scaling

use roughwave::evolution::{duhamel_first_order, evolve, PropagatorConfig};
use roughwave::potential::cosine_with_amplitude;
use roughwave::{Grid, WaveFunction, C64};

fn main() {
    let g = Grid::new(8.0, 256).unwrap();
    let v = cosine_with_amplitude(&g, 0.01, true).unwrap();
    let f = WaveFunction::from_fn(&g, 1.0, |x| C64::from_polar((-(x / 6.0).powi(2)).exp(), 0.5 * x)).normalized();
    let cfg = PropagatorConfig::new(0.005);
    let err = |v: &roughwave::potential::SpaceTimePotential, t: f64| {
        evolve(&f, v, 0.0, t, &cfg).unwrap().distance(&duhamel_first_order(&f, v, t, &cfg).unwrap())
    };
    let base = err(&v, 2.0);
    println!("Err(t = 2)            = {base:.4e}");
    println!("Err(t = 4) / Err(2)   = {:.3}", err(&v, 4.0) / base);
    println!("Err(2V)    / Err(V)   = {:.3}", err(&v.scaled(2.0), 2.0) / base);
}
