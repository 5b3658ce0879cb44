//! Windowed one-collision product: doubling the window count halves the
//! final deviation from the full evolution.
//!
//! cargo run --release --example approximation_product

use roughwave::evolution::{approximation_product, PropagatorConfig};
use roughwave::potential::cosine;
use roughwave::{Grid, WaveFunction, C64};

fn main() {
    let g = Grid::new(64.0, 1024).unwrap();
    let v = cosine(&g, 0.8, false).unwrap();
    let f = WaveFunction::from_fn(&g, 1.0, |x| C64::from_polar(1.0, x)).normalized();
    let cfg = PropagatorConfig::new(0.1);
    let mut last = None;
    for n in [32, 64, 128, 256] {
        let p = approximation_product(&f, &v, n, g.length(), &cfg).unwrap();
        let d = p.final_deviation();
        let ratio = last.map(|l: f64| format!("{:.3}", d / l)).unwrap_or_default();
        println!("N = {n:>3}  final deviation = {d:.4e}  ratio {ratio}  precondition {}", p.precondition_met);
        last = Some(d);
    }
}
