//! Evolve a low-frequency state through a moving resonant cosine and record
//! deviation from free flow, norm and energy.
//!
//! cargo run --release --example free_vs_full

use roughwave::evolution::{evolve_series, PropagatorConfig};
use roughwave::potential::cosine;
use roughwave::resonance::low_frequency_state;
use roughwave::Grid;

fn main() {
    let g = Grid::new(64.0, 1024).unwrap();
    let v = cosine(&g, 0.75, true).unwrap();
    let horizon = 2.0 * std::f64::consts::PI * g.length();
    for k in [0.5, 0.7] {
        let f = low_frequency_state(&g, k);
        let times: Vec<f64> = (0..=8).map(|i| horizon * i as f64 / 8.0).collect();
        let (_, series) = evolve_series(&f, &v, &times, &PropagatorConfig::new(0.2)).unwrap();
        println!("k = {k}");
        for p in series {
            println!("  t = {:>7.1}  deviation = {:.4}  norm - 1 = {:+.1e}  energy = {:.4e}", p.t, p.deviation, p.norm - 1.0, p.energy);
        }
    }
}
