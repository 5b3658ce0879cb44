//! Deviation from free flow across k for the moving cosine: the peak sits at
//! the resonant value k = 1/2.
//!
//! cargo run --release --example k_scan

use roughwave::evolution::PropagatorConfig;
use roughwave::potential::cosine;
use roughwave::resonance::{low_frequency_state, scan_k, uniform_k_grid};
use roughwave::Grid;

fn main() {
    let g = Grid::new(64.0, 1024).unwrap();
    let v = cosine(&g, 0.75, true).unwrap();
    let f = low_frequency_state(&g, 0.5);
    let ks = uniform_k_grid(0.3, 0.8, 17);
    let r = scan_k(&f, &v, &ks, 2.0 * std::f64::consts::PI * g.length(), &PropagatorConfig::new(0.2), 0.1).unwrap();
    for (k, d) in r.ks.iter().zip(&r.deviations) {
        println!("k = {k:.4}  D = {d:.4}  {}", "#".repeat((d * 40.0) as usize));
    }
    let (k, d) = r.argmax();
    println!("max D = {d:.3} at k = {k:.4}; median {:.3}; resonant fraction {:.2}", r.median, r.resonant_fraction);
}
