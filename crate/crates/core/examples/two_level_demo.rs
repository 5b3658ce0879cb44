//! A cos 2x transfers e^{ix} into e^{-ix}; the two-level product model
//! tracks the full PDE.
//!
//! cargo run --release --example two_level_demo

use roughwave::evolution::PropagatorConfig;
use roughwave::resonance::{resonance_demo, two_level_coupling, two_level_eigenvalues};
use roughwave::Grid;

fn main() {
    let g = Grid::new(100.0, 2048).unwrap();
    let r = resonance_demo(&g, 0.75, 1.0, &PropagatorConfig::new(0.05), 16, 8).unwrap();
    println!("A = {:.4e}, t_max = {:.1}", r.amplitude, r.times.last().unwrap());
    for ((t, m), p) in r.times.iter().zip(&r.model_curve).zip(&r.pde_curve) {
        println!("  t = {t:>6.1}  |b|^2 model = {m:.5}  pde = {p:.5}");
    }
    println!("max gap {:.2e}, transfer error {:.2e}", r.max_gap, r.transfer_error);
    let lam = two_level_coupling(1.0, r.amplitude);
    let (zp, zm) = two_level_eigenvalues(lam);
    println!("eigenvalues for one unit window: {zp} and {zm}");
}
