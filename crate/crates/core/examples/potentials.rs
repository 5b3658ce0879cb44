//! Build the three potential families, decompose a bump lattice into
//! characteristic cubes and split each cube in frequency.
//!
//! cargo run --release --example potentials

use roughwave::potential::cells::window_cells;
use roughwave::potential::{cosine, random_bump_lattice, trap, trap_well, CellOptions};
use roughwave::Grid;
use std::sync::Arc;

fn main() {
    let g = Grid::new(64.0, 1024).unwrap();
    let c = cosine(&g, 0.75, true).unwrap();
    println!("moving cosine: sup = {:.4e}, time independent = {}", c.sup_estimate(), c.is_time_independent());
    let w = trap(&g, 0.8, 30.0, Arc::new(trap_well)).unwrap();
    println!("trap: V(0, 0) = {:.4e}, V(0, 2T) = {:.4e}", w.value(0.0, 0.0).re, w.value(0.0, 2.0 * g.t()).re);

    let t = 2.0 * std::f64::consts::PI * 32.0;
    let g = Grid::new(t, Grid::default_size(t)).unwrap();
    let v = random_bump_lattice(&g, 0.9, 7);
    let cells = window_cells(&v, CellOptions::default()).unwrap();
    println!("bump lattice at T = {t:.1}: {} cubes, resummation error {:.2e}", cells.len(), cells.reconstruction_error(&v));
    if let Some((l2, linf)) = cells.annulus_tail(1.0) {
        println!("worst-cell spectral tail outside the annulus (+-1): L2 {l2:.2e}, Linf {linf:.2e}");
    }
    let split = cells.frequency_split(0.3).unwrap();
    println!(
        "frequency split lambda = 0.3: threshold {:.3e}, max |Omega| = {}, fitted C = {:.3}",
        split.threshold,
        split.k_max,
        split.omega_constant()
    );
    let sparse = cells.sparsify(3, 0, 0).unwrap();
    println!("sparsified mod 3: {} of {} cubes kept", sparse.len(), cells.len());
}
