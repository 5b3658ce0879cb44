//! Band-projected Duhamel bound averaged over k in [2, 4].
//!
//! cargo run --release --example restriction

use roughwave::evolution::restriction_constant;
use roughwave::potential::from_fn;
use roughwave::resonance::uniform_k_grid;
use roughwave::{Grid, C64};

fn main() {
    let g = Grid::new(64.0, 1024).unwrap();
    let l = g.length();
    let ks = uniform_k_grid(2.0, 4.0, 17);
    for delta in [0.25, 0.5, 1.0] {
        // a source moving with the k = 3 dispersion at the band edge
        let src = from_fn(&g, 0.0, false, move |x, t| {
            let env = (-(x / 20.0).powi(2) - ((t - l / 2.0) / (l / 8.0)).powi(2)).exp();
            C64::from_polar(env, delta * x - 3.0 * delta * delta * t)
        });
        let r = restriction_constant(&src, &ks, &[delta], 0.0, l, 10 * l as usize).unwrap();
        println!("delta = {delta:<4}  C = {:.3}", r[0].constant);
    }
}
