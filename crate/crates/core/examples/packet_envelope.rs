//! The freely evolved window stays in its 3-dilated tube; translated-tube
//! masses decay fast.
//!
//! cargo run --release --example packet_envelope

use roughwave::evolution::{tube_localization, PacketEnvelope};
use roughwave::packets::Window;
use roughwave::Grid;
use std::f64::consts::PI;

fn main() {
    let env = PacketEnvelope::new(&Window::new());
    for i in 0..=4 {
        let s = 2.0 * PI * i as f64 / 4.0;
        let r = env.report(s);
        let masses: Vec<String> = r.lambda_masses.iter().map(|m| format!("{m:.1e}")).collect();
        println!("s = {s:.3}  outside 3-tube = {:.2e}  lambda masses = [{}]", r.outside_tube, masses.join(", "));
    }
    let t = 2.0 * PI * 64.0;
    let g = Grid::new(t, Grid::default_size(t)).unwrap();
    let kappa = g.kappa();
    let times: Vec<f64> = (0..=16).map(|i| 2.0 * PI * t * i as f64 / 16.0).collect();
    for ell in [-(kappa as i64), 0, kappa as i64] {
        let worst = tube_localization(&g, &Window::new(), kappa, 0, ell, 1.0, &times);
        println!("packet (0, {ell:>3}): worst mass outside its tube over [0, 2 pi T] = {worst:.2e}");
    }
}
