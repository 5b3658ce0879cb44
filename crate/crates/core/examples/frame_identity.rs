//! Analyse a random state into wave packets, check the frame identity and the
//! reconstruction, then truncate to the low-slope packets.
//!
//! cargo run --release --example frame_identity

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughwave::packets::PacketFrame;
use roughwave::{Grid, WaveFunction, C64};

fn main() {
    let grid = Grid::new(64.0, 1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = WaveFunction::from_fn(&grid, 2.5, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).normalized();
    for k in [2.0, 2.5, 3.0, 3.7] {
        let frame = PacketFrame::new(&grid, k).unwrap();
        let c = frame.analyze(&f);
        let rec = frame.synthesize(&c).distance(&f);
        println!(
            "k = {k:<4} packets = {:>6}  frame identity error = {:.2e}  reconstruction error = {:.2e}",
            frame.n_values().count() * frame.ell_count(),
            c.frame_identity_error(&f),
            rec
        );
    }
    // a smooth low-frequency state keeps almost all of its mass in |l| <= C delta kappa
    let smooth = roughwave::resonance::low_frequency_state(&grid, 2.0);
    let c = PacketFrame::new(&grid, 2.0).unwrap().analyze(&smooth);
    let (_, dropped) = c.truncate(0.25, 4.0);
    println!("low-frequency state: mass dropped by truncation at delta = 0.25: {dropped:.2e}");
}
