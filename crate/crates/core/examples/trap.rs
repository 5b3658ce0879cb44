//! A decaying well holds its ground state while the free state spreads.
//!
//! cargo run --release --example trap

use roughwave::resonance::{trap_demo, TrapParams};

fn main() {
    let r = trap_demo(&TrapParams::new(256.0, 0.8, 30.0)).unwrap();
    println!("ground state energy {:.4} after {} imaginary-time steps", r.energy, r.iterations);
    println!("second moment: initial {:.3}, trapped {:.3}, free {:.1}", r.initial_moment, r.trapped_moment, r.free_moment);
    println!("ratios: trapped {:.3}, free {:.1}; norm drift {:.1e}", r.trapped_ratio, r.free_ratio, r.norm_drift);
}
