//! Tube geometry: which forward and backward tubes pass through a cube, and
//! the resonance defect of a triple.
//!
//! cargo run --release --example tubes

use roughwave::packets::{tubes_through_cube, CubeRegion, Orientation, TubeSet};
use roughwave::resonance::{default_backward_slopes, global_resonance_defect, local_resonance_directions};

fn main() {
    let kappa = 16.0;
    let region = CubeRegion::standard(kappa);
    let (c1, c2) = default_backward_slopes(0.1, 4.0);
    let forward = TubeSet::forward(kappa, 0.1, 4.0);
    let backward = TubeSet::backward(kappa, 4.0, c1, c2);
    let (p, q) = (0, 8);
    let f = tubes_through_cube(p, q, &forward, &region).unwrap();
    let b = tubes_through_cube(p, q, &backward, &region).unwrap();
    println!("cube ({p}, {q}) at kappa = {kappa}: {} forward tubes, {} backward tubes", f.len(), b.len());
    println!("backward slopes in [{c1:.3}, {c2:.3}]");
    for t in f.iter().take(3) {
        println!("  {:?} n = {:>3} l = {:>3} alpha = {:+.4}", t.orientation, t.n, t.ell, t.alpha());
    }
    let tb = b[b.len() / 2];
    let q2 = (q + 3..region.rows().end() + 1).find(|&r| {
        let col = roughwave::resonance::center_column(&tb, r);
        f.iter().any(|t| t.meets_cube(col, r))
    });
    if let Some(q2) = q2 {
        let col = roughwave::resonance::center_column(&tb, q2);
        let t2 = *f.iter().find(|t| t.meets_cube(col, q2)).unwrap();
        let d = global_resonance_defect(&f[0], &t2, &tb, (p, q), (col, q2));
        println!("defect of ({}, {}) / ({}, {}) through backward l = {}: {d:?}", f[0].n, f[0].ell, t2.n, t2.ell, tb.ell);
    }
    let (fwd, bwd) = local_resonance_directions((1.0, 0.2), 0.4).unwrap();
    println!("slopes matching xi* = (1, 0.2) at eta = 0.4: forward {fwd:+.4}, backward {bwd:+.4}");
    assert_eq!(Orientation::Forward.name(), "forward");
}
