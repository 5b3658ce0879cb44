//! Brute-force resonance censuses: counts #(s) along a backward tube, the
//! no-lattice family size and the pair count.
//!
//! cargo run --release --example resonance_census

use roughwave::resonance::{census_counts, no_lattice_census, pair_census, phase_average_probe, CensusParams, NoLatticeParams};

fn main() {
    for kappa in [8.0, 16.0, 32.0] {
        let par = CensusParams::new(kappa);
        let c = census_counts(&par).unwrap();
        println!(
            "kappa = {kappa:>2}: mean sum #(s) = {:>6.2}  C = {:.2}  envelope C = {:.2} (spread {:.2} over {} bins)",
            c.mean_total, c.total_constant, c.envelope_constant, c.envelope_spread, c.envelope_bins
        );
        let pr = pair_census(&CensusParams { samples: 8, ..par.clone() }).unwrap();
        println!("           pair count constant = {:.2} (same cube {:.2})", pr.fitted_constant, pr.same_cube_constant);
    }
    let nl = no_lattice_census(&NoLatticeParams::new(16.0)).unwrap();
    println!(
        "no-lattice at kappa = 16: max family {} vs kappa^(2(eps+upsilon)) = {:.2}; without slope separation {}",
        nl.max_family, nl.scale, nl.control_max
    );
    let ph = phase_average_probe(&CensusParams::new(16.0)).unwrap();
    println!("eta-averaged phase: resonant {:.3}, non-resonant {:.3}", ph.resonant_mean, ph.nonresonant_mean);
}
