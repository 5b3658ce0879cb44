//! Drive an experiment through the batch interface and read back its
//! artifacts, including an RWAV snapshot.
//!
//! cargo run --release --example batch_run [OUT_DIR]

use roughwave::cli::{list_experiments, run, RunOptions};
use roughwave::field::load_snapshot;

fn main() {
    for e in list_experiments() {
        println!("{:<17} {:<11} -> {}", e.name, e.anchor, e.outputs.join(", "));
    }
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("roughwave-batch"));
    let config = out.join("sim.cfg");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(&config, "experiment = sim\nT = 16\nM = 256\nkind = cosine\ngamma = 0.75\nmoving = true\nk = 0.5\nsamples = 16\n").unwrap();
    let rec = run(&RunOptions { config, out: out.clone(), jobs: Some(1), seed: None }).unwrap();
    for a in &rec.artifacts {
        println!("{}  {} bytes  sha256 {}", a.path, a.bytes, &a.sha256[..16]);
    }
    println!("summary: {}", rec.summary);
    let u = load_snapshot(&out.join("final.rwav")).unwrap();
    println!("snapshot: M = {}, T = {}, t = {}, norm = {:.15}", u.grid.m(), u.grid.t(), u.time_tag, u.l2_norm());
}
