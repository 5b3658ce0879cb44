//! Batch driver: a flat config file in, CSV / JSON / RWAV artifacts and a
//! run record out.
//!
//! Every experiment computes its artifacts in memory first; files are only
//! written once the computation succeeded, each through a temporary file and
//! a rename. A failure therefore leaves the output directory as it was.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, KeyValues};
use crate::evolution::{
    self, approximation_product, collision_energy, duhamel_first_order, evolve, evolve_series, EvolutionError,
    PropagatorConfig, Scheme, SeriesPoint,
};
use crate::field::{self, FieldError, Grid, WaveFunction, C64};
use crate::output::{atomic_write, json_bytes, sha256_hex, Cell, Table};
use crate::packets::{self, PacketError};
use crate::potential::{PotentialConfig, PotentialError, SpaceTimePotential};
use crate::resonance::{
    self, census_counts, census_table, low_frequency_state, no_lattice_census, pair_census, phase_average_probe,
    resonance_demo, scan_k, scan_table, trap_demo, uniform_k_grid, CensusParams, NoLatticeParams, ResonanceError,
    TrapParams,
};

/// One row of [`list_experiments`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub outputs: &'static [&'static str],
    /// Where the experiment comes from in the source analysis.
    pub anchor: &'static str,
    pub description: &'static str,
}

const POTENTIAL: [&str; 6] = ["kind", "gamma", "lambda", "P", "c", "moving"];
const STATE: [&str; 5] = ["state", "xi0", "sigma", "modes", "snapshot"];

const EXPERIMENTS: [ExperimentInfo; 10] = [
    ExperimentInfo {
        name: "frame_check",
        required: &["T"],
        optional: &["M", "k", "trials"],
        outputs: &["frame_check.csv"],
        anchor: "Eq. ss1",
        description: "packet frame identity and reconstruction on random states",
    },
    ExperimentInfo {
        name: "sim",
        required: &["T"],
        optional: &["M", "k", "dt", "scheme", "horizon", "samples"],
        outputs: &["deviation.csv", "manifest.json", "final.rwav"],
        anchor: "Eq. asa1",
        description: "full evolution against free evolution: deviation, norm and energy series",
    },
    ExperimentInfo {
        name: "duhamel_check",
        required: &["T"],
        optional: &["M", "k", "dt", "t", "trials", "modes"],
        outputs: &["duhamel.csv"],
        anchor: "Eq. duh1",
        description: "first-order Duhamel error under time and amplitude doubling",
    },
    ExperimentInfo {
        name: "approx_product",
        required: &["T"],
        optional: &["M", "k", "dt", "N", "horizon"],
        outputs: &["product.csv"],
        anchor: "Eq. e3",
        description: "windowed one-collision product against full evolution",
    },
    ExperimentInfo {
        name: "collision_energy",
        required: &["T"],
        optional: &["M", "dt", "k_min", "k_max", "n_k", "delta", "C"],
        outputs: &["collision_energy.csv"],
        anchor: "Eq. coll",
        description: "one-collision energy of the truncated state, integrated over eta = 1/k",
    },
    ExperimentInfo {
        name: "census",
        required: &["kappa"],
        optional: &["delta", "C", "C_backward", "c1", "c2", "eps_prime", "tau", "samples", "pairs", "phase"],
        outputs: &["census.csv"],
        anchor: "Eq. pil0",
        description: "brute-force resonance counts #(s) for sampled forward/backward tube pairs",
    },
    ExperimentInfo {
        name: "no_lattice",
        required: &["kappa"],
        optional: &["delta", "C", "eps_prime", "upsilon", "eps", "separation", "base_tubes"],
        outputs: &["no_lattice.json"],
        anchor: "Lemma 3.6",
        description: "largest separated family of tubes resonant with a common pair",
    },
    ExperimentInfo {
        name: "resonance_demo",
        required: &[],
        optional: &["T", "M", "gamma", "k", "dt", "points", "windows"],
        outputs: &["demo.json", "demo.csv"],
        anchor: "Sec. 8 (B)",
        description: "two-level resonance model against the full PDE for A cos 2x",
    },
    ExperimentInfo {
        name: "trap_demo",
        required: &[],
        optional: &["T", "gamma", "lambda", "k", "dt", "tau", "max_iterations"],
        outputs: &["trap.json"],
        anchor: "Sec. 8 (A)",
        description: "bound state of a decaying well: trapped against free second moment",
    },
    ExperimentInfo {
        name: "scan_k",
        required: &["T"],
        optional: &["M", "dt", "k_min", "k_max", "n_k", "horizon", "threshold"],
        outputs: &["scan.csv"],
        anchor: "Eq. lop2",
        description: "deviation from free evolution across a grid of dispersion values",
    },
];

/// The ten experiments with their keys, outputs and anchors.
pub fn list_experiments() -> Vec<ExperimentInfo> {
    EXPERIMENTS.to_vec()
}

fn uses_potential(name: &str) -> bool {
    matches!(name, "sim" | "duhamel_check" | "approx_product" | "collision_energy" | "scan_k")
}

fn uses_state(name: &str) -> bool {
    matches!(name, "sim" | "approx_product" | "collision_energy" | "scan_k")
}

/// Keys accepted by experiment `name`.
pub fn allowed_keys(name: &str) -> Option<Vec<&'static str>> {
    let info = EXPERIMENTS.iter().find(|e| e.name == name)?;
    let mut keys = vec!["experiment", "seed"];
    keys.extend(info.required);
    keys.extend(info.optional);
    if uses_potential(name) {
        keys.extend(POTENTIAL);
    }
    if uses_state(name) {
        keys.extend(STATE);
    }
    keys.sort_unstable();
    keys.dedup();
    Some(keys)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_config",
            CliError::Numerical(_) => "numerical_guard",
            CliError::Budget(_) => "budget",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable error document.
    pub fn to_json(&self) -> Value {
        let message = match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Budget(m) | CliError::Io(m) => m,
        };
        json!({"error": self.kind(), "exit_code": self.exit_code(), "message": message})
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        match e {
            PotentialError::TimeSampling { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::Potential(p) => p.into(),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<ResonanceError> for CliError {
    fn from(e: ResonanceError) -> Self {
        match e {
            ResonanceError::Budget { .. } => CliError::Budget(e.to_string()),
            ResonanceError::Evolution(inner) => inner.into(),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<PacketError> for CliError {
    fn from(e: PacketError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Io(io) => CliError::Io(io.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: &'static str,
    pub seed: u64,
    pub kv: KeyValues,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        Self::from_kv(KeyValues::parse(text)?)
    }

    pub fn from_kv(kv: KeyValues) -> Result<ExperimentConfig, CliError> {
        let name: String = kv.require("experiment")?;
        let info = EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
            KeyValues::invalid("experiment", &name, format!("expected one of {}", names.join(", ")))
        })?;
        kv.reject_unknown(&allowed_keys(info.name).expect("listed experiment"))?;
        for key in info.required {
            kv.require::<String>(key)?;
        }
        let seed = kv.get_or("seed", 0u64)?;
        Ok(ExperimentConfig { experiment: info.name, seed, kv })
    }

    /// Replace the seed (the `--seed` flag).
    pub fn with_seed(mut self, seed: u64) -> ExperimentConfig {
        self.seed = seed;
        self.kv.insert("seed", seed);
        self
    }
}

/// File produced by a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything a run reports about itself; written as `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub jobs: usize,
    pub wall_time_s: f64,
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

/// Artifacts and summary of a finished experiment, not yet on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

/// Parse, run and write. Returns the record that was written to `run.json`.
pub fn run(opts: &RunOptions) -> Result<RunRecord, CliError> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", opts.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = opts.seed {
        cfg = cfg.with_seed(s);
    }
    let jobs = match opts.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let start = Instant::now();
    let output = pool.install(|| execute(&cfg))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let artifacts = write_all(&opts.out, &output.files)?;
    let mut versions = BTreeMap::new();
    versions.insert("roughwave".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("snapshot".to_string(), format!("RWAV {}", field::SNAPSHOT_VERSION));
    let record = RunRecord {
        experiment: cfg.experiment.to_string(),
        config: cfg.kv.as_map().clone(),
        seed: cfg.seed,
        versions,
        jobs,
        wall_time_s,
        artifacts,
        summary: output.summary,
    };
    atomic_write(&opts.out.join("run.json"), &json_bytes(&record)).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(record)
}

/// Write every file atomically; on failure remove the ones already written.
fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<Artifact>, CliError> {
    let mut done: Vec<PathBuf> = Vec::new();
    let mut artifacts = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = atomic_write(&path, bytes) {
            for p in &done {
                let _ = std::fs::remove_file(p);
            }
            return Err(CliError::Io(format!("{}: {e}", path.display())));
        }
        done.push(path);
        artifacts.push(Artifact { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
    }
    Ok(artifacts)
}

/// Run the experiment without touching the file system (except reading an
/// input snapshot).
pub fn execute(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    match cfg.experiment {
        "frame_check" => frame_check(cfg),
        "sim" => sim(cfg),
        "duhamel_check" => duhamel_check(cfg),
        "approx_product" => approx_product(cfg),
        "collision_energy" => run_collision_energy(cfg),
        "census" => census(cfg),
        "no_lattice" => no_lattice(cfg),
        "resonance_demo" => run_resonance_demo(cfg),
        "trap_demo" => run_trap_demo(cfg),
        "scan_k" => run_scan_k(cfg),
        other => Err(CliError::Config(format!("unknown experiment {other}"))),
    }
}

fn positive(kv: &KeyValues, key: &str, default: f64) -> Result<f64, CliError> {
    let v: f64 = kv.get_or(key, default)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(KeyValues::invalid(key, v, "must be positive and finite").into());
    }
    Ok(v)
}

fn count(kv: &KeyValues, key: &str, default: usize, min: usize) -> Result<usize, CliError> {
    let v: usize = kv.get_or(key, default)?;
    if v < min {
        return Err(KeyValues::invalid(key, v, format!("must be at least {min}")).into());
    }
    Ok(v)
}

fn grid_of(kv: &KeyValues, default_t: Option<f64>) -> Result<Grid, CliError> {
    let t = match default_t {
        Some(d) => positive(kv, "T", d)?,
        None => {
            kv.require::<f64>("T")?;
            positive(kv, "T", f64::NAN)?
        }
    };
    let m: usize = kv.get_or("M", Grid::default_size(t))?;
    Ok(Grid::new(t, m)?)
}

fn potential_of(kv: &KeyValues, grid: &Grid) -> Result<SpaceTimePotential, CliError> {
    Ok(PotentialConfig::from_kv(kv)?.build(grid)?)
}

/// `dt` from the config, defaulting to `min(0.1, stability limit)`.
fn step_of(kv: &KeyValues, grid: &Grid, v: &SpaceTimePotential) -> Result<PropagatorConfig, CliError> {
    let limit = PropagatorConfig::step_limit(grid, v);
    let dt = positive(kv, "dt", 0.1f64.min(limit))?;
    let mut cfg = PropagatorConfig::new(dt);
    if let Some(s) = kv.raw("scheme") {
        cfg.scheme = Scheme::parse(s).ok_or_else(|| KeyValues::invalid("scheme", s, "expected strang or duhamel_accumulate"))?;
    }
    cfg.check(v)?;
    Ok(cfg)
}

/// Normalised white noise, one ChaCha8 stream per seed.
fn white_noise(grid: &Grid, k: f64, seed: u64) -> WaveFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WaveFunction::from_fn(grid, k, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).normalized()
}

/// Random combination of the lattice modes `|m| <= modes`.
fn random_smooth(grid: &Grid, k: f64, seed: u64, modes: i64) -> WaveFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, C64)> = (-modes..=modes)
        .map(|m| (m as f64 / grid.t(), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    WaveFunction::from_fn(grid, k, |x| coeffs.iter().map(|(xi, c)| c * C64::from_polar(1.0, xi * x)).sum()).normalized()
}

fn state_of(kv: &KeyValues, grid: &Grid, k: f64, seed: u64) -> Result<WaveFunction, CliError> {
    let kind: String = kv.get_or("state", "low_frequency".to_string())?;
    let f = match kind.as_str() {
        "low_frequency" => low_frequency_state(grid, k),
        "plane_wave" => {
            let xi0: f64 = kv.get_or("xi0", 1.0)?;
            WaveFunction::from_fn(grid, k, |x| C64::from_polar(1.0, xi0 * x)).normalized()
        }
        "gaussian" => {
            let sigma = positive(kv, "sigma", 2.0 * std::f64::consts::PI * grid.kappa())?;
            let xi0: f64 = kv.get_or("xi0", 0.0)?;
            WaveFunction::from_fn(grid, k, |x| C64::from_polar((-0.5 * (x / sigma).powi(2)).exp(), xi0 * x)).normalized()
        }
        "random" => random_smooth(grid, k, seed, kv.get_or("modes", 8i64)?),
        "snapshot" => {
            let path: String = kv.require("snapshot")?;
            let mut f = field::load_snapshot(Path::new(&path))?;
            if f.grid.m() != grid.m() || (f.grid.t() - grid.t()).abs() > 1e-12 * grid.t() {
                return Err(KeyValues::invalid("snapshot", path, "grid differs from T and M").into());
            }
            f.k = k;
            f.with_time(0.0)
        }
        other => {
            return Err(KeyValues::invalid(
                "state",
                other,
                "expected low_frequency, plane_wave, gaussian, random or snapshot",
            )
            .into())
        }
    };
    if !(f.l2_norm() > 0.0) {
        return Err(KeyValues::invalid("state", kind, "initial state has zero norm").into());
    }
    Ok(f)
}

fn k_grid(kv: &KeyValues, lo: f64, hi: f64, n: usize, min_n: usize) -> Result<Vec<f64>, CliError> {
    let lo = positive(kv, "k_min", lo)?;
    let hi = positive(kv, "k_max", hi)?;
    let n = count(kv, "n_k", n, min_n)?;
    if hi < lo {
        return Err(KeyValues::invalid("k_max", hi, "must not be below k_min").into());
    }
    Ok(uniform_k_grid(lo, hi, n))
}

fn csv(name: &str, t: &Table) -> (String, Vec<u8>) {
    (name.to_string(), t.to_csv().into_bytes())
}

fn frame_check(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let ks = kv.list_f64("k")?.unwrap_or_else(|| vec![2.0, 2.5, 3.0, 3.7]);
    let trials = count(kv, "trials", 10, 1)?;
    let mut table = Table::new(&["k", "trial", "frame_rel_error", "reconstruction_rel_error"]);
    let (mut worst_frame, mut worst_rec) = (0.0f64, 0.0f64);
    for &k in &ks {
        let frame = packets::PacketFrame::new(&grid, k)?;
        for trial in 0..trials {
            let f = white_noise(&grid, k, cfg.seed.wrapping_add(trial as u64));
            let c = frame.analyze(&f);
            let fe = c.frame_identity_error(&f);
            let re = frame.synthesize(&c).distance(&f) / f.l2_norm();
            worst_frame = worst_frame.max(fe);
            worst_rec = worst_rec.max(re);
            table.push(vec![k.into(), trial.into(), fe.into(), re.into()]);
        }
    }
    Ok(Output {
        files: vec![csv("frame_check.csv", &table)],
        summary: json!({
            "frame_identity_rel_error": worst_frame,
            "reconstruction_rel_error": worst_rec,
            "trials": trials * ks.len(),
        }),
    })
}

fn series_table(points: &[SeriesPoint]) -> Table {
    let mut t = Table::new(&["t", "deviation", "norm", "energy"]);
    for p in points {
        t.push(vec![p.t.into(), p.deviation.into(), p.norm.into(), p.energy.into()]);
    }
    t
}

fn sim(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let k = positive(kv, "k", 1.0)?;
    let v = potential_of(kv, &grid)?;
    let pc = step_of(kv, &grid, &v)?;
    let horizon = positive(kv, "horizon", evolution::horizon(&grid))?;
    let samples = count(kv, "samples", 64, 1)?;
    let f = state_of(kv, &grid, k, cfg.seed)?;
    let times: Vec<f64> = (0..=samples).map(|i| horizon * i as f64 / samples as f64).collect();
    let (last, series) = match pc.scheme {
        Scheme::Strang => evolve_series(&f, &v, &times, &pc)?,
        Scheme::DuhamelAccumulate => {
            let mut pts = Vec::with_capacity(times.len());
            let mut last = f.clone();
            for &t in &times {
                let u = evolve(&f, &v, 0.0, t, &pc)?;
                let free = evolution::free_propagate(&f, t);
                pts.push(SeriesPoint { t, deviation: u.distance(&free), norm: u.l2_norm(), energy: evolution::energy(&u, &v, t) });
                last = u;
            }
            (last, pts)
        }
    };
    let n0 = f.l2_norm();
    let e0 = series[0].energy;
    let norm_drift = series.iter().map(|p| (p.norm - n0).abs() / n0).fold(0.0, f64::max);
    let energy_drift = series.iter().map(|p| (p.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
    let max_deviation = series.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let mut snapshot = Vec::new();
    field::write_snapshot(&mut snapshot, &last)?;
    let outputs = ["deviation.csv", "final.rwav"];
    let manifest = json!({
        "T": grid.t(),
        "M": grid.m(),
        "k": k,
        "gamma": v.gamma,
        "scheme": pc.scheme.name(),
        "dt": pc.dt,
        "seeds": [cfg.seed],
        "potential": v.label,
        "horizon": horizon,
        "outputs": outputs,
    });
    Ok(Output {
        files: vec![
            csv("deviation.csv", &series_table(&series)),
            ("manifest.json".into(), json_bytes(&manifest)),
            ("final.rwav".into(), snapshot),
        ],
        summary: json!({
            "max_deviation": max_deviation,
            "final_deviation": series.last().map(|p| p.deviation),
            "norm_drift": norm_drift,
            "energy_drift": energy_drift,
            "time_independent": v.is_time_independent(),
        }),
    })
}

fn duhamel_check(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let k = positive(kv, "k", 1.0)?;
    let v = potential_of(kv, &grid)?;
    let pc = step_of(kv, &grid, &v.scaled(2.0))?;
    let t = positive(kv, "t", evolution::horizon(&grid) / 16.0)?;
    let trials = count(kv, "trials", 5, 1)?;
    let modes: i64 = kv.get_or("modes", 8)?;
    let v2 = v.scaled(2.0);
    let err = |f: &WaveFunction, v: &SpaceTimePotential, t: f64| -> Result<f64, CliError> {
        let u = evolve(f, v, 0.0, t, &PropagatorConfig { scheme: Scheme::Strang, ..pc })?;
        Ok(u.distance(&duhamel_first_order(f, v, t, &pc)?))
    };
    let mut table = Table::new(&["trial", "err_t", "err_2t", "err_2v", "ratio_t", "ratio_v"]);
    let (mut rt, mut rv) = (Vec::new(), Vec::new());
    for trial in 0..trials {
        let f = random_smooth(&grid, k, cfg.seed.wrapping_add(trial as u64), modes);
        let (e1, e2, e3) = (err(&f, &v, t)?, err(&f, &v, 2.0 * t)?, err(&f, &v2, t)?);
        let (a, b) = (e2 / e1, e3 / e1);
        rt.push(a);
        rv.push(b);
        table.push(vec![trial.into(), e1.into(), e2.into(), e3.into(), a.into(), b.into()]);
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    Ok(Output {
        files: vec![csv("duhamel.csv", &table)],
        summary: json!({"t": t, "mean_ratio_t": mean(&rt), "mean_ratio_v": mean(&rv), "expected_ratio": 4.0}),
    })
}

fn approx_product(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let k = positive(kv, "k", 1.0)?;
    let v = potential_of(kv, &grid)?;
    let pc = step_of(kv, &grid, &v)?;
    let horizon = positive(kv, "horizon", grid.length())?;
    let f = state_of(kv, &grid, k, cfg.seed)?;
    let ns = kv.list_f64("N")?.unwrap_or_else(|| vec![64.0, 128.0]);
    let mut table = Table::new(&["N", "j", "t", "deviation", "norm"]);
    let mut finals = Vec::new();
    for &n in &ns {
        if !(n >= 1.0 && n.fract() == 0.0) {
            return Err(KeyValues::invalid("N", n, "window counts must be positive integers").into());
        }
        let p = approximation_product(&f, &v, n as usize, horizon, &pc)?;
        for (j, s) in p.series.iter().enumerate() {
            table.push(vec![(n as usize).into(), (j + 1).into(), s.t.into(), s.deviation.into(), s.norm.into()]);
        }
        finals.push(json!({"N": n as usize, "final_deviation": p.final_deviation(), "precondition_met": p.precondition_met}));
    }
    let ratios: Vec<f64> = finals
        .windows(2)
        .map(|w| w[1]["final_deviation"].as_f64().unwrap_or(f64::NAN) / w[0]["final_deviation"].as_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(Output { files: vec![csv("product.csv", &table)], summary: json!({"runs": finals, "successive_ratios": ratios}) })
}

fn run_collision_energy(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let v = potential_of(kv, &grid)?;
    let pc = step_of(kv, &grid, &v)?;
    let ks = k_grid(kv, 2.0, 4.0, 9, 2)?;
    let delta = positive(kv, "delta", 0.5)?;
    let c = positive(kv, "C", 4.0)?;
    let f = state_of(kv, &grid, ks[0], cfg.seed)?;
    let r = collision_energy(&f, &v, &ks, delta, c, &pc)?;
    let mut table = Table::new(&["k", "eta", "q_norm_sqr", "discarded"]);
    for ((&k, &q), &d) in r.ks.iter().zip(&r.norms_sqr).zip(&r.discarded) {
        table.push(vec![k.into(), (1.0 / k).into(), q.into(), d.into()]);
    }
    Ok(Output {
        files: vec![csv("collision_energy.csv", &table)],
        summary: json!({
            "integral": r.integral,
            "max_discarded": r.discarded.iter().copied().fold(0.0, f64::max),
            "delta": delta,
        }),
    })
}

fn census_params(cfg: &ExperimentConfig) -> Result<CensusParams, CliError> {
    let kv = &cfg.kv;
    let kappa: f64 = kv.require("kappa")?;
    let mut p = CensusParams::new(kappa);
    p.delta = positive(kv, "delta", p.delta)?;
    p.c_forward = positive(kv, "C", p.c_forward)?;
    p.c_backward_n = positive(kv, "C_backward", p.c_backward_n)?;
    let (c1, c2) = resonance::default_backward_slopes(p.delta, p.c_forward);
    p.c1 = positive(kv, "c1", c1)?;
    p.c2 = positive(kv, "c2", c2)?;
    p.eps_prime = positive(kv, "eps_prime", p.eps_prime)?;
    p.tau = positive(kv, "tau", p.tau)?;
    p.samples = count(kv, "samples", p.samples, 1)?;
    p.seed = cfg.seed;
    Ok(p)
}

fn census(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let par = census_params(cfg)?;
    let c = census_counts(&par)?;
    let mut summary = json!({
        "kappa": c.kappa,
        "delta": c.delta,
        "c1": c.c1,
        "c2": c.c2,
        "eps_prime": c.eps_prime,
        "samples": c.samples.len(),
        "mean_total": c.mean_total,
        "total_constant": c.total_constant,
        "envelope_constant": c.envelope_constant,
        "envelope_spread": c.envelope_spread,
        "envelope_bins": c.envelope_bins,
        "below_band_excess": c.below_band_excess,
        "peak_offset": c.peak_offset,
        "observation1_constant": c.observation1_constant,
        "gap_constant": c.gap_constant,
    });
    let pairs = kv.get_or("pairs", 0usize)?;
    if pairs > 0 {
        let pr = pair_census(&CensusParams { samples: pairs, ..par.clone() })?;
        summary["pairs"] = json!({
            "fitted_constant": pr.fitted_constant,
            "same_cube_constant": pr.same_cube_constant,
            "far_max": pr.far_max,
            "pairs": pr.pairs,
        });
    }
    if kv.get_or("phase", false)? {
        let ph = phase_average_probe(&par)?;
        summary["phase"] = json!({
            "resonant_mean": ph.resonant_mean,
            "nonresonant_mean": ph.nonresonant_mean,
            "resonant": ph.resonant,
            "nonresonant": ph.nonresonant,
        });
    }
    Ok(Output { files: vec![csv("census.csv", &census_table(&c))], summary })
}

fn no_lattice(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let mut census = census_params(cfg)?;
    census.samples = 0;
    let mut par = NoLatticeParams::new(census.kappa);
    par.census = census;
    par.upsilon = positive(kv, "upsilon", par.upsilon)?;
    par.eps = positive(kv, "eps", par.eps)?;
    par.separation = positive(kv, "separation", par.separation)?;
    par.base_tubes = count(kv, "base_tubes", par.base_tubes, 1)?;
    let r = no_lattice_census(&par)?;
    let report = json!({
        "kappa": r.kappa,
        "upsilon": par.upsilon,
        "eps": par.eps,
        "separation": par.separation,
        "max_family": r.max_family,
        "scale": r.scale,
        "fitted_constant": r.fitted_constant,
        "control_max": r.control_max,
        "configurations": r.configurations,
    });
    Ok(Output { files: vec![("no_lattice.json".into(), json_bytes(&report))], summary: report })
}

fn run_resonance_demo(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, Some(100.0))?;
    let gamma = positive(kv, "gamma", 0.75)?;
    let k = positive(kv, "k", 1.0)?;
    let pc = PropagatorConfig::new(positive(kv, "dt", 0.05)?);
    let points = count(kv, "points", 64, 1)?;
    let windows = count(kv, "windows", 8, 1)? as u64;
    let r = resonance_demo(&grid, gamma, k, &pc, points, windows)?;
    let mut table = Table::new(&["t", "model", "pde"]);
    for ((&t, &m), &p) in r.times.iter().zip(&r.model_curve).zip(&r.pde_curve) {
        table.push(vec![Cell::Float(t), Cell::Float(m), Cell::Float(p)]);
    }
    Ok(Output {
        files: vec![("demo.json".into(), json_bytes(&r.to_json())), csv("demo.csv", &table)],
        summary: json!({
            "amplitude": r.amplitude,
            "max_gap": r.max_gap,
            "transfer_error": r.transfer_error,
            "leak_max": r.leak_max,
        }),
    })
}

fn run_trap_demo(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let mut p = TrapParams::new(positive(kv, "T", 256.0)?, positive(kv, "gamma", 0.8)?, kv.get_or("lambda", 30.0)?);
    p.k = positive(kv, "k", p.k)?;
    p.dt = positive(kv, "dt", p.dt)?;
    p.tau = positive(kv, "tau", p.tau)?;
    p.max_iterations = count(kv, "max_iterations", p.max_iterations, 1)?;
    let report = match trap_demo(&p) {
        Ok(r) => json!({
            "bound_state": true,
            "energy": r.energy,
            "iterations": r.iterations,
            "initial_moment": r.initial_moment,
            "trapped_moment": r.trapped_moment,
            "free_moment": r.free_moment,
            "trapped_ratio": r.trapped_ratio,
            "free_ratio": r.free_ratio,
            "norm_drift": r.norm_drift,
        }),
        Err(ResonanceError::NoBoundState { energy }) => json!({"bound_state": false, "energy": energy}),
        Err(e) => return Err(e.into()),
    };
    Ok(Output { files: vec![("trap.json".into(), json_bytes(&report))], summary: report })
}

fn run_scan_k(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kv = &cfg.kv;
    let grid = grid_of(kv, None)?;
    let v = potential_of(kv, &grid)?;
    let pc = step_of(kv, &grid, &v)?;
    let ks = k_grid(kv, 0.3, 0.8, 33, 9)?;
    let horizon = positive(kv, "horizon", evolution::horizon(&grid))?;
    let threshold = positive(kv, "threshold", 0.1)?;
    let f = state_of(kv, &grid, ks[0], cfg.seed)?;
    let r = scan_k(&f, &v, &ks, horizon, &pc, threshold)?;
    let (kmax, dmax) = r.argmax();
    Ok(Output {
        files: vec![csv("scan.csv", &scan_table(&r))],
        summary: json!({
            "median": r.median,
            "argmax_k": kmax,
            "max_deviation": dmax,
            "threshold": threshold,
            "resonant_fraction": r.resonant_fraction,
            "resonant": r.resonant,
        }),
    })
}

/// `list_experiments` as CSV: name, required, optional, outputs, anchor.
pub fn experiments_table() -> Table {
    let mut t = Table::new(&["name", "required", "optional", "outputs", "anchor"]);
    for e in EXPERIMENTS.iter() {
        t.push(vec![
            e.name.into(),
            e.required.join(" ").as_str().into(),
            e.optional.join(" ").as_str().into(),
            e.outputs.join(" ").as_str().into(),
            e.anchor.into(),
        ]);
    }
    t
}
