//! Experiment harness: sweeps over (topology, period, seed), deterministic
//! execution, and CSV emission.

mod check;
mod cli;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, RunConfig, RunError, StepSize, Trajectory};
use crate::io::{fmt_f64, IoError};
use crate::metrics::MetricRecord;
use crate::problem::{self, DataSpec, Dataset};
use crate::topology::{self, MixingMatrix, Period, TopologyKind};

pub use check::{run_checks, CheckOutcome};
pub use cli::cli_run;

pub const CSV_HEADER: &str = "topology,n,d,tau,seed,alpha,k,stationarity,consensus,tracking_residual,fbar";
/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "GTPGA_THREADS";

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DIVERGED: i32 = 3;
    pub const IO: i32 = 4;
}

/// Cross product of topologies × periods × seeds over a base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub taus: Vec<Period>,
    pub seeds: Vec<u64>,
    pub topologies: Vec<TopologyKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.taus.is_empty() || self.seeds.is_empty() || self.topologies.is_empty() {
            return Err(RunError::Config("sweep needs at least one period, seed, and topology".into()));
        }
        self.base.validate()
    }

    /// Configurations in output order: topology, then period, then seed.
    pub fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &topology in &self.topologies {
            for &tau in &self.taus {
                for &seed in &self.seeds {
                    out.push(RunConfig { topology, tau, seed, ..self.base.clone() });
                }
            }
        }
        out
    }
}

/// Result of one sweep entry. A diverged run keeps its partial trajectory.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub trajectory: Trajectory,
    pub diverged: Option<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
    pub lipschitz: Option<f64>,
}

impl SweepOutcome {
    pub fn any_diverged(&self) -> bool {
        self.entries.iter().any(|e| e.diverged.is_some())
    }
}

/// Thread count from `GTPGA_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&t| t > 0)
}

/// Runs every configuration of `spec` on the shared dataset. Entries may run
/// in parallel; each draws only from streams keyed by its own seed, so the
/// result does not depend on ordering or thread count.
pub fn run_sweep(spec: &SweepSpec, ds: &Dataset, threads: Option<usize>) -> Result<SweepOutcome, RunError> {
    spec.validate()?;
    let needs_l = !matches!(spec.base.alpha, StepSize::Fixed(_));
    let lipschitz = if needs_l { Some(problem::smoothness_constant(ds)?) } else { None };
    let mut mixing: BTreeMap<&'static str, MixingMatrix> = BTreeMap::new();
    for &kind in &spec.topologies {
        let w = topology::metropolis_weights(&topology::build_topology(kind, spec.base.n)?)?;
        mixing.insert(kind.as_str(), w);
    }
    let configs = spec.configs();
    let job = |cfg: &RunConfig| -> Result<SweepEntry, RunError> {
        let w = &mixing[cfg.topology.as_str()];
        let alpha = cfg.resolve_alpha(w.beta(), || Ok(lipschitz.expect("computed when needed")))?;
        match engine::run_with_mixing(cfg, ds, w, alpha, None) {
            Ok(trajectory) => Ok(SweepEntry { trajectory, diverged: None }),
            Err(RunError::Diverged { k, max_abs, partial }) => {
                Ok(SweepEntry { trajectory: *partial, diverged: Some((k, max_abs)) })
            }
            Err(e) => Err(e),
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let entries = pool.install(|| configs.par_iter().map(job).collect::<Result<Vec<_>, _>>())?;
    Ok(SweepOutcome { entries, lipschitz })
}

fn record_row(cfg: &RunConfig, alpha: f64, r: &MetricRecord, seed: &str) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        cfg.topology,
        cfg.n,
        cfg.d,
        cfg.tau,
        seed,
        fmt_f64(alpha),
        r.k,
        fmt_f64(r.stationarity),
        fmt_f64(r.consensus),
        fmt_f64(r.tracking_residual),
        fmt_f64(r.fbar)
    )
}

/// CSV text for a list of trajectories, in the given order.
pub fn trajectories_csv<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in trajs {
        let seed = t.config.seed.to_string();
        for r in &t.records {
            out.push_str(&record_row(&t.config, t.alpha, r, &seed));
            out.push('\n');
        }
    }
    out
}

/// Per-(topology, period) curves averaged over seeds, same schema with
/// `seed = mean`. Only iterations logged by every seed are averaged.
pub fn mean_csv(trajs: &[&Trajectory]) -> String {
    let mut groups: Vec<((TopologyKind, Period), Vec<&Trajectory>)> = Vec::new();
    for &t in trajs {
        let key = (t.config.topology, t.config.tau);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(t),
            None => groups.push((key, vec![t])),
        }
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (_, members) in groups {
        let len = members.iter().map(|t| t.records.len()).min().unwrap_or(0);
        let count = members.len() as f64;
        let alpha = members.iter().map(|t| t.alpha).sum::<f64>() / count;
        for idx in 0..len {
            let mut acc = MetricRecord { k: members[0].records[idx].k, stationarity: 0.0, consensus: 0.0, tracking_residual: 0.0, fbar: 0.0 };
            for t in &members {
                let r = &t.records[idx];
                acc.stationarity += r.stationarity;
                acc.consensus += r.consensus;
                acc.tracking_residual += r.tracking_residual;
                acc.fbar += r.fbar;
            }
            acc.stationarity /= count;
            acc.consensus /= count;
            acc.tracking_residual /= count;
            acc.fbar /= count;
            out.push_str(&record_row(&members[0].config, alpha, &acc, "mean"));
            out.push('\n');
        }
    }
    out
}

pub fn emit_csv<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>, path: &Path) -> Result<(), IoError> {
    fs::write(path, trajectories_csv(trajs)).map_err(|e| IoError::fs(path, e))
}

/// `ring.csv` → `ring.<suffix>`.
pub fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

#[derive(Debug, Serialize)]
struct SweepMeta<'a> {
    data: &'a DataSpec,
    base: &'a RunConfig,
    lipschitz: Option<f64>,
    /// True when all runs in the sweep used the same stepsize.
    alpha_shared: bool,
    runs: Vec<RunMeta>,
}

#[derive(Debug, Serialize)]
struct RunMeta {
    topology: TopologyKind,
    tau: Period,
    seed: u64,
    alpha: f64,
    beta: f64,
    config_hash: String,
    diverged_at: Option<u64>,
}

/// Writes the sweep CSV, the seed-mean CSV, and a JSON metadata file.
pub fn write_sweep(outcome: &SweepOutcome, spec: &SweepSpec, data: &DataSpec, out: &Path) -> Result<(), IoError> {
    let trajs: Vec<&Trajectory> = outcome.entries.iter().map(|e| &e.trajectory).collect();
    emit_csv(trajs.iter().copied(), out)?;
    let mean_path = companion_path(out, "mean.csv");
    fs::write(&mean_path, mean_csv(&trajs)).map_err(|e| IoError::fs(&mean_path, e))?;
    let first_alpha = trajs.first().map(|t| t.alpha);
    let meta = SweepMeta {
        data,
        base: &spec.base,
        lipschitz: outcome.lipschitz,
        alpha_shared: trajs.iter().all(|t| Some(t.alpha) == first_alpha),
        runs: outcome
            .entries
            .iter()
            .map(|e| RunMeta {
                topology: e.trajectory.config.topology,
                tau: e.trajectory.config.tau,
                seed: e.trajectory.config.seed,
                alpha: e.trajectory.alpha,
                beta: e.trajectory.beta,
                config_hash: engine::config_hash(&e.trajectory.config, data),
                diverged_at: e.diverged.map(|(k, _)| k),
            })
            .collect(),
    };
    crate::io::write_json(&companion_path(out, "meta.json"), &meta)
}
