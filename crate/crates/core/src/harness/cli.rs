//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use super::{exit, run_checks, run_sweep, thread_cap, trajectories_csv, write_sweep, SweepSpec};
use crate::engine::{self, Algorithm, NetworkState, RunConfig, RunError, StepSize};
use crate::io::{self, IoError};
use crate::problem::{self, DataSpec, Dataset, NoiseModel, ProblemError, Regularizer};
use crate::theory::{self, BoundParams};
use crate::topology::{self, Period, TopologyKind};

#[derive(Debug, Parser)]
#[command(name = "gtpga", version, about = "Gradient tracking with periodic global averaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute one configuration and write its metric trajectory as CSV.
    Run(RunArgs),
    /// Execute topology × period × seed combinations into one CSV.
    Sweep(SweepArgs),
    /// Print agent count, edge count, and spectral gap of a topology.
    TopologyInfo(TopologyArgs),
    /// Print stepsize and rate-bound tables as CSV.
    Theory(TheoryArgs),
    /// Run the built-in invariant suite.
    Check,
}

/// Flags shared by `run` and `sweep`; each overrides the JSON config file.
#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON file with optional `data`, `run`, and `sweep` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load the dataset from an exported directory instead of generating it.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Export the dataset used by this invocation to a directory.
    #[arg(long)]
    export_data: Option<PathBuf>,
    /// Number of agents.
    #[arg(long)]
    n: Option<usize>,
    /// Problem dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Samples per agent.
    #[arg(long)]
    m: Option<usize>,
    /// Regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Standard deviation of the label noise.
    #[arg(long)]
    label_noise_std: Option<f64>,
    /// Seed for dataset generation, separate from the run seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// `smooth` (t²/(1+t²)) or `literal` (t/(1+t)).
    #[arg(long)]
    regularizer: Option<Regularizer>,
    /// Positive number, `auto` (theorem bound), or `scaled` (factor/(2L)).
    #[arg(long)]
    alpha: Option<StepSize>,
    /// Multiplier for the `scaled` and infinite-period `auto` stepsizes.
    #[arg(long)]
    alpha_factor: Option<f64>,
    /// Iterations K.
    #[arg(long)]
    iters: Option<u64>,
    /// `additive` or `minibatch`.
    #[arg(long)]
    noise: Option<String>,
    /// Additive noise level; E‖∇F − ∇f‖² = σ².
    #[arg(long)]
    sigma: Option<f64>,
    /// Rows sampled per minibatch gradient.
    #[arg(long)]
    batch: Option<usize>,
    /// `gt-pga` or `dgd`.
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Log every this many iterations (the last one is always logged).
    #[arg(long)]
    cadence: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// ring, meshgrid2d, star, hypercube, or complete.
    #[arg(long)]
    topology: Option<TopologyKind>,
    /// Global averaging period; `inf` disables it.
    #[arg(long)]
    tau: Option<Period>,
    /// Seed for the stochastic gradients.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save the final state to this directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a saved state.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated topologies.
    #[arg(long, value_delimiter = ',')]
    topology: Option<Vec<TopologyKind>>,
    /// Comma-separated periods, e.g. `20,50,inf`.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<Period>>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output CSV; `<stem>.mean.csv` and `<stem>.meta.json` are written alongside.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TopologyArgs {
    #[arg(long)]
    topology: TopologyKind,
    #[arg(long)]
    n: usize,
    /// Write the Metropolis weight matrix as CSV.
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Write the 0/1 adjacency matrix as CSV.
    #[arg(long)]
    adjacency_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    /// Smoothness constant; estimated from the generated dataset when omitted.
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Spectral gap; computed from `--topology` when omitted.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value = "ring")]
    topology: TopologyKind,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Horizon K.
    #[arg(long, default_value_t = 2000)]
    iters: u64,
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,200")]
    tau: Vec<u64>,
    /// Six comma-separated γ constants.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    data: Option<DataSpec>,
    run: Option<RunConfig>,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    taus: Option<Vec<Period>>,
    seeds: Option<Vec<u64>>,
    topologies: Option<Vec<TopologyKind>>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Diverged(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Diverged(_) => exit::DIVERGED,
            CliError::Failed(_) => exit::FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Diverged(m) | CliError::Failed(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Io(io) => io.into(),
            RunError::Diverged { .. } => CliError::Diverged(e.to_string()),
            RunError::Engine(engine::EngineError::Problem(p)) => p.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Resolved data and run settings: defaults < config file < flags.
fn resolve(common: &CommonArgs) -> Result<(DataSpec, RunConfig, ConfigFile), CliError> {
    let mut file: ConfigFile = match &common.config {
        Some(p) => io::read_json(p).map_err(|e| match e {
            IoError::Fs { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        })?,
        None => ConfigFile::default(),
    };
    let mut data = file.data.take().unwrap_or_default();
    let mut cfg = file.run.take().unwrap_or_default();
    if let Some(v) = common.n {
        data.n = v;
    }
    if let Some(v) = common.d {
        data.d = v;
    }
    if let Some(v) = common.m {
        data.m = v;
    }
    if let Some(v) = common.lambda {
        data.lambda = v;
    }
    if let Some(v) = common.label_noise_std {
        data.label_noise_std = v;
    }
    if let Some(v) = common.data_seed {
        data.seed = v;
    }
    if let Some(v) = common.regularizer {
        data.regularizer = v;
    }
    if let Some(v) = common.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = common.alpha_factor {
        cfg.alpha_factor = v;
    }
    if let Some(v) = common.iters {
        cfg.iters = v;
    }
    if let Some(v) = common.algorithm {
        cfg.algorithm = v;
    }
    if let Some(v) = common.cadence {
        cfg.cadence = v;
    }
    let mode = common.noise.as_deref().unwrap_or(match cfg.noise {
        NoiseModel::Additive { .. } => "additive",
        NoiseModel::Minibatch { .. } => "minibatch",
    });
    cfg.noise = match mode {
        "additive" => {
            let current = match cfg.noise {
                NoiseModel::Additive { sigma } => sigma,
                NoiseModel::Minibatch { .. } => 1.0,
            };
            if common.batch.is_some() {
                return Err(CliError::Usage("--batch only applies to --noise minibatch".into()));
            }
            NoiseModel::Additive { sigma: common.sigma.unwrap_or(current) }
        }
        "minibatch" => {
            let current = match cfg.noise {
                NoiseModel::Minibatch { batch } => Some(batch),
                NoiseModel::Additive { .. } => None,
            };
            if common.sigma.is_some() {
                return Err(CliError::Usage("--sigma only applies to --noise additive".into()));
            }
            let batch = common
                .batch
                .or(current)
                .ok_or_else(|| CliError::Usage("--noise minibatch needs --batch".into()))?;
            NoiseModel::Minibatch { batch }
        }
        other => return Err(CliError::Usage(format!("unknown noise mode `{other}` (expected additive or minibatch)"))),
    };
    Ok((data, cfg, file))
}

fn load_dataset(common: &CommonArgs, spec: &mut DataSpec) -> Result<Dataset, CliError> {
    let ds = match &common.data {
        Some(dir) => {
            let ds = Dataset::import(dir)?;
            *spec = ds.spec().clone();
            ds
        }
        None => problem::generate_dataset(spec)?,
    };
    if let Some(dir) = &common.export_data {
        ds.export(dir)?;
    }
    Ok(ds)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (mut data, mut cfg, _) = resolve(&args.common)?;
    if let Some(v) = args.topology {
        cfg.topology = v;
    }
    if let Some(v) = args.tau {
        cfg.tau = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    let ds = load_dataset(&args.common, &mut data)?;
    cfg.n = data.n;
    cfg.d = data.d;
    let hash = engine::config_hash(&cfg, &data);
    let start = match &args.resume {
        Some(dir) => {
            let (state, manifest) = NetworkState::load_checkpoint(dir)?;
            if manifest.config_hash != hash {
                return Err(CliError::Usage(format!(
                    "checkpoint in {} was written by a different configuration",
                    dir.display()
                )));
            }
            Some(state)
        }
        None => None,
    };
    match engine::run_from(&cfg, &ds, start) {
        Ok(traj) => {
            write_output(args.out.as_deref(), &trajectories_csv([&traj]))?;
            if let Some(dir) = &args.checkpoint {
                traj.final_state.save_checkpoint(dir, &hash)?;
            }
            Ok(())
        }
        Err(RunError::Diverged { k, max_abs, partial }) => {
            write_output(args.out.as_deref(), &trajectories_csv([partial.as_ref()]))?;
            Err(CliError::Diverged(format!("iterates diverged at k = {k} (max |entry| = {max_abs:e})")))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let (mut data, base, file) = resolve(&args.common)?;
    let section = file.sweep.unwrap_or_default();
    let ds = load_dataset(&args.common, &mut data)?;
    let base = RunConfig { n: data.n, d: data.d, ..base };
    let spec = SweepSpec {
        taus: args.tau.clone().or(section.taus).unwrap_or_else(|| vec![base.tau]),
        seeds: args.seeds.clone().or(section.seeds).unwrap_or_else(|| vec![base.seed]),
        topologies: args.topology.clone().or(section.topologies).unwrap_or_else(|| vec![base.topology]),
        base,
    };
    let outcome = run_sweep(&spec, &ds, thread_cap())?;
    write_sweep(&outcome, &spec, &data, &args.out)?;
    if let Some(e) = outcome.entries.iter().find(|e| e.diverged.is_some()) {
        let (k, max_abs) = e.diverged.expect("checked");
        let c = &e.trajectory.config;
        return Err(CliError::Diverged(format!(
            "run topology={} tau={} seed={} diverged at k = {k} (max |entry| = {max_abs:e}); partial results written",
            c.topology, c.tau, c.seed
        )));
    }
    Ok(())
}

fn cmd_topology(args: &TopologyArgs) -> Result<(), CliError> {
    let g = topology::build_topology(args.topology, args.n).map_err(|e| CliError::Usage(e.to_string()))?;
    let w = topology::metropolis_weights(&g).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("topology: {}", g.kind());
    println!("n: {}", g.n());
    println!("edges: {}", g.edge_count());
    println!("beta: {}", w.beta());
    if let Some(p) = &args.weights_out {
        io::write_matrix_csv(p, w.weights())?;
    }
    if let Some(p) = &args.adjacency_out {
        io::write_matrix_csv(p, &g.adjacency())?;
    }
    Ok(())
}

fn cmd_theory(args: &TheoryArgs) -> Result<(), CliError> {
    let beta = match args.beta {
        Some(b) => b,
        None => {
            let g = topology::build_topology(args.topology, args.n).map_err(|e| CliError::Usage(e.to_string()))?;
            topology::metropolis_weights(&g).map_err(|e| CliError::Usage(e.to_string()))?.beta()
        }
    };
    let lipschitz = match args.lipschitz {
        Some(l) => l,
        None => {
            let spec = DataSpec { n: args.n, d: args.d, m: args.m, lambda: args.lambda, seed: args.data_seed, ..DataSpec::default() };
            problem::smoothness_constant(&problem::generate_dataset(&spec)?)?
        }
    };
    let mut bp = BoundParams::new(lipschitz, beta, args.tau.first().copied().unwrap_or(2), args.n, args.sigma, args.iters);
    if let Some(g) = &args.gammas {
        bp.gammas = g
            .as_slice()
            .try_into()
            .map_err(|_| CliError::Usage(format!("--gammas needs 6 values, got {}", g.len())))?;
    }
    let rows = theory::tau_tradeoff_table(&bp, &args.tau).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::from("tau,stepsize_bound,corollary_stepsize,term1,term2,term3,total\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.tau,
            io::fmt_f64(r.stepsize_bound),
            io::fmt_f64(r.corollary_stepsize),
            io::fmt_f64(r.bound.term1),
            io::fmt_f64(r.bound.term2),
            io::fmt_f64(r.bound.term3),
            io::fmt_f64(r.bound.total)
        ));
        if let Some(w) = theory::corollary_regime_warning(&BoundParams { tau: r.tau, ..bp.clone() }) {
            eprintln!("warning: tau={}: {w}", r.tau);
        }
    }
    eprintln!("# L = {lipschitz}, beta = {beta}, n = {}, sigma = {}, K = {}", args.n, args.sigma, args.iters);
    write_output(None, &out)
}

fn cmd_check() -> Result<(), CliError> {
    let results = run_checks();
    for c in &results {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} check(s) failed")));
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::TopologyInfo(a) => cmd_topology(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Check => cmd_check(),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
