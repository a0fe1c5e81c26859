//! Synchronous simulation of GT-PGA and the DGD baseline.
//!
//! Stacked form of one GT-PGA step, with `M = W^(k)` from
//! [`effective_mixing`]:
//!
//! ```text
//! x⁺ = M (x − α g)
//! g⁺ = M g + ∇F(x⁺; ξ⁺) − ∇F(x; ξ)
//! ```
//!
//! Static-topology gradient tracking is the `tau = inf` case and gradient
//! tracking with local updates is `W = I` with a finite period.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::{self, IoError};
use crate::linalg::Matrix;
use crate::metrics::{self, MetricRecord};
use crate::problem::{self, DataSpec, Dataset, LocalObjectives, NoiseModel, ProblemError};
use crate::rng;
use crate::theory::{self, TheoryError};
use crate::topology::{self, effective_mixing, MixingMatrix, Period, TopologyError, TopologyKind};

/// Any entry above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
pub const DEFAULT_ALPHA_FACTOR: f64 = 0.1;
const CHECKPOINT_FORMAT: &str = "gtpga-checkpoint-v1";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("iterates diverged at k = {k} (max |entry| = {max_abs:e})")]
    Diverged { k: u64, max_abs: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("stepsize must be positive and finite, got {0}")]
    BadStepsize(f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Engine(EngineError),
    #[error("iterates diverged at k = {k} (max |entry| = {max_abs:e})")]
    Diverged { k: u64, max_abs: f64, partial: Box<Trajectory> },
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<ProblemError> for RunError {
    fn from(e: ProblemError) -> Self {
        RunError::Engine(EngineError::Problem(e))
    }
}

/// Stacked agent variables; row `i` belongs to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Matrix,
    /// Gradient-tracking variables.
    pub g: Matrix,
    /// `∇F_i(x_i^(k); ξ_i^(k))`, needed by the next tracking update.
    pub grad_prev: Matrix,
    pub k: u64,
}

impl NetworkState {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    fn check_finite(&self) -> Result<(), EngineError> {
        let max_abs = self.x.max_abs().max(self.g.max_abs()).max(self.grad_prev.max_abs());
        if !(max_abs <= DIVERGENCE_LIMIT) {
            return Err(EngineError::Diverged { k: self.k, max_abs });
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, dir: &Path, config_hash: &str) -> Result<(), IoError> {
        std::fs::create_dir_all(dir).map_err(|e| IoError::fs(dir, e))?;
        io::write_matrix_csv(&dir.join("x.csv"), &self.x)?;
        io::write_matrix_csv(&dir.join("g.csv"), &self.g)?;
        io::write_matrix_csv(&dir.join("grad_prev.csv"), &self.grad_prev)?;
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.to_string(),
            k: self.k,
            n: self.n(),
            d: self.d(),
            config_hash: config_hash.to_string(),
        };
        io::write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load_checkpoint(dir: &Path) -> Result<(Self, CheckpointManifest), RunError> {
        let manifest: CheckpointManifest = io::read_json(&dir.join("manifest.json"))?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(RunError::Config(format!("unsupported checkpoint format `{}`", manifest.format)));
        }
        let x = io::read_matrix_csv(&dir.join("x.csv"))?;
        let g = io::read_matrix_csv(&dir.join("g.csv"))?;
        let grad_prev = io::read_matrix_csv(&dir.join("grad_prev.csv"))?;
        let shape = (manifest.n, manifest.d);
        for (name, m) in [("x", &x), ("g", &g), ("grad_prev", &grad_prev)] {
            if (m.rows(), m.cols()) != shape {
                return Err(RunError::Config(format!(
                    "checkpoint {name} is {}x{}, manifest says {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        Ok((Self { x, g, grad_prev, k: manifest.k }, manifest))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub k: u64,
    pub n: usize,
    pub d: usize,
    pub config_hash: String,
}

fn stochastic_gradients<O: LocalObjectives + ?Sized>(
    obj: &O,
    x: &Matrix,
    noise: &NoiseModel,
    seed: u64,
    k: u64,
) -> Result<Matrix, ProblemError> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let mut stream = rng::gradient_stream(seed, i, k);
        let g = obj.stochastic_gradient(i, x.row(i), noise, &mut stream)?;
        out.row_mut(i).copy_from_slice(&g);
    }
    Ok(out)
}

/// `x = x0` (zeros if `None`), `g = ∇F(x0; ξ⁰)` drawn from the `(i, 0)` streams, `k = 0`.
pub fn init_state<O: LocalObjectives + ?Sized>(
    obj: &O,
    x0: Option<&Matrix>,
    noise: &NoiseModel,
    seed: u64,
) -> Result<NetworkState, EngineError> {
    let (n, d) = (obj.agents(), obj.dim());
    let x = match x0 {
        Some(m) if (m.rows(), m.cols()) != (n, d) => {
            return Err(EngineError::Dimension(format!(
                "initial iterate is {}x{}, objective needs {n}x{d}",
                m.rows(),
                m.cols()
            )))
        }
        Some(m) => m.clone(),
        None => Matrix::zeros(n, d),
    };
    if let Some(m) = obj.local_samples() {
        noise.validate(m)?;
    }
    let grad = stochastic_gradients(obj, &x, noise, seed, 0)?;
    let st = NetworkState { x, g: grad.clone(), grad_prev: grad, k: 0 };
    st.check_finite()?;
    Ok(st)
}

fn check_alpha(alpha: f64) -> Result<(), EngineError> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(EngineError::BadStepsize(alpha))
    }
}

/// One GT-PGA iteration in place.
pub fn gt_pga_step<O: LocalObjectives + ?Sized>(
    st: &mut NetworkState,
    w: &MixingMatrix,
    tau: Period,
    alpha: f64,
    obj: &O,
    noise: &NoiseModel,
    seed: u64,
) -> Result<(), EngineError> {
    check_alpha(alpha)?;
    let mix = effective_mixing(st.k, tau, w);
    let x_next = mix.apply(&st.x.sub_scaled(alpha, &st.g));
    let grad_next = stochastic_gradients(obj, &x_next, noise, seed, st.k + 1)?;
    let g_next = mix.apply(&st.g).add(&grad_next).sub(&st.grad_prev);
    st.x = x_next;
    st.g = g_next;
    st.grad_prev = grad_next;
    st.k += 1;
    st.check_finite()
}

/// One DGD iteration in place: `x⁺ = W (x − α ∇F(x; ξ))`. The tracking
/// variable mirrors the current stochastic gradient and plays no role.
pub fn dgd_step<O: LocalObjectives + ?Sized>(
    st: &mut NetworkState,
    w: &MixingMatrix,
    alpha: f64,
    obj: &O,
    noise: &NoiseModel,
    seed: u64,
) -> Result<(), EngineError> {
    check_alpha(alpha)?;
    let x_next = w.weights().matmul(&st.x.sub_scaled(alpha, &st.grad_prev));
    let grad_next = stochastic_gradients(obj, &x_next, noise, seed, st.k + 1)?;
    st.x = x_next;
    st.g = grad_next.clone();
    st.grad_prev = grad_next;
    st.k += 1;
    st.check_finite()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Algorithm {
    #[default]
    #[serde(rename = "gt-pga")]
    GtPga,
    #[serde(rename = "dgd")]
    Dgd,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::GtPga => "gt-pga",
            Algorithm::Dgd => "dgd",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gt-pga" | "gtpga" | "gt" => Ok(Algorithm::GtPga),
            "dgd" => Ok(Algorithm::Dgd),
            other => Err(format!("unknown algorithm `{other}` (expected gt-pga or dgd)")),
        }
    }
}

/// How the stepsize is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSize {
    Fixed(f64),
    /// The convergence-theorem bound for finite `tau ≥ 2`, otherwise `factor/(2L)`.
    Auto,
    /// `factor/(2L)` for every period, so a sweep shares one stepsize.
    #[default]
    Scaled,
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Fixed(a) => write!(f, "{a}"),
            StepSize::Auto => f.write_str("auto"),
            StepSize::Scaled => f.write_str("scaled"),
        }
    }
}

impl FromStr for StepSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "auto" => Ok(StepSize::Auto),
            "scaled" => Ok(StepSize::Scaled),
            t => match t.parse::<f64>() {
                Ok(a) if a > 0.0 && a.is_finite() => Ok(StepSize::Fixed(a)),
                _ => Err(format!("invalid stepsize `{s}` (expected a positive number, `auto`, or `scaled`)")),
            },
        }
    }
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StepSize::Fixed(a) => s.serialize_f64(*a),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => a.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologyKind,
    pub n: usize,
    pub d: usize,
    pub tau: Period,
    pub alpha: StepSize,
    /// Multiplier for the `factor/(2L)` stepsize rules.
    pub alpha_factor: f64,
    pub iters: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub algorithm: Algorithm,
    /// Log every `cadence` iterations (plus the final one).
    pub cadence: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            topology: TopologyKind::Ring,
            n: 64,
            d: 20,
            tau: Period::Never,
            alpha: StepSize::Scaled,
            alpha_factor: DEFAULT_ALPHA_FACTOR,
            iters: 2000,
            seed: 1,
            noise: NoiseModel::default(),
            algorithm: Algorithm::GtPga,
            cadence: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.iters < 1 {
            return Err(RunError::Config("iteration budget must be at least 1".into()));
        }
        if self.cadence < 1 {
            return Err(RunError::Config("metric cadence must be at least 1".into()));
        }
        if let StepSize::Fixed(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(RunError::Config(format!("stepsize must be positive, got {a}")));
            }
        }
        if !(self.alpha_factor > 0.0 && self.alpha_factor.is_finite()) {
            return Err(RunError::Config(format!("alpha factor must be positive, got {}", self.alpha_factor)));
        }
        if let Period::Every(0) = self.tau {
            return Err(RunError::Config("period must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves the stepsize. `lipschitz` is only evaluated when needed.
    pub fn resolve_alpha(&self, beta: f64, lipschitz: impl FnOnce() -> Result<f64, RunError>) -> Result<f64, RunError> {
        match self.alpha {
            StepSize::Fixed(a) => Ok(a),
            StepSize::Scaled => Ok(self.alpha_factor / (2.0 * lipschitz()?)),
            StepSize::Auto => match self.tau {
                Period::Every(t) if t >= 2 => Ok(theory::stepsize_bound(lipschitz()?, beta, t)?),
                _ => Ok(self.alpha_factor / (2.0 * lipschitz()?)),
            },
        }
    }
}

/// Hash of everything that determines iterates, except the iteration budget
/// and logging cadence, so a checkpoint can be resumed with a longer budget.
pub fn config_hash(cfg: &RunConfig, data: &DataSpec) -> String {
    let canon = RunConfig { iters: 0, cadence: 1, ..cfg.clone() };
    let text = serde_json::to_string(&(canon, data)).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: RunConfig,
    pub alpha: f64,
    pub beta: f64,
    pub records: Vec<MetricRecord>,
    pub final_state: NetworkState,
}

/// Fully resolved parameters of one simulation.
#[derive(Debug, Clone, Copy)]
pub struct Schedule<'a> {
    pub mixing: &'a MixingMatrix,
    pub tau: Period,
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Schedule<'_> {
    pub fn step<O: LocalObjectives + ?Sized>(&self, st: &mut NetworkState, obj: &O) -> Result<(), EngineError> {
        match self.algorithm {
            Algorithm::GtPga => gt_pga_step(st, self.mixing, self.tau, self.alpha, obj, &self.noise, self.seed),
            Algorithm::Dgd => dgd_step(st, self.mixing, self.alpha, obj, &self.noise, self.seed),
        }
    }

    /// Advances `st` to iteration `until`, logging at `k ≡ 0 (mod cadence)`
    /// and at `until`. The starting iteration is logged only if `log_start`.
    /// On divergence the records gathered so far are returned with the error.
    pub fn advance<O: LocalObjectives + ?Sized>(
        &self,
        st: &mut NetworkState,
        obj: &O,
        until: u64,
        cadence: u64,
        log_start: bool,
    ) -> Result<Vec<MetricRecord>, (Vec<MetricRecord>, EngineError)> {
        let cadence = cadence.max(1);
        let mut records = Vec::new();
        if log_start {
            records.push(metrics::record(obj, st));
        }
        while st.k < until {
            if let Err(e) = self.step(st, obj) {
                return Err((records, e));
            }
            if st.k.is_multiple_of(cadence) || st.k == until {
                records.push(metrics::record(obj, st));
            }
        }
        Ok(records)
    }
}

/// Runs `cfg` on `ds` from a fresh state.
pub fn run(cfg: &RunConfig, ds: &Dataset) -> Result<Trajectory, RunError> {
    run_from(cfg, ds, None)
}

/// Runs `cfg` on `ds`, optionally resuming from a saved state. A resumed run
/// logs only iterations after the resume point.
pub fn run_from(cfg: &RunConfig, ds: &Dataset, start: Option<NetworkState>) -> Result<Trajectory, RunError> {
    cfg.validate()?;
    if (cfg.n, cfg.d) != (ds.agents(), ds.dim()) {
        return Err(RunError::Config(format!(
            "config is n={}, d={} but dataset is n={}, d={}",
            cfg.n,
            cfg.d,
            ds.agents(),
            ds.dim()
        )));
    }
    let graph = topology::build_topology(cfg.topology, cfg.n)?;
    let w = topology::metropolis_weights(&graph)?;
    let alpha = cfg.resolve_alpha(w.beta(), || Ok(problem::smoothness_constant(ds)?))?;
    run_with_mixing(cfg, ds, &w, alpha, start)
}

/// Runs with an explicit mixing matrix and stepsize; `cfg.topology` and
/// `cfg.alpha` are carried as metadata only.
pub fn run_with_mixing<O: LocalObjectives + ?Sized>(
    cfg: &RunConfig,
    obj: &O,
    w: &MixingMatrix,
    alpha: f64,
    start: Option<NetworkState>,
) -> Result<Trajectory, RunError> {
    cfg.validate()?;
    if w.n() != obj.agents() {
        return Err(RunError::Config(format!("mixing matrix is {0}x{0}, objective has {1} agents", w.n(), obj.agents())));
    }
    check_alpha(alpha).map_err(RunError::Engine)?;
    let resumed = start.is_some();
    let mut st = match start {
        Some(s) => {
            if (s.n(), s.d()) != (obj.agents(), obj.dim()) {
                return Err(RunError::Config("resume state does not match objective dimensions".into()));
            }
            s
        }
        None => init_state(obj, None, &cfg.noise, cfg.seed).map_err(RunError::Engine)?,
    };
    let schedule = Schedule { mixing: w, tau: cfg.tau, alpha, algorithm: cfg.algorithm, noise: cfg.noise, seed: cfg.seed };
    match schedule.advance(&mut st, obj, cfg.iters, cfg.cadence, !resumed) {
        Ok(records) => Ok(Trajectory { config: cfg.clone(), alpha, beta: w.beta(), records, final_state: st }),
        Err((records, EngineError::Diverged { k, max_abs })) => Err(RunError::Diverged {
            k,
            max_abs,
            partial: Box::new(Trajectory { config: cfg.clone(), alpha, beta: w.beta(), records, final_state: st }),
        }),
        Err((_, e)) => Err(RunError::Engine(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_dataset, Quadratics, Regularizer};
    use crate::topology::{build_topology, metropolis_weights};

    fn small_data(n: usize) -> Dataset {
        generate_dataset(&DataSpec { n, d: 3, m: 8, lambda: 0.01, label_noise_std: 0.1, seed: 5, regularizer: Regularizer::Smooth })
            .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn init_two_quadratics() {
        let q = Quadratics::two_agent_example();
        let st = init_state(&q, None, &NoiseModel::exact(), 0).unwrap();
        assert_eq!(st.g.as_slice(), &[0.0, -2.0]);
        assert_eq!(st.g, st.grad_prev);
        assert_eq!(st.k, 0);
        assert_eq!(metrics::tracking_residual(&st), 0.0);
    }

    #[test]
    fn init_at_common_stationary_point_has_zero_mean_tracking() {
        // f_1 = (x-1)²/2, f_2 = (x+1)²/2: x = 0 is stationary for f, not for each f_i
        let q = Quadratics::new(vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0]).unwrap();
        let st = init_state(&q, None, &NoiseModel::exact(), 0).unwrap();
        assert_eq!(st.g.as_slice(), &[-1.0, 1.0]);
        assert_eq!(st.g.col_means(), vec![0.0]);
    }

    #[test]
    fn init_rejects_bad_shape() {
        let q = Quadratics::two_agent_example();
        let x0 = Matrix::zeros(3, 1);
        assert!(matches!(init_state(&q, Some(&x0), &NoiseModel::exact(), 0), Err(EngineError::Dimension(_))));
    }

    #[test]
    fn init_is_deterministic() {
        let ds = small_data(4);
        let noise = NoiseModel::Additive { sigma: 1.0 };
        assert_eq!(init_state(&ds, None, &noise, 3).unwrap(), init_state(&ds, None, &noise, 3).unwrap());
        assert_ne!(init_state(&ds, None, &noise, 3).unwrap(), init_state(&ds, None, &noise, 4).unwrap());
    }

    #[test]
    fn gt_step_hand_example() {
        let q = Quadratics::two_agent_example();
        let w = MixingMatrix::averaging(2);
        let mut st = init_state(&q, None, &NoiseModel::exact(), 0).unwrap();
        gt_pga_step(&mut st, &w, Period::Never, 0.1, &q, &NoiseModel::exact(), 0).unwrap();
        assert!(close(st.x.as_slice(), &[0.1, 0.1], 1e-15));
        assert!(close(st.g.as_slice(), &[-0.9, -0.9], 1e-15));
        let mean_grad = q.gradient(&[0.1]);
        assert!((st.g.col_means()[0] - mean_grad[0]).abs() < 1e-15);
        assert_eq!(st.k, 1);
    }

    #[test]
    fn consensual_stationary_point_is_fixed() {
        // both agents minimize at 1.0 only if the centers coincide
        let q = Quadratics::new(vec![vec![1.0, -2.0]; 3], vec![1.0, 2.0, 0.5]).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Ring, 3).unwrap()).unwrap();
        let x0 = Matrix::from_rows(&vec![vec![1.0, -2.0]; 3]);
        let mut st = init_state(&q, Some(&x0), &NoiseModel::exact(), 0).unwrap();
        let before = st.clone();
        for _ in 0..5 {
            gt_pga_step(&mut st, &w, Period::Every(2), 0.3, &q, &NoiseModel::exact(), 0).unwrap();
        }
        assert_eq!(st.x, before.x);
        assert_eq!(st.g, before.g);
    }

    #[test]
    fn averaging_step_reaches_consensus() {
        let ds = small_data(6);
        let w = metropolis_weights(&build_topology(TopologyKind::Ring, 6).unwrap()).unwrap();
        let noise = NoiseModel::Additive { sigma: 1.0 };
        let mut st = init_state(&ds, None, &noise, 1).unwrap();
        for _ in 0..4 {
            gt_pga_step(&mut st, &w, Period::Every(4), 0.01, &ds, &noise, 1).unwrap();
            if st.k % 4 == 0 {
                assert_eq!(metrics::consensus_error(&st), 0.0);
            }
        }
        assert!(st.k == 4);
    }

    #[test]
    fn dgd_zero_stepsize_is_pure_gossip() {
        let ds = small_data(4);
        let w = metropolis_weights(&build_topology(TopologyKind::Ring, 4).unwrap()).unwrap();
        let x0 = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0], vec![1.0, 1.0, 1.0]]);
        let mut st = init_state(&ds, Some(&x0), &NoiseModel::exact(), 0).unwrap();
        dgd_step(&mut st, &w, 0.0, &ds, &NoiseModel::exact(), 0).unwrap();
        assert_eq!(st.x, w.weights().matmul(&x0));
    }

    #[test]
    fn dgd_homogeneous_matches_centralized_descent() {
        let q = Quadratics::new(vec![vec![3.0, -1.0]; 4], vec![2.0; 4]).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Ring, 4).unwrap()).unwrap();
        let x0 = Matrix::from_rows(&vec![vec![0.5, 0.5]; 4]);
        let mut st = init_state(&q, Some(&x0), &NoiseModel::exact(), 0).unwrap();
        let mut central = vec![0.5, 0.5];
        for _ in 0..20 {
            dgd_step(&mut st, &w, 0.1, &q, &NoiseModel::exact(), 0).unwrap();
            let g = q.local_gradient(0, &central);
            central.iter_mut().zip(&g).for_each(|(c, gi)| *c -= 0.1 * gi);
            for i in 0..4 {
                assert!(close(st.x.row(i), &central, 1e-14));
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let q = Quadratics::two_agent_example();
        let w = MixingMatrix::averaging(2);
        let cfg = RunConfig { n: 2, d: 1, iters: 500, noise: NoiseModel::exact(), ..RunConfig::default() };
        let err = run_with_mixing(&cfg, &q, &w, 5.0, None).unwrap_err();
        match err {
            RunError::Diverged { k, max_abs, partial } => {
                assert!(max_abs > DIVERGENCE_LIMIT);
                assert_eq!(partial.records.last().unwrap().k, k - 1);
                assert!(k < 500);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn logging_cadence() {
        let ds = small_data(4);
        let base = RunConfig { n: 4, d: 3, iters: 10, alpha: StepSize::Fixed(0.01), ..RunConfig::default() };
        let ks = |cadence| -> Vec<u64> {
            run(&RunConfig { cadence, ..base.clone() }, &ds).unwrap().records.iter().map(|r| r.k).collect()
        };
        assert_eq!(ks(1), (0..=10).collect::<Vec<_>>());
        assert_eq!(ks(5), vec![0, 5, 10]);
        assert_eq!(ks(4), vec![0, 4, 8, 10]);
    }

    #[test]
    fn infinite_period_equals_unreachable_period() {
        let ds = small_data(4);
        let base = RunConfig { n: 4, d: 3, iters: 30, alpha: StepSize::Fixed(0.01), ..RunConfig::default() };
        let a = run(&RunConfig { tau: Period::Never, ..base.clone() }, &ds).unwrap();
        let b = run(&RunConfig { tau: Period::Every(40), ..base }, &ds).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let ds = small_data(4);
        let cfg = RunConfig { n: 4, d: 3, iters: 20, tau: Period::Every(3), alpha: StepSize::Fixed(0.01), ..RunConfig::default() };
        let full = run(&cfg, &ds).unwrap();
        let half = run(&RunConfig { iters: 10, ..cfg.clone() }, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let hash = config_hash(&cfg, ds.spec());
        half.final_state.save_checkpoint(dir.path(), &hash).unwrap();
        let (state, manifest) = NetworkState::load_checkpoint(dir.path()).unwrap();
        assert_eq!(manifest.k, 10);
        assert_eq!(manifest.config_hash, hash);
        let rest = run_from(&cfg, &ds, Some(state)).unwrap();
        assert_eq!(rest.final_state, full.final_state);
        let mut joined = half.records.clone();
        joined.extend(rest.records);
        assert_eq!(joined, full.records);
    }

    #[test]
    fn config_hash_ignores_budget_only() {
        let data = DataSpec::default();
        let cfg = RunConfig::default();
        let h = config_hash(&cfg, &data);
        assert_eq!(h, config_hash(&RunConfig { iters: 7, cadence: 3, ..cfg.clone() }, &data));
        assert_ne!(h, config_hash(&RunConfig { seed: 99, ..cfg.clone() }, &data));
        assert_ne!(h, config_hash(&cfg, &DataSpec { seed: 3, ..data }));
    }

    #[test]
    fn stepsize_resolution() {
        let l = 4.0;
        let beta = 0.5;
        let lip = || Ok(l);
        let cfg = RunConfig { tau: Period::Every(2), alpha: StepSize::Auto, ..RunConfig::default() };
        assert_eq!(cfg.resolve_alpha(beta, lip).unwrap(), theory::stepsize_bound(l, beta, 2).unwrap());
        for tau in [Period::Never, Period::Every(1)] {
            let cfg = RunConfig { tau, alpha: StepSize::Auto, ..RunConfig::default() };
            assert_eq!(cfg.resolve_alpha(beta, lip).unwrap(), 0.1 / 8.0);
        }
        let cfg = RunConfig { alpha: StepSize::Scaled, alpha_factor: 0.5, ..RunConfig::default() };
        assert_eq!(cfg.resolve_alpha(beta, lip).unwrap(), 0.5 / 8.0);
        let cfg = RunConfig { alpha: StepSize::Fixed(0.3), ..RunConfig::default() };
        assert_eq!(cfg.resolve_alpha(beta, || panic!("not needed")).unwrap(), 0.3);
    }

    #[test]
    fn stepsize_parsing() {
        assert_eq!("auto".parse::<StepSize>().unwrap(), StepSize::Auto);
        assert_eq!("0.002".parse::<StepSize>().unwrap(), StepSize::Fixed(0.002));
        assert!("-1".parse::<StepSize>().is_err());
        assert!("0".parse::<StepSize>().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"alpha": 0.5, "tau": "inf", "noise": {"mode": "minibatch", "batch": 4}}"#).unwrap();
        assert_eq!(cfg.alpha, StepSize::Fixed(0.5));
        assert_eq!(cfg.noise, NoiseModel::Minibatch { batch: 4 });
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig { iters: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { cadence: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn minibatch_runs_are_reproducible() {
        let ds = small_data(4);
        let cfg = RunConfig {
            n: 4,
            d: 3,
            iters: 15,
            noise: NoiseModel::Minibatch { batch: 3 },
            alpha: StepSize::Fixed(0.005),
            tau: Period::Every(5),
            ..RunConfig::default()
        };
        assert_eq!(run(&cfg, &ds).unwrap(), run(&cfg, &ds).unwrap());
        let bad = RunConfig { noise: NoiseModel::Minibatch { batch: 9 }, ..cfg };
        assert!(run(&bad, &ds).is_err());
    }
}
