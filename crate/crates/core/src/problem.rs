//! Regularized least-squares benchmark with per-agent data, exact and
//! stochastic gradient oracles, and smoothness estimation.
//!
//! Agent `i` holds `f_i(x) = ‖A_i x − b_i‖² + λ Σ_j r(x[j])`, and the network
//! objective is the agent average. Gradients use the precomputed Gram matrix
//! `A_iᵀA_i` and `A_iᵀb_i`, so one evaluation costs `O(d²)` instead of `O(md)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{self, IoError};
use crate::linalg::{self, Matrix};
use crate::rng::{self, Purpose, Stream};

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;
/// Literal-form domain guard: arguments are clamped to `t ≥ −1 + 1e−6`.
pub const LITERAL_GUARD: f64 = -1.0 + 1e-6;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("minibatch size {batch} exceeds local sample count {m}")]
    BatchTooLarge { batch: usize, m: usize },
    #[error("minibatch sampling is not available for this objective")]
    MinibatchUnsupported,
    #[error("power iteration did not converge for agent {agent} (residual {residual:e})")]
    PowerIteration { agent: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Per-coordinate nonconvex penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `r(t) = t²/(1+t²)`: bounded in `[0, 1)`, gradient Lipschitz constant 2.
    #[default]
    Smooth,
    /// `r(t) = t/(1+t)`, unbounded below near `t = −1`; arguments are clamped
    /// to `t ≥ −1 + 1e−6`.
    Literal,
}

impl Regularizer {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Regularizer::Smooth => {
                let t2 = t * t;
                t2 / (1.0 + t2)
            }
            Regularizer::Literal => {
                let t = t.max(LITERAL_GUARD);
                t / (1.0 + t)
            }
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Regularizer::Smooth => {
                let s = 1.0 + t * t;
                2.0 * t / (s * s)
            }
            Regularizer::Literal => {
                let s = 1.0 + t.max(LITERAL_GUARD);
                1.0 / (s * s)
            }
        }
    }

    /// Lipschitz constant of `r′`. For the literal form this is the bound on
    /// `t ≥ 0`; it has no global bound.
    pub fn gradient_lipschitz(self) -> f64 {
        2.0
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularizer::Smooth => "smooth",
            Regularizer::Literal => "literal",
        })
    }
}

impl FromStr for Regularizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" => Ok(Regularizer::Smooth),
            "literal" => Ok(Regularizer::Literal),
            other => Err(format!("unknown regularizer `{other}` (expected smooth or literal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NoiseModel {
    /// Exact gradient plus `N(0, σ²/d · I)`, so `E‖noise‖² = σ²`.
    Additive { sigma: f64 },
    /// Uniform row sampling with replacement, rescaled to be unbiased.
    Minibatch { batch: usize },
}

impl NoiseModel {
    pub fn exact() -> Self {
        NoiseModel::Additive { sigma: 0.0 }
    }

    pub fn validate(&self, m: usize) -> Result<(), ProblemError> {
        match *self {
            NoiseModel::Additive { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(ProblemError::InvalidArgument(format!("noise sigma must be finite and ≥ 0, got {sigma}")))
            }
            NoiseModel::Minibatch { batch: 0 } => {
                Err(ProblemError::InvalidArgument("minibatch size must be at least 1".into()))
            }
            NoiseModel::Minibatch { batch } if batch > m => Err(ProblemError::BatchTooLarge { batch, m }),
            _ => Ok(()),
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Additive { sigma: 1.0 }
    }
}

/// A collection of smooth local objectives `f_1..f_n` over `ℝ^d`.
pub trait LocalObjectives: Sync {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_value(&self, i: usize, x: &[f64]) -> f64;
    fn local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64>;

    /// Unbiased stochastic gradient drawing only from `stream`.
    /// The default handles additive noise.
    fn stochastic_gradient(
        &self,
        i: usize,
        x: &[f64],
        noise: &NoiseModel,
        stream: &mut Stream,
    ) -> Result<Vec<f64>, ProblemError> {
        match *noise {
            NoiseModel::Additive { sigma } => {
                let mut g = self.local_gradient(i, x);
                add_gaussian(&mut g, sigma, stream);
                Ok(g)
            }
            NoiseModel::Minibatch { .. } => Err(ProblemError::MinibatchUnsupported),
        }
    }

    /// Network objective `f(x) = (1/n) Σ f_i(x)`.
    fn value(&self, x: &[f64]) -> f64 {
        let n = self.agents();
        (0..n).map(|i| self.local_value(i, x)).sum::<f64>() / n as f64
    }

    /// `∇f(x) = (1/n) Σ ∇f_i(x)`.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.agents();
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            linalg::axpy(1.0, &self.local_gradient(i, x), &mut g);
        }
        g.iter_mut().for_each(|v| *v /= n as f64);
        g
    }

    /// Samples needed before `stochastic_gradient` may reject a noise model.
    fn local_samples(&self) -> Option<usize> {
        None
    }
}

/// Adds `N(0, σ²/d)` to each coordinate.
pub fn add_gaussian(g: &mut [f64], sigma: f64, stream: &mut Stream) {
    if sigma == 0.0 || g.is_empty() {
        return;
    }
    let scale = sigma / (g.len() as f64).sqrt();
    for v in g.iter_mut() {
        let z: f64 = stream.sample(StandardNormal);
        *v += scale * z;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    a: Matrix,
    b: Vec<f64>,
    planted: Vec<f64>,
    gram: Matrix,
    atb: Vec<f64>,
}

impl AgentData {
    pub fn new(a: Matrix, b: Vec<f64>, planted: Vec<f64>) -> Self {
        let gram = a.gram();
        let atb = a.tr_matvec(&b);
        Self { a, b, planted, gram, atb }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn planted(&self) -> &[f64] {
        &self.planted
    }
}

/// Generation parameters; also serialized as the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub lambda: f64,
    pub label_noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub regularizer: Regularizer,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { n: 64, d: 20, m: 500, lambda: 0.01, label_noise_std: 0.1, seed: 0, regularizer: Regularizer::Smooth }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    spec: DataSpec,
    agents: Vec<AgentData>,
}

impl Dataset {
    /// Assembles a dataset from explicit per-agent data. `spec.seed` and
    /// `spec.label_noise_std` are carried as metadata only.
    pub fn from_agents(spec: DataSpec, agents: Vec<AgentData>) -> Result<Self, ProblemError> {
        if !(spec.lambda >= 0.0) {
            return Err(ProblemError::InvalidArgument(format!("lambda must be ≥ 0, got {}", spec.lambda)));
        }
        if agents.len() != spec.n || spec.n == 0 {
            return Err(ProblemError::InvalidArgument(format!("expected {} agents, got {}", spec.n, agents.len())));
        }
        for (i, ag) in agents.iter().enumerate() {
            if ag.a.cols() != spec.d || ag.a.rows() != spec.m || ag.b.len() != spec.m || ag.planted.len() != spec.d {
                return Err(ProblemError::InvalidArgument(format!(
                    "agent {i}: A is {}x{}, b has {} entries, planted has {}; expected {}x{}, {}, {}",
                    ag.a.rows(),
                    ag.a.cols(),
                    ag.b.len(),
                    ag.planted.len(),
                    spec.m,
                    spec.d,
                    spec.m,
                    spec.d
                )));
            }
        }
        Ok(Self { spec, agents })
    }

    pub fn spec(&self) -> &DataSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn regularizer(&self) -> Regularizer {
        self.spec.regularizer
    }

    pub fn agent(&self, i: usize) -> &AgentData {
        &self.agents[i]
    }

    /// Copy of the dataset with a different penalty weight or form.
    pub fn with_regularization(&self, lambda: f64, regularizer: Regularizer) -> Result<Self, ProblemError> {
        let spec = DataSpec { lambda, regularizer, ..self.spec.clone() };
        Self::from_agents(spec, self.agents.clone())
    }

    /// Gradient of a row subset, rescaled by `m / |rows|`, plus the exact penalty gradient.
    pub fn minibatch_gradient(&self, i: usize, x: &[f64], rows: &[usize]) -> Vec<f64> {
        let ag = &self.agents[i];
        let mut g = vec![0.0; self.spec.d];
        for &s in rows {
            let a_s = ag.a.row(s);
            let resid = linalg::dot(a_s, x) - ag.b[s];
            linalg::axpy(resid, a_s, &mut g);
        }
        let scale = 2.0 * self.spec.m as f64 / rows.len() as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        self.add_penalty_gradient(x, &mut g);
        g
    }

    fn add_penalty_gradient(&self, x: &[f64], g: &mut [f64]) {
        let lambda = self.spec.lambda;
        if lambda != 0.0 {
            let r = self.spec.regularizer;
            for (gj, &xj) in g.iter_mut().zip(x) {
                *gj += lambda * r.derivative(xj);
            }
        }
    }

    pub fn export(&self, dir: &Path) -> Result<(), ProblemError> {
        fs::create_dir_all(dir).map_err(|e| IoError::fs(dir, e))?;
        io::write_json(&dir.join("manifest.json"), &self.spec)?;
        for (i, ag) in self.agents.iter().enumerate() {
            io::write_matrix_csv(&dir.join(format!("agent_{i:04}_A.csv")), &ag.a)?;
            io::write_matrix_csv(&dir.join(format!("agent_{i:04}_b.csv")), &column(&ag.b))?;
            io::write_matrix_csv(&dir.join(format!("agent_{i:04}_planted.csv")), &column(&ag.planted))?;
        }
        Ok(())
    }

    pub fn import(dir: &Path) -> Result<Self, ProblemError> {
        let spec: DataSpec = io::read_json(&dir.join("manifest.json"))?;
        let mut agents = Vec::with_capacity(spec.n);
        for i in 0..spec.n {
            let a = io::read_matrix_csv(&dir.join(format!("agent_{i:04}_A.csv")))?;
            let b = io::read_matrix_csv(&dir.join(format!("agent_{i:04}_b.csv")))?;
            let planted = io::read_matrix_csv(&dir.join(format!("agent_{i:04}_planted.csv")))?;
            agents.push(AgentData::new(a, b.as_slice().to_vec(), planted.as_slice().to_vec()));
        }
        Self::from_agents(spec, agents)
    }
}

fn column(v: &[f64]) -> Matrix {
    Matrix::from_row_major(v.len(), 1, v.to_vec())
}

impl LocalObjectives for Dataset {
    fn agents(&self) -> usize {
        self.spec.n
    }

    fn dim(&self) -> usize {
        self.spec.d
    }

    fn local_value(&self, i: usize, x: &[f64]) -> f64 {
        let ag = &self.agents[i];
        let data: f64 = ag
            .a
            .iter_rows()
            .zip(&ag.b)
            .map(|(row, &b)| {
                let r = linalg::dot(row, x) - b;
                r * r
            })
            .sum();
        let r = self.spec.regularizer;
        data + self.spec.lambda * x.iter().map(|&t| r.value(t)).sum::<f64>()
    }

    fn local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let ag = &self.agents[i];
        let mut g = ag.gram.matvec(x);
        for (gj, &c) in g.iter_mut().zip(&ag.atb) {
            *gj = 2.0 * (*gj - c);
        }
        self.add_penalty_gradient(x, &mut g);
        g
    }

    fn stochastic_gradient(
        &self,
        i: usize,
        x: &[f64],
        noise: &NoiseModel,
        stream: &mut Stream,
    ) -> Result<Vec<f64>, ProblemError> {
        match *noise {
            NoiseModel::Additive { sigma } => {
                let mut g = self.local_gradient(i, x);
                add_gaussian(&mut g, sigma, stream);
                Ok(g)
            }
            NoiseModel::Minibatch { batch } => {
                let m = self.spec.m;
                if batch == 0 || batch > m {
                    return Err(ProblemError::BatchTooLarge { batch, m });
                }
                let rows: Vec<usize> = (0..batch).map(|_| stream.gen_range(0..m)).collect();
                Ok(self.minibatch_gradient(i, x, &rows))
            }
        }
    }

    fn local_samples(&self) -> Option<usize> {
        Some(self.spec.m)
    }
}

/// Isotropic quadratics `f_i(x) = (h_i/2)‖x − c_i‖²`, handy as an exact
/// oracle for small hand-checked cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratics {
    centers: Vec<Vec<f64>>,
    curvatures: Vec<f64>,
}

impl Quadratics {
    pub fn new(centers: Vec<Vec<f64>>, curvatures: Vec<f64>) -> Result<Self, ProblemError> {
        let d = centers.first().map_or(0, Vec::len);
        if centers.is_empty() || d == 0 || centers.iter().any(|c| c.len() != d) || curvatures.len() != centers.len() {
            return Err(ProblemError::InvalidArgument("quadratics need equal-length centers and one curvature each".into()));
        }
        Ok(Self { centers, curvatures })
    }

    /// `f_1 = x²/2`, `f_2 = (x − 2)²/2`.
    pub fn two_agent_example() -> Self {
        Self { centers: vec![vec![0.0], vec![2.0]], curvatures: vec![1.0, 1.0] }
    }
}

impl LocalObjectives for Quadratics {
    fn agents(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn local_value(&self, i: usize, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.centers[i]).map(|(a, c)| (a - c) * (a - c)).sum();
        0.5 * self.curvatures[i] * d2
    }

    fn local_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.centers[i]).map(|(a, c)| self.curvatures[i] * (a - c)).collect()
    }
}

/// Synthetic data: `A_i` entries and planted `x̃_i` standard normal, and
/// `b_i = A_i x̃_i + z_i` with `z_i ~ N(0, label_noise_std²)`. Each agent
/// draws from its own stream, so the result depends only on `spec`.
pub fn generate_dataset(spec: &DataSpec) -> Result<Dataset, ProblemError> {
    if spec.n == 0 || spec.d == 0 || spec.m == 0 {
        return Err(ProblemError::InvalidArgument(format!(
            "dimensions must be positive (n={}, d={}, m={})",
            spec.n, spec.d, spec.m
        )));
    }
    if !(spec.label_noise_std >= 0.0) {
        return Err(ProblemError::InvalidArgument(format!(
            "label noise std must be ≥ 0, got {}",
            spec.label_noise_std
        )));
    }
    let agents = (0..spec.n)
        .map(|i| {
            let mut s = rng::stream(spec.seed, Purpose::Dataset, i as u64, 0);
            let a_data: Vec<f64> = (0..spec.m * spec.d).map(|_| s.sample(StandardNormal)).collect();
            let a = Matrix::from_row_major(spec.m, spec.d, a_data);
            let planted: Vec<f64> = (0..spec.d).map(|_| s.sample(StandardNormal)).collect();
            let mut b = a.matvec(&planted);
            if spec.label_noise_std > 0.0 {
                for bi in b.iter_mut() {
                    let z: f64 = s.sample(StandardNormal);
                    *bi += spec.label_noise_std * z;
                }
            }
            AgentData::new(a, b, planted)
        })
        .collect();
    Dataset::from_agents(spec.clone(), agents)
}

/// `L = max_i 2 λ_max(A_iᵀA_i) + λ L_r`.
pub fn smoothness_constant(ds: &Dataset) -> Result<f64, ProblemError> {
    let mut worst = 0.0_f64;
    for (agent, ag) in ds.agents.iter().enumerate() {
        let (mu, _) = linalg::power_iteration_psd(&ag.gram, POWER_TOL, POWER_MAX_ITER)
            .map_err(|residual| ProblemError::PowerIteration { agent, residual })?;
        worst = worst.max(2.0 * mu);
    }
    Ok(worst + ds.spec.lambda * ds.spec.regularizer.gradient_lipschitz())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_agent(a: Matrix, b: Vec<f64>, lambda: f64) -> Dataset {
        let d = a.cols();
        let m = a.rows();
        let spec = DataSpec { n: 1, d, m, lambda, label_noise_std: 0.0, seed: 0, regularizer: Regularizer::Smooth };
        Dataset::from_agents(spec, vec![AgentData::new(a, b, vec![0.0; d])]).unwrap()
    }

    fn small_spec() -> DataSpec {
        DataSpec { n: 3, d: 4, m: 6, lambda: 0.01, label_noise_std: 0.1, seed: 9, regularizer: Regularizer::Smooth }
    }

    #[test]
    fn default_scale_shapes() {
        let ds = generate_dataset(&DataSpec::default()).unwrap();
        assert_eq!(ds.agents(), 64);
        for i in 0..64 {
            assert_eq!((ds.agent(i).a().rows(), ds.agent(i).a().cols()), (500, 20));
            assert_eq!(ds.agent(i).b().len(), 500);
        }
    }

    #[test]
    fn zero_label_noise_interpolates() {
        let spec = DataSpec { n: 2, d: 1, m: 1, lambda: 0.0, label_noise_std: 0.0, seed: 4, regularizer: Regularizer::Smooth };
        let ds = generate_dataset(&spec).unwrap();
        for i in 0..2 {
            let ag = ds.agent(i);
            assert_eq!(ag.b()[0], ag.a()[(0, 0)] * ag.planted()[0]);
            assert_eq!(ds.local_value(i, ag.planted()), 0.0);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = generate_dataset(&small_spec()).unwrap();
        let b = generate_dataset(&small_spec()).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&DataSpec { seed: 10, ..small_spec() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn planted_vectors_are_heterogeneous() {
        let ds = generate_dataset(&small_spec()).unwrap();
        assert_ne!(ds.agent(0).planted(), ds.agent(1).planted());
    }

    #[test]
    fn value_examples() {
        let ds = single_agent(Matrix::identity(3), vec![0.0; 3], 0.0);
        assert_eq!(ds.local_value(0, &[1.0, 1.0, 1.0]), 3.0);

        let ds = single_agent(Matrix::zeros(1, 1), vec![0.0], 0.01);
        assert!((ds.local_value(0, &[1.0]) - 0.005).abs() < 1e-18);
    }

    #[test]
    fn gradient_examples() {
        let ds = single_agent(Matrix::identity(3), vec![0.0; 3], 0.0);
        assert_eq!(ds.local_gradient(0, &[1.0, -2.0, 0.5]), vec![2.0, -4.0, 1.0]);

        let ds = single_agent(Matrix::zeros(1, 1), vec![0.0], 0.01);
        assert_eq!(ds.local_gradient(0, &[0.0]), vec![0.0]);
    }

    #[test]
    fn additive_zero_sigma_is_exact() {
        let ds = generate_dataset(&small_spec()).unwrap();
        let x = [0.3, -1.0, 2.0, 0.1];
        let mut s = rng::gradient_stream(1, 0, 0);
        let g = ds.stochastic_gradient(1, &x, &NoiseModel::Additive { sigma: 0.0 }, &mut s).unwrap();
        assert_eq!(g, ds.local_gradient(1, &x));
    }

    #[test]
    fn full_batch_matches_exact_gradient() {
        let ds = generate_dataset(&small_spec()).unwrap();
        let x = [0.3, -1.0, 2.0, 0.1];
        let rows: Vec<usize> = (0..6).collect();
        let mb = ds.minibatch_gradient(2, &x, &rows);
        let exact = ds.local_gradient(2, &x);
        let err: f64 = mb.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * (1.0 + linalg::norm(&exact)), "{err}");
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let ds = generate_dataset(&small_spec()).unwrap();
        let mut s = rng::gradient_stream(1, 0, 0);
        let err = ds.stochastic_gradient(0, &[0.0; 4], &NoiseModel::Minibatch { batch: 7 }, &mut s).unwrap_err();
        assert!(matches!(err, ProblemError::BatchTooLarge { batch: 7, m: 6 }));
        assert!(NoiseModel::Minibatch { batch: 7 }.validate(6).is_err());
        assert!(NoiseModel::Minibatch { batch: 6 }.validate(6).is_ok());
    }

    #[test]
    fn smoothness_examples() {
        let ds = single_agent(Matrix::identity(4), vec![0.0; 4], 0.0);
        assert!((smoothness_constant(&ds).unwrap() - 2.0).abs() < 1e-12);

        let ds = single_agent(Matrix::identity(4), vec![0.0; 4], 0.01);
        assert!((smoothness_constant(&ds).unwrap() - 2.02).abs() < 1e-12);

        let a = Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]);
        let ds = single_agent(a, vec![0.5], 0.0);
        assert!((smoothness_constant(&ds).unwrap() - 2.0 * 14.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_regularizer_is_bounded() {
        let r = Regularizer::Smooth;
        let mut t = -1e6;
        while t <= 1e6 {
            let v = r.value(t);
            assert!((0.0..1.0).contains(&v), "r({t}) = {v}");
            t += 997.3;
        }
        assert_eq!(r.value(1.0), 0.5);
    }

    #[test]
    fn literal_regularizer_is_guarded() {
        let r = Regularizer::Literal;
        assert_eq!(r.value(1.0), 0.5);
        assert_eq!(r.derivative(0.0), 1.0);
        assert!(r.value(-5.0).is_finite());
        assert_eq!(r.value(-5.0), r.value(LITERAL_GUARD));
    }

    #[test]
    fn export_import_round_trip() {
        let ds = generate_dataset(&small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.export(dir.path()).unwrap();
        assert_eq!(Dataset::import(dir.path()).unwrap(), ds);
    }

    #[test]
    fn rejects_negative_lambda() {
        let ds = generate_dataset(&small_spec()).unwrap();
        assert!(ds.with_regularization(-0.1, Regularizer::Smooth).is_err());
    }
}
