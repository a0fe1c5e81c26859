//! Communication graphs, Metropolis mixing matrices, and spectral quantities.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::Ratio;
use num_traits::CheckedAdd;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};

/// Row/column sum tolerance for doubly stochastic checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// A spectral gap at or above `1 - CONNECTIVITY_TOL` means the mixing
/// matrix does not contract the disagreement subspace.
pub const CONNECTIVITY_TOL: f64 = 1e-12;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("meshgrid2d needs a perfect-square agent count, {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("hypercube needs a power-of-two agent count, {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("edge ({0}, {1}) is a self-loop or out of range")]
    BadEdge(usize, usize),
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not doubly stochastic: worst row/column sum deviation {deviation:e}")]
    NotDoublyStochastic { deviation: f64 },
    #[error("matrix has a negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("spectral gap {0} is not below 1: network is disconnected or periodic")]
    NoContraction(f64),
    #[error("power iteration did not converge (residual {0:e})")]
    PowerIteration(f64),
    #[error("unknown topology `{0}` (expected ring, meshgrid2d, star, hypercube, complete)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Ring,
    Meshgrid2d,
    Star,
    Hypercube,
    Complete,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 5] = [
        TopologyKind::Ring,
        TopologyKind::Meshgrid2d,
        TopologyKind::Star,
        TopologyKind::Hypercube,
        TopologyKind::Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Meshgrid2d => "meshgrid2d",
            TopologyKind::Star => "star",
            TopologyKind::Hypercube => "hypercube",
            TopologyKind::Complete => "complete",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopologyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TopologyError::UnknownKind(s.to_string()))
    }
}

/// Undirected, connected communication graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    kind: TopologyKind,
    n: usize,
    /// Normalized as `(min, max)`.
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    fn new(kind: TopologyKind, n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, TopologyError> {
        let mut edges = BTreeSet::new();
        for (i, j) in pairs {
            if i == j || i >= n || j >= n {
                return Err(TopologyError::BadEdge(i, j));
            }
            edges.insert((i.min(j), i.max(j)));
        }
        let g = Graph { kind, n, edges };
        let components = g.components();
        if components != 1 {
            return Err(TopologyError::Disconnected { components });
        }
        Ok(g)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj.iter_mut().for_each(|a| a.sort_unstable());
        adj
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    fn components(&self) -> usize {
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }
}

pub fn build_topology(kind: TopologyKind, n: usize) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewAgents(n));
    }
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Ring => {
            for i in 0..n {
                edges.push((i, (i + 1) % n));
            }
        }
        TopologyKind::Meshgrid2d => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(TopologyError::NotPerfectSquare(n));
            }
            for r in 0..side {
                for c in 0..side {
                    let v = r * side + c;
                    if c + 1 < side {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < side {
                        edges.push((v, v + side));
                    }
                }
            }
        }
        TopologyKind::Star => edges.extend((1..n).map(|i| (0, i))),
        TopologyKind::Hypercube => {
            if !n.is_power_of_two() {
                return Err(TopologyError::NotPowerOfTwo(n));
            }
            let dim = n.trailing_zeros();
            for v in 0..n {
                for b in 0..dim {
                    let u = v ^ (1 << b);
                    if v < u {
                        edges.push((v, u));
                    }
                }
            }
        }
        TopologyKind::Complete => {
            for i in 0..n {
                edges.extend((i + 1..n).map(|j| (i, j)));
            }
        }
    }
    Graph::new(kind, n, edges)
}

/// Doubly stochastic, nonnegative mixing matrix with its cached spectral gap.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Matrix,
    beta: f64,
}

impl MixingMatrix {
    /// Validates `w` as square, nonnegative, and doubly stochastic, and caches
    /// its spectral gap. Fails if the gap is not below one.
    pub fn from_dense(w: Matrix) -> Result<Self, TopologyError> {
        validate_doubly_stochastic(&w)?;
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                if w[(i, j)] < 0.0 {
                    return Err(TopologyError::NegativeEntry { row: i, col: j, value: w[(i, j)] });
                }
            }
        }
        let gap = spectral_gap(&w)?;
        if gap.violates_connectivity {
            return Err(TopologyError::NoContraction(gap.beta));
        }
        Ok(Self { w, beta: gap.beta })
    }

    /// `W = I`: agents never communicate through gossip. GT-PGA over this
    /// matrix is gradient tracking with local updates. Its gap is 1, so it is
    /// outside the connectivity assumption and only valid with finite periods.
    pub fn identity(n: usize) -> Self {
        Self { w: Matrix::identity(n), beta: 1.0 }
    }

    /// The exact averaging matrix `(1/n) 𝟙𝟙ᵀ`.
    pub fn averaging(n: usize) -> Self {
        Self { w: Matrix::filled(n, n, 1.0 / n as f64), beta: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn violates_connectivity(&self) -> bool {
        self.beta >= 1.0 - CONNECTIVITY_TOL
    }
}

fn validate_doubly_stochastic(w: &Matrix) -> Result<(), TopologyError> {
    if w.rows() != w.cols() {
        return Err(TopologyError::NotSquare { rows: w.rows(), cols: w.cols() });
    }
    let n = w.rows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        let row: f64 = w.row(i).iter().sum();
        let col: f64 = (0..n).map(|r| w[(r, i)]).sum();
        worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
    }
    if !(worst <= STOCHASTIC_TOL) {
        return Err(TopologyError::NotDoublyStochastic { deviation: worst });
    }
    Ok(())
}

/// `w_ij = 1/(1 + max(deg_i, deg_j))` on edges and the remainder on the
/// diagonal. Diagonal entries are computed in exact rational arithmetic
/// where possible so that, e.g., the complete graph yields exactly `(1/n)𝟙𝟙ᵀ`.
pub fn metropolis_weights(g: &Graph) -> Result<MixingMatrix, TopologyError> {
    let n = g.n();
    let deg = g.degrees();
    let adj = g.neighbors();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let mut exact: Option<Ratio<i128>> = Some(Ratio::from_integer(0));
        let mut float_sum = 0.0;
        for &j in &adj[i] {
            let denom = 1 + deg[i].max(deg[j]);
            let wij = 1.0 / denom as f64;
            w[(i, j)] = wij;
            float_sum += wij;
            exact = exact.and_then(|acc| acc.checked_add(&Ratio::new(1, denom as i128)));
        }
        w[(i, i)] = match exact {
            Some(s) => {
                let rem = Ratio::from_integer(1) - s;
                *rem.numer() as f64 / *rem.denom() as f64
            }
            None => 1.0 - float_sum,
        };
    }
    MixingMatrix::from_dense(w)
}

/// Spectral norm of `W - (1/n)𝟙𝟙ᵀ` together with the connectivity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGap {
    pub beta: f64,
    /// Set when `beta ≥ 1 − 1e−12`: the graph is disconnected or the chain periodic.
    pub violates_connectivity: bool,
}

/// Computes `‖W − (1/n)𝟙𝟙ᵀ‖₂`. Symmetric inputs use a symmetric
/// eigendecomposition; anything else falls back to power iteration on
/// `BᵀB` with `B` the deflated matrix.
pub fn spectral_gap(w: &Matrix) -> Result<SpectralGap, TopologyError> {
    validate_doubly_stochastic(w)?;
    let deflated = deflate(w);
    let beta = if w.is_symmetric(0.0) {
        symmetric_spectral_norm(&deflated)
    } else {
        power_spectral_norm(&deflated)?
    };
    Ok(SpectralGap { beta, violates_connectivity: beta >= 1.0 - CONNECTIVITY_TOL })
}

fn deflate(w: &Matrix) -> Matrix {
    let n = w.rows();
    let inv = 1.0 / n as f64;
    let mut b = w.clone();
    for i in 0..n {
        for v in b.row_mut(i) {
            *v -= inv;
        }
    }
    b
}

pub(crate) fn symmetric_spectral_norm(b: &Matrix) -> f64 {
    let n = b.rows();
    let m = DMatrix::from_row_slice(n, n, b.as_slice());
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

pub(crate) fn power_spectral_norm(b: &Matrix) -> Result<f64, TopologyError> {
    let btb = b.transpose().matmul(b);
    linalg::power_iteration_psd(&btb, POWER_TOL, POWER_MAX_ITER)
        .map(|(mu, _)| mu.max(0.0).sqrt())
        .map_err(TopologyError::PowerIteration)
}

/// Global-averaging period: every `tau`-th step replaces gossip by an exact average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Period {
    Every(u64),
    Never,
}

impl Period {
    /// True when the step leaving iteration `k` is a global average,
    /// i.e. `(k + 1) mod tau == 0`.
    pub fn averages_at(self, k: u64) -> bool {
        match self {
            Period::Every(tau) => (k + 1).is_multiple_of(tau),
            Period::Never => false,
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Period::Every(t) => Some(t),
            Period::Never => None,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Every(t) => write!(f, "{t}"),
            Period::Never => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid period `{0}`: expected a positive integer or `inf`")]
pub struct ParsePeriodError(pub String);

impl FromStr for Period {
    type Err = ParsePeriodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Period::Never);
        }
        match t.parse::<u64>() {
            Ok(v) if v >= 1 => Ok(Period::Every(v)),
            _ => Err(ParsePeriodError(s.to_string())),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Period::Every(t) => s.serialize_u64(*t),
            Period::Never => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) if v >= 1 => Ok(Period::Every(v)),
            Raw::Int(v) => Err(serde::de::Error::custom(ParsePeriodError(v.to_string()))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The mixing operator applied at iteration `k`.
#[derive(Debug, Clone, Copy)]
pub enum Mixing<'a> {
    Gossip(&'a MixingMatrix),
    Average,
}

impl Mixing<'_> {
    pub fn is_average(&self) -> bool {
        matches!(self, Mixing::Average)
    }

    /// Applies the operator to the stacked agent rows of `x`. The averaging
    /// branch broadcasts one column-mean vector, so every output row is
    /// bitwise identical.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            Mixing::Gossip(w) => w.weights().matmul(x),
            Mixing::Average => {
                let mean = x.col_means();
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    out.row_mut(i).copy_from_slice(&mean);
                }
                out
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Matrix {
        match self {
            Mixing::Gossip(w) => w.weights().clone(),
            Mixing::Average => Matrix::filled(n, n, 1.0 / n as f64),
        }
    }
}

/// `W^(k)`: the averaging matrix when `(k + 1) mod tau == 0`, else `W`.
pub fn effective_mixing(k: u64, tau: Period, w: &MixingMatrix) -> Mixing<'_> {
    if tau.averages_at(k) {
        Mixing::Average
    } else {
        Mixing::Gossip(w)
    }
}
