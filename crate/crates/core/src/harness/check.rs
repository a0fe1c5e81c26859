//! Built-in invariant suite behind the `check` subcommand.

use crate::engine::{gt_pga_step, init_state, NetworkState};
use crate::linalg::{self, Matrix};
use crate::metrics;
use crate::problem::{generate_dataset, DataSpec, Dataset, LocalObjectives, NoiseModel, Regularizer};
use crate::rng;
use crate::topology::{build_topology, metropolis_weights, MixingMatrix, Period, TopologyKind, STOCHASTIC_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn dataset() -> Dataset {
    generate_dataset(&DataSpec { n: 8, d: 4, m: 12, lambda: 0.01, label_noise_std: 0.1, seed: 11, regularizer: Regularizer::Smooth })
        .expect("valid spec")
}

const TOPOLOGIES: [TopologyKind; 4] = [TopologyKind::Ring, TopologyKind::Star, TopologyKind::Hypercube, TopologyKind::Complete];
const PERIODS: [Period; 3] = [Period::Every(1), Period::Every(3), Period::Never];
const ALPHA: f64 = 0.002;
const STEPS: u64 = 100;

fn mixing_invariants() -> CheckOutcome {
    let mut worst = 0.0_f64;
    let mut pattern_ok = true;
    for kind in TOPOLOGIES {
        let g = build_topology(kind, 8).expect("valid size");
        let w = metropolis_weights(&g).expect("connected");
        let m = w.weights();
        for i in 0..8 {
            let row: f64 = m.row(i).iter().sum();
            let col: f64 = (0..8).map(|r| m[(r, i)]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
            for j in 0..8 {
                if i != j && m[(i, j)] != 0.0 && !g.has_edge(i, j) {
                    pattern_ok = false;
                }
                if m[(i, j)] < 0.0 {
                    pattern_ok = false;
                }
            }
        }
    }
    outcome("mixing-matrix", worst <= STOCHASTIC_TOL && pattern_ok, format!("worst sum deviation {worst:e}"))
}

fn tracking_and_consensus() -> (CheckOutcome, CheckOutcome) {
    let ds = dataset();
    let mut worst_track = 0.0_f64;
    let mut worst_cons = 0.0_f64;
    for kind in TOPOLOGIES {
        let w = metropolis_weights(&build_topology(kind, 8).expect("valid size")).expect("connected");
        for tau in PERIODS {
            for sigma in [0.0, 1.0] {
                let noise = NoiseModel::Additive { sigma };
                let mut st = init_state(&ds, None, &noise, 5).expect("init");
                for _ in 0..STEPS {
                    let averaged = tau.averages_at(st.k);
                    gt_pga_step(&mut st, &w, tau, ALPHA, &ds, &noise, 5).expect("stable");
                    let scale = 1.0 + linalg::norm(&st.grad_prev.col_means());
                    worst_track = worst_track.max(metrics::tracking_residual(&st) / scale);
                    if averaged {
                        worst_cons = worst_cons.max(metrics::consensus_error(&st));
                    }
                }
            }
        }
    }
    (
        outcome("tracking-identity", worst_track <= 1e-10, format!("worst relative residual {worst_track:e}")),
        outcome("post-average-consensus", worst_cons <= 1e-24, format!("worst consensus error {worst_cons:e}")),
    )
}

/// Static-topology gradient tracking written out agent by agent.
fn static_gt_reference(ds: &Dataset, w: &MixingMatrix, noise: &NoiseModel, seed: u64, steps: u64) -> Matrix {
    let (n, d) = (ds.agents(), ds.dim());
    let draw = |i: usize, x: &[f64], k: u64| {
        let mut s = rng::gradient_stream(seed, i, k);
        ds.stochastic_gradient(i, x, noise, &mut s).expect("valid noise")
    };
    let mut x = vec![vec![0.0; d]; n];
    let mut prev: Vec<Vec<f64>> = (0..n).map(|i| draw(i, &x[i], 0)).collect();
    let mut g = prev.clone();
    let wm = w.weights();
    for k in 0..steps {
        let mut x_new = vec![vec![0.0; d]; n];
        let mut g_new = vec![vec![0.0; d]; n];
        for i in 0..n {
            for j in 0..n {
                let wij = wm[(i, j)];
                if wij == 0.0 {
                    continue;
                }
                for c in 0..d {
                    x_new[i][c] += wij * (x[j][c] - ALPHA * g[j][c]);
                    g_new[i][c] += wij * g[j][c];
                }
            }
        }
        for i in 0..n {
            let fresh = draw(i, &x_new[i], k + 1);
            for c in 0..d {
                g_new[i][c] += fresh[c] - prev[i][c];
            }
            prev[i] = fresh;
        }
        x = x_new;
        g = g_new;
    }
    Matrix::from_rows(&x)
}

fn infinite_period_equivalence() -> CheckOutcome {
    let ds = dataset();
    let w = metropolis_weights(&build_topology(TopologyKind::Ring, 8).expect("valid size")).expect("connected");
    let noise = NoiseModel::Additive { sigma: 1.0 };
    let mut st: NetworkState = init_state(&ds, None, &noise, 9).expect("init");
    for _ in 0..STEPS {
        gt_pga_step(&mut st, &w, Period::Never, ALPHA, &ds, &noise, 9).expect("stable");
    }
    let reference = static_gt_reference(&ds, &w, &noise, 9, STEPS);
    let diff = st.x.sub(&reference).max_abs();
    outcome("static-topology-equivalence", diff <= 1e-12, format!("max componentwise difference {diff:e}"))
}

fn gradient_check() -> CheckOutcome {
    let ds = dataset();
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for trial in 0..20u64 {
        let mut s = rng::stream(trial, rng::Purpose::Gradient, 999, 0);
        let i = (trial as usize) % ds.agents();
        let x: Vec<f64> = (0..ds.dim()).map(|_| rand::Rng::sample(&mut s, rand_distr::StandardNormal)).collect();
        let g = ds.local_gradient(i, &x);
        let fd: Vec<f64> = (0..ds.dim())
            .map(|j| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                (ds.local_value(i, &xp) - ds.local_value(i, &xm)) / (2.0 * h)
            })
            .collect();
        let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(linalg::norm(&err) / linalg::norm(&g).max(1e-300));
    }
    outcome("gradient-finite-difference", worst <= 1e-6, format!("worst relative error {worst:e}"))
}

/// Runs all built-in checks.
pub fn run_checks() -> Vec<CheckOutcome> {
    let (tracking, consensus) = tracking_and_consensus();
    vec![mixing_invariants(), tracking, consensus, infinite_period_equivalence(), gradient_check()]
}
