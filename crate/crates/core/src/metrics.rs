//! Quantities logged along a run, always computed with exact gradients.

use serde::{Deserialize, Serialize};

use crate::engine::NetworkState;
use crate::linalg::{self, Matrix};
use crate::problem::LocalObjectives;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub k: u64,
    /// `‖(1/n)Σ∇f_i(x_i)‖² + ‖∇f(x̄)‖²`
    pub stationarity: f64,
    /// `Σ_i ‖x_i − x̄‖²`
    pub consensus: f64,
    /// `‖mean(g) − mean(∇F)‖`
    pub tracking_residual: f64,
    /// `f(x̄)`
    pub fbar: f64,
}

/// Column mean of the iterates. When all rows are bitwise equal the shared
/// row is returned as is, so consensual states have `x̄ = x_i` exactly.
pub fn mean_iterate(x: &Matrix) -> Vec<f64> {
    let first = x.row(0);
    if x.iter_rows().all(|r| r == first) {
        first.to_vec()
    } else {
        x.col_means()
    }
}

pub fn stationarity_metric<O: LocalObjectives + ?Sized>(obj: &O, st: &NetworkState) -> f64 {
    let n = obj.agents();
    let xbar = mean_iterate(&st.x);
    let mut local_avg = vec![0.0; obj.dim()];
    let mut at_mean = vec![0.0; obj.dim()];
    for i in 0..n {
        linalg::axpy(1.0, &obj.local_gradient(i, st.x.row(i)), &mut local_avg);
        linalg::axpy(1.0, &obj.local_gradient(i, &xbar), &mut at_mean);
    }
    let inv = 1.0 / n as f64;
    local_avg.iter_mut().chain(at_mean.iter_mut()).for_each(|v| *v *= inv);
    linalg::norm_sq(&local_avg) + linalg::norm_sq(&at_mean)
}

pub fn consensus_error(st: &NetworkState) -> f64 {
    let xbar = mean_iterate(&st.x);
    st.x
        .iter_rows()
        .map(|r| r.iter().zip(&xbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

pub fn tracking_residual(st: &NetworkState) -> f64 {
    let g = st.g.col_means();
    let f = st.grad_prev.col_means();
    g.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn record<O: LocalObjectives + ?Sized>(obj: &O, st: &NetworkState) -> MetricRecord {
    MetricRecord {
        k: st.k,
        stationarity: stationarity_metric(obj, st),
        consensus: consensus_error(st),
        tracking_residual: tracking_residual(st),
        fbar: obj.value(&mean_iterate(&st.x)),
    }
}
