//! Stepsize conditions and rate bounds for GT-PGA.
//!
//! The convergence bound has the form
//! `γ₁L²/(nK) + γ₂βτ²L²/K + γ₃σ²(1/((1−β²)τ²) + 1/(βτ²n))`. The γ constants
//! are existential in the analysis; they default to 1 here and the bounds are
//! meant for stepsize configuration and for comparing periods, not as
//! calibrated error predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("averaging period {0} is below 2; the bound only covers periods ≥ 2")]
    PeriodOutOfScope(u64),
    #[error("smoothness constant must be positive and finite, got {0}")]
    BadSmoothness(f64),
    #[error("spectral gap must lie in [0, 1), got {0}")]
    BadGap(f64),
    #[error("horizon K = {k} must be at least tau + 1 = {min}")]
    ShortHorizon { k: u64, min: u64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Inputs to the bound evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub lipschitz: f64,
    pub beta: f64,
    pub tau: u64,
    pub n: usize,
    pub sigma: f64,
    pub horizon: u64,
    /// γ₁..γ₆; all default to 1.
    #[serde(default = "unit_gammas")]
    pub gammas: [f64; 6],
}

fn unit_gammas() -> [f64; 6] {
    [1.0; 6]
}

impl BoundParams {
    pub fn new(lipschitz: f64, beta: f64, tau: u64, n: usize, sigma: f64, horizon: u64) -> Self {
        Self { lipschitz, beta, tau, n, sigma, horizon, gammas: unit_gammas() }
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        check_common(self.lipschitz, self.beta, self.tau)?;
        if self.beta == 0.0 {
            // 1/(βτ²n) is undefined at β = 0.
            return Err(TheoryError::BadGap(self.beta));
        }
        if self.n == 0 {
            return Err(TheoryError::Invalid("n must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(TheoryError::Invalid(format!("sigma must be finite and ≥ 0, got {}", self.sigma)));
        }
        if self.horizon < self.tau + 1 {
            return Err(TheoryError::ShortHorizon { k: self.horizon, min: self.tau + 1 });
        }
        if self.gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(TheoryError::Invalid("gamma constants must be positive".into()));
        }
        Ok(())
    }
}

fn check_common(lipschitz: f64, beta: f64, tau: u64) -> Result<(), TheoryError> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(TheoryError::BadSmoothness(lipschitz));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(TheoryError::BadGap(beta));
    }
    if tau < 2 {
        return Err(TheoryError::PeriodOutOfScope(tau));
    }
    Ok(())
}

/// `min{1/(2L), 1/(4√6 β τ² L)}`. A gap of exactly 0 leaves only the first branch.
pub fn stepsize_bound(lipschitz: f64, beta: f64, tau: u64) -> Result<f64, TheoryError> {
    check_common(lipschitz, beta, tau)?;
    let first = 1.0 / (2.0 * lipschitz);
    let second = 1.0 / (4.0 * 6f64.sqrt() * beta * (tau * tau) as f64 * lipschitz);
    Ok(first.min(second))
}

/// Tuned stepsize `min{√(c₁/(c₂K)), √(c₁/(c₃K)), 1/(2L), 1/(4√6βτ²L)}` with
/// `c₁ = L²`, `c₂ = Lσ²/n`, `c₃ = β²τ²L²σ²/(1−β²)`. With `σ = 0` the first
/// two branches are infinite and drop out.
pub fn corollary_stepsize(bp: &BoundParams) -> Result<f64, TheoryError> {
    bp.validate()?;
    let l = bp.lipschitz;
    let k = bp.horizon as f64;
    let tau = bp.tau as f64;
    let s2 = bp.sigma * bp.sigma;
    let c1 = l * l;
    let c2 = l * s2 / bp.n as f64;
    let c3 = bp.beta * bp.beta * tau * tau * l * l * s2 / (1.0 - bp.beta * bp.beta);
    let branch = |c: f64| if c > 0.0 { (c1 / (c * k)).sqrt() } else { f64::INFINITY };
    let base = stepsize_bound(l, bp.beta, bp.tau)?;
    Ok(branch(c2).min(branch(c3)).min(base))
}

/// The tuned stepsize analysis assumes `n ≫ 1/(βτ)²`; returns a message when
/// `nβ²τ² < 10`.
pub fn corollary_regime_warning(bp: &BoundParams) -> Option<String> {
    let product = bp.n as f64 * bp.beta * bp.beta * (bp.tau * bp.tau) as f64;
    (product < 10.0).then(|| {
        format!("n·β²·τ² = {product:.4} < 10: the tuned stepsize assumes n ≫ 1/(βτ)²")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBound {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub total: f64,
}

pub fn rate_bound_theorem(bp: &BoundParams) -> Result<RateBound, TheoryError> {
    bp.validate()?;
    let [g1, g2, g3, ..] = bp.gammas;
    let l2 = bp.lipschitz * bp.lipschitz;
    let k = bp.horizon as f64;
    let n = bp.n as f64;
    let tau2 = (bp.tau * bp.tau) as f64;
    let term1 = g1 * l2 / (n * k);
    let term2 = g2 * bp.beta * tau2 * l2 / k;
    let term3 = g3
        * bp.sigma
        * bp.sigma
        * (1.0 / ((1.0 - bp.beta * bp.beta) * tau2) + 1.0 / (bp.beta * tau2 * n));
    Ok(RateBound { term1, term2, term3, total: term1 + term2 + term3 })
}

/// Tuned-stepsize rate `γ₄βτ²L³/K + γ₅L^{3/2}σ/√(nK) + γ₆βτL²σ/(√(1−β²)√K)`.
pub fn rate_bound_corollary(bp: &BoundParams) -> Result<RateBound, TheoryError> {
    bp.validate()?;
    let [_, _, _, g4, g5, g6] = bp.gammas;
    let l = bp.lipschitz;
    let k = bp.horizon as f64;
    let n = bp.n as f64;
    let tau = bp.tau as f64;
    let term1 = g4 * bp.beta * tau * tau * l.powi(3) / k;
    let term2 = g5 * l.powf(1.5) * bp.sigma / (n * k).sqrt();
    let term3 = g6 * bp.beta * tau * l * l * bp.sigma / ((1.0 - bp.beta * bp.beta).sqrt() * k.sqrt());
    Ok(RateBound { term1, term2, term3, total: term1 + term2 + term3 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub tau: u64,
    pub stepsize_bound: f64,
    pub corollary_stepsize: f64,
    pub bound: RateBound,
}

/// Evaluates the bound for each period in `taus`, keeping all other parameters.
pub fn tau_tradeoff_table(bp: &BoundParams, taus: &[u64]) -> Result<Vec<TradeoffRow>, TheoryError> {
    taus.iter()
        .map(|&tau| {
            let p = BoundParams { tau, ..bp.clone() };
            Ok(TradeoffRow {
                tau,
                stepsize_bound: stepsize_bound(p.lipschitz, p.beta, tau)?,
                corollary_stepsize: corollary_stepsize(&p)?,
                bound: rate_bound_theorem(&p)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stepsize_examples() {
        let expected = 1.0 / (8.0 * 6f64.sqrt());
        assert!((stepsize_bound(1.0, 0.5, 2).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.051_031_0).abs() < 1e-7);
        // 4√6 · 0.01 · 4 ≈ 0.39 < 2, so 1/(2L) is active
        assert_eq!(stepsize_bound(1.0, 0.01, 2).unwrap(), 0.5);
        let half = stepsize_bound(2.0, 0.5, 2).unwrap();
        assert!((half - expected / 2.0).abs() < 1e-15);
    }

    #[test]
    fn stepsize_rejects_tau_one() {
        assert_eq!(stepsize_bound(1.0, 0.5, 1), Err(TheoryError::PeriodOutOfScope(1)));
        assert_eq!(stepsize_bound(1.0, 1.0, 4), Err(TheoryError::BadGap(1.0)));
        assert_eq!(stepsize_bound(0.0, 0.5, 4), Err(TheoryError::BadSmoothness(0.0)));
    }

    #[test]
    fn corollary_example() {
        let bp = BoundParams::new(1.0, 0.5, 4, 100, 1.0, 10_000);
        let a = corollary_stepsize(&bp).unwrap();
        // c2 = 0.01, c3 = 16/3: branches 0.1, sqrt(3/160000), 0.5, 1/(64√6)
        let oracle = (3.0f64 / 160_000.0).sqrt();
        assert!((a - oracle).abs() < 1e-15);
        assert!((a - 0.004_330_1).abs() < 1e-6);
    }

    #[test]
    fn corollary_without_noise_is_theorem_bound() {
        let bp = BoundParams::new(3.0, 0.7, 5, 16, 0.0, 1000);
        assert_eq!(corollary_stepsize(&bp).unwrap(), stepsize_bound(3.0, 0.7, 5).unwrap());
    }

    #[test]
    fn corollary_noise_branches_scale_with_horizon() {
        // large n and small β make both noise branches dominate the cap
        let bp = BoundParams::new(1.0, 0.01, 2, 1, 1.0, 1_000_000);
        let a = corollary_stepsize(&bp).unwrap();
        let b = corollary_stepsize(&BoundParams { horizon: 4_000_000, ..bp }).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regime_warning() {
        assert!(corollary_regime_warning(&BoundParams::new(1.0, 0.1, 2, 4, 1.0, 10)).is_some());
        assert!(corollary_regime_warning(&BoundParams::new(1.0, 0.9, 20, 64, 1.0, 100)).is_none());
    }

    #[test]
    fn rate_bound_example() {
        let bp = BoundParams::new(1.0, 0.9, 10, 64, 0.1, 1000);
        let r = rate_bound_theorem(&bp).unwrap();
        assert!((r.term1 - 1.0 / 64_000.0).abs() < 1e-18);
        assert!((r.term2 - 0.09).abs() < 1e-15);
        // 0.01 · (1/19 + 1/5760)
        let t3 = 0.01 * (1.0 / 19.0 + 1.0 / 5760.0);
        assert!((r.term3 - t3).abs() < 1e-17);
        assert!((r.term3 - 5.280_52e-4).abs() < 1e-8);
        assert!((r.total - (r.term1 + r.term2 + r.term3)).abs() < 1e-18);
    }

    #[test]
    fn rate_bound_scaling() {
        let bp = BoundParams::new(2.0, 0.6, 4, 32, 0.0, 500);
        let a = rate_bound_theorem(&bp).unwrap();
        let b = rate_bound_theorem(&BoundParams { tau: 8, ..bp.clone() }).unwrap();
        assert_eq!(a.term3, 0.0);
        assert!((b.term2 / a.term2 - 4.0).abs() < 1e-12);
        assert_eq!(a.term1, b.term1);
        let c = rate_bound_theorem(&BoundParams { beta: 0.3, ..bp.clone() }).unwrap();
        assert!((a.term2 / c.term2 - 2.0).abs() < 1e-12);
        assert_eq!(a.term1, c.term1);
    }

    #[test]
    fn tradeoff_table_rows() {
        let bp = BoundParams::new(1.0, 0.99, 20, 64, 0.0, 2000);
        let rows = tau_tradeoff_table(&bp, &[20, 50, 100, 200]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.windows(2).all(|w| w[0].bound.total < w[1].bound.total));
    }

    #[test]
    fn horizon_must_exceed_period() {
        let bp = BoundParams::new(1.0, 0.5, 10, 4, 0.1, 10);
        assert_eq!(rate_bound_theorem(&bp), Err(TheoryError::ShortHorizon { k: 10, min: 11 }));
    }
}
