//! Black–Scholes–Merton asset model.
//!
//! Under `dS = S r dt + S σ dW` the terminal price is log-normal,
//! `S_T = S₀ exp((r − σ²/2) T + σ W_T)`. This module discretizes that law onto
//! `n` unary bins and provides the classical Monte Carlo baseline the circuit
//! estimate is compared against. Payoffs are undiscounted expectations of
//! `max(0, S_T − K)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Market model parameters and strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmParams {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
    pub t: f64,
    pub strike: f64,
}

impl BsmParams {
    pub fn new(s0: f64, r: f64, sigma: f64, t: f64, strike: f64) -> Result<Self> {
        let params = Self { s0, r, sigma, t, strike };
        params.validate()?;
        Ok(params)
    }

    /// `S₀ = 1, r = 0, σ = 0.4, T = 1, K = 1`.
    pub fn reference() -> Self {
        Self { s0: 1.0, r: 0.0, sigma: 0.4, t: 1.0, strike: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(invalid(format!("s0 must be > 0, got {}", self.s0)));
        }
        if !self.r.is_finite() {
            return Err(invalid(format!("r must be finite, got {}", self.r)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(invalid(format!("t must be > 0, got {}", self.t)));
        }
        if !(self.strike.is_finite() && self.strike >= 0.0) {
            return Err(invalid(format!("strike must be >= 0, got {}", self.strike)));
        }
        Ok(())
    }
}

/// Bin prices `sᵢ` (strictly increasing) with their probabilities `pᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    prices: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(prices: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if prices.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: prices.len(), got: probs.len() });
        }
        if prices.len() < 2 {
            return Err(Error::InvalidBinCount(prices.len()));
        }
        if prices.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidDistribution("prices must be finite".into()));
        }
        if prices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDistribution("prices must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution("probabilities must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { prices, probs })
    }

    /// Like [`DiscreteDistribution::new`] but rescales non-negative weights to sum to one.
    pub fn from_weights(prices: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(prices, probs)
    }

    /// Normal law `N(mean, std)` binned like [`discretize`] over its central `coverage` mass.
    pub fn from_normal(mean: f64, std: f64, n: usize, coverage: f64) -> Result<Self> {
        if !(std.is_finite() && std > 0.0 && mean.is_finite()) {
            return Err(invalid(format!("normal law needs finite mean and std > 0, got ({mean}, {std})")));
        }
        check_binning(n, coverage)?;
        let normal = Normal::new(mean, std).map_err(|e| invalid(e.to_string()))?;
        let lo = normal.inverse_cdf(0.5 - coverage / 2.0);
        let hi = normal.inverse_cdf(0.5 + coverage / 2.0);
        bin_law(lo, hi, n, |x| normal.cdf(x))
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        self.prices[self.prices.len() - 1]
    }

    /// Same bin prices, new probabilities.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.prices.clone(), probs)
    }
}

/// Mean and standard deviation of `ln S_T`.
pub fn lognormal_terminal_params(params: &BsmParams) -> Result<(f64, f64)> {
    params.validate()?;
    let mu_log = params.s0.ln() + (params.r - 0.5 * params.sigma * params.sigma) * params.t;
    let sigma_log = params.sigma * params.t.sqrt();
    Ok((mu_log, sigma_log))
}

/// Equal-width price bins over the central `coverage` quantile range of the
/// terminal law. Bin value is the midpoint; mass is the exact CDF difference,
/// renormalized over the covered range.
pub fn discretize(params: &BsmParams, n: usize, coverage: f64) -> Result<DiscreteDistribution> {
    check_binning(n, coverage)?;
    let (mu_log, sigma_log) = lognormal_terminal_params(params)?;
    let normal = Normal::new(mu_log, sigma_log).map_err(|e| invalid(e.to_string()))?;
    let lo = normal.inverse_cdf(0.5 - coverage / 2.0).exp();
    let hi = normal.inverse_cdf(0.5 + coverage / 2.0).exp();
    bin_law(lo, hi, n, |s| if s <= 0.0 { 0.0 } else { normal.cdf(s.ln()) })
}

fn check_binning(n: usize, coverage: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidBinCount(n));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(invalid(format!("coverage must lie in (0, 1), got {coverage}")));
    }
    Ok(())
}

fn bin_law(lo: f64, hi: f64, n: usize, cdf: impl Fn(f64) -> f64) -> Result<DiscreteDistribution> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::DegenerateRange(format!("quantile range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / n as f64;
    let edges: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + width * i as f64 })
        .collect();
    let prices: Vec<f64> = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
    if prices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateRange(format!(
            "bins of width {width} collapse at price scale {hi}"
        )));
    }
    let weights: Vec<f64> = edges.windows(2).map(|e| (cdf(e[1]) - cdf(e[0])).max(0.0)).collect();
    DiscreteDistribution::from_weights(prices, weights)
        .map_err(|e| Error::DegenerateRange(e.to_string()))
}

/// `Σ_{sᵢ > K} pᵢ (sᵢ − K)`. A bin priced exactly at the strike pays nothing.
pub fn expected_payoff_discrete(dist: &DiscreteDistribution, strike: f64) -> f64 {
    dist.prices
        .iter()
        .zip(&dist.probs)
        .filter(|(s, _)| **s > strike)
        .map(|(s, p)| p * (s - strike))
        .sum()
}

/// How Monte Carlo paths reach maturity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathScheme {
    /// One draw from the closed-form log-normal terminal law.
    #[default]
    Exact,
    /// Euler–Maruyama random walk with `steps` increments.
    Euler { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

const MC_BATCH: u64 = 1 << 14;

pub fn mc_price(params: &BsmParams, n_paths: u64, seed: u64) -> Result<McResult> {
    mc_price_with(params, n_paths, seed, PathScheme::Exact)
}

/// Monte Carlo estimate of the expected call payoff.
///
/// Paths are split into fixed-size batches, each with its own random stream,
/// and batch statistics are merged in batch order, so the result is the same
/// for any thread count.
pub fn mc_price_with(
    params: &BsmParams,
    n_paths: u64,
    seed: u64,
    scheme: PathScheme,
) -> Result<McResult> {
    params.validate()?;
    if n_paths < 2 {
        return Err(invalid(format!("n_paths must be >= 2, got {n_paths}")));
    }
    if let PathScheme::Euler { steps: 0 } = scheme {
        return Err(invalid("euler scheme needs at least one step"));
    }
    let p = *params;
    let n_batches = n_paths.div_ceil(MC_BATCH);
    let stats: Vec<Moments> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let len = MC_BATCH.min(n_paths - b * MC_BATCH);
            let mut rng = rng::substream(seed, &[b]);
            let mut acc = Moments::default();
            for _ in 0..len {
                let s_t = terminal_price(&p, scheme, &mut rng);
                acc.push((s_t - p.strike).max(0.0));
            }
            acc
        })
        .collect();
    let total = stats.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.count > 1 { total.m2 / (total.count - 1) as f64 } else { 0.0 };
    Ok(McResult {
        estimate: total.mean,
        std_error: (var / total.count as f64).sqrt(),
        n_paths,
        seed,
    })
}

fn terminal_price(p: &BsmParams, scheme: PathScheme, rng: &mut rng::Rng) -> f64 {
    match scheme {
        PathScheme::Exact => {
            let z: f64 = StandardNormal.sample(rng);
            p.s0 * ((p.r - 0.5 * p.sigma * p.sigma) * p.t + p.sigma * p.t.sqrt() * z).exp()
        }
        PathScheme::Euler { steps } => {
            let dt = p.t / steps as f64;
            let sq = dt.sqrt();
            let mut s = p.s0;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(rng);
                s += s * (p.r * dt + p.sigma * sq * z);
            }
            s
        }
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        let (na, nb, n) = (a.count as f64, b.count as f64, count as f64);
        Self {
            count,
            mean: a.mean + delta * nb / n,
            m2: a.m2 + b.m2 + delta * delta * na * nb / n,
        }
    }
}
