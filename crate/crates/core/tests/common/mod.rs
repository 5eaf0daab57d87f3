#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use unary_pricing::{BsmParams, DiscreteDistribution};

pub fn rng(seed: u64) -> unary_pricing::rng::Rng {
    unary_pricing::rng::from_seed(seed)
}

/// Random law on `n` increasing prices with a strike strictly inside the range.
pub fn random_instance(r: &mut impl Rng, n: usize) -> (DiscreteDistribution, f64) {
    let mut prices: Vec<f64> = Vec::with_capacity(n);
    let mut s = r.random_range(0.2..2.0);
    for _ in 0..n {
        prices.push(s);
        s += r.random_range(0.05..1.0);
    }
    let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
    let dist = DiscreteDistribution::from_weights(prices.clone(), weights).unwrap();
    let strike = r.random_range(prices[0]..prices[n - 1]);
    (dist, strike)
}

/// Undiscounted `E[max(S_T − K, 0)]` for a log-normal terminal law, closed form.
pub fn lognormal_call(p: &BsmParams) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    let fwd = p.s0 * (p.r * p.t).exp();
    let v = p.sigma * p.t.sqrt();
    let d1 = ((fwd / p.strike).ln() + 0.5 * v * v) / v;
    fwd * std.cdf(d1) - p.strike * std.cdf(d1 - v)
}

/// Same quantity by composite Simpson over the standard normal variable.
pub fn lognormal_call_simpson(p: &BsmParams) -> f64 {
    let mu = p.s0.ln() + (p.r - 0.5 * p.sigma * p.sigma) * p.t;
    let v = p.sigma * p.t.sqrt();
    let (a, b, n) = (-12.0, 12.0, 20_000);
    let h = (b - a) / n as f64;
    let f = |z: f64| {
        let pay = ((mu + v * z).exp() - p.strike).max(0.0);
        pay * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
