//! Amplitude estimation without phase estimation.
//!
//! The circuit `Q^m · P · D` is sampled at a schedule of amplification depths
//! `m`; the photon lands on a payoff (masked ancilla-1) mode with probability
//! `sin²((2m + 1)α)`. The angle `α` is recovered by maximizing the joint
//! binomial likelihood over all depths, restricted to the branch allowed by the
//! unamplified (`m = 0`) data, and the payoff is `sin²α · (s_max − K)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::circuit::{
    ancilla_one_prob, build_loader, build_payoff, build_q, fit_loader, initial_state, mode,
    payoff_angles, sample_shots, CircuitUnitary, PayoffAngles, UnaryState,
};
use crate::error::{invalid, Error, Result};
use crate::market::{expected_payoff_discrete, DiscreteDistribution};
use crate::rng;

/// Amplification depths and sampling effort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AESchedule {
    pub depths: Vec<u32>,
    pub shots_per_depth: u64,
    pub repeats: u32,
}

impl Default for AESchedule {
    /// Depths `0..=50`, 100 shots, 50 repeats.
    fn default() -> Self {
        Self::linear(50, 100, 50)
    }
}

impl AESchedule {
    pub fn new(depths: Vec<u32>, shots_per_depth: u64, repeats: u32) -> Result<Self> {
        let s = Self { depths, shots_per_depth, repeats };
        s.validate()?;
        Ok(s)
    }

    /// Depths `0, 1, …, max_depth`.
    pub fn linear(max_depth: u32, shots_per_depth: u64, repeats: u32) -> Self {
        Self { depths: (0..=max_depth).collect(), shots_per_depth, repeats }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.first() != Some(&0) {
            return Err(invalid("schedule depths must start at 0"));
        }
        if self.depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("schedule depths must be strictly increasing"));
        }
        if self.shots_per_depth == 0 {
            return Err(invalid("shots_per_depth must be >= 1"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be >= 1"));
        }
        Ok(())
    }

    /// Applications of `D` and `P` spent by the whole schedule.
    pub fn oracle_calls(&self) -> u64 {
        u64::from(self.repeats) * oracle_calls(&self.depths, self.shots_per_depth)
    }
}

/// `shots · Σ (2m + 1)` over `depths`.
pub fn oracle_calls(depths: &[u32], shots: u64) -> u64 {
    depths.iter().map(|&m| shots * (2 * u64::from(m) + 1)).sum()
}

/// Loader, payoff and amplification operators of one pricing instance.
#[derive(Debug, Clone)]
pub struct PricingCircuit {
    loader: CircuitUnitary,
    payoff: CircuitUnitary,
    q: CircuitUnitary,
    angles: PayoffAngles,
    prepared: UnaryState,
}

impl PricingCircuit {
    /// Circuit loading `dist` exactly and encoding the call payoff at `strike`.
    pub fn new(dist: &DiscreteDistribution, strike: f64) -> Result<Self> {
        let loader = build_loader(&fit_loader(dist)?, dist.len())?;
        Self::from_parts(loader, payoff_angles(dist, strike))
    }

    pub fn from_parts(loader: CircuitUnitary, angles: PayoffAngles) -> Result<Self> {
        let n = angles.len();
        let payoff = build_payoff(&angles);
        let q = build_q(&loader, &payoff, n)?;
        let prepared = initial_state(n)?.apply(&loader)?.apply(&payoff)?;
        Ok(Self { loader, payoff, q, angles, prepared })
    }

    pub fn n_bins(&self) -> usize {
        self.angles.len()
    }

    pub fn loader(&self) -> &CircuitUnitary {
        &self.loader
    }

    pub fn payoff(&self) -> &CircuitUnitary {
        &self.payoff
    }

    pub fn amplifier(&self) -> &CircuitUnitary {
        &self.q
    }

    pub fn angles(&self) -> &PayoffAngles {
        &self.angles
    }

    /// `Q^m · P · D · init`.
    pub fn amplified_state(&self, m: u32) -> UnaryState {
        let mut state = self.prepared.clone();
        for _ in 0..m {
            state = state.apply(&self.q).expect("dimensions checked at construction");
        }
        state
    }

    /// States for each of the sorted `depths`, reusing the previous power of `Q`.
    pub fn amplified_states(&self, depths: &[u32]) -> Vec<UnaryState> {
        let mut out = Vec::with_capacity(depths.len());
        let mut state = self.prepared.clone();
        let mut at = 0u32;
        for &m in depths {
            debug_assert!(m >= at, "depths must be sorted");
            for _ in at..m {
                state = state.apply(&self.q).expect("dimensions checked at construction");
            }
            at = m;
            out.push(state.clone());
        }
        out
    }

    /// Probability that one shot at depth `m` hits a payoff mode.
    pub fn hit_probability(&self, m: u32) -> f64 {
        ancilla_one_prob(&self.amplified_state(m), self.angles.strike_mask())
            .expect("mask sized at construction")
    }

    /// The angle `α` with `sin²α` equal to the unamplified hit probability.
    pub fn alpha(&self) -> f64 {
        self.hit_probability(0).clamp(0.0, 1.0).sqrt().asin()
    }

    fn hits(&self, counts: &[u64]) -> u64 {
        self.angles
            .strike_mask()
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| counts[mode(i, 1)])
            .sum()
    }

    fn sample_hits(&self, state: &UnaryState, shots: u64, rng: &mut rng::Rng) -> u64 {
        self.hits(&rng::multinomial(&state.probabilities(), shots, rng))
    }
}

/// Samples `shots` photons through `Q^m · P · D` and counts payoff hits.
pub fn run_depth(circuit: &PricingCircuit, m: u32, shots: u64, seed: u64) -> Result<(u64, u64)> {
    let counts = sample_shots(&circuit.amplified_state(m), shots, seed)?;
    Ok((circuit.hits(&counts), shots))
}

/// Wilson score interval for a binomial success probability.
pub fn binomial_ci(hits: u64, shots: u64, confidence: f64) -> Result<(f64, f64)> {
    if shots == 0 || hits > shots {
        return Err(invalid(format!("need 0 <= hits <= shots and shots > 0, got {hits}/{shots}")));
    }
    Ok(wilson(hits as f64, shots as f64, z_score(confidence)?))
}

fn z_score(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

fn wilson(hits: f64, shots: f64, z: f64) -> (f64, f64) {
    let p = hits / shots;
    let z2 = z * z;
    let denom = 1.0 + z2 / shots;
    let center = (p + z2 / (2.0 * shots)) / denom;
    let half = z / denom * (p * (1.0 - p) / shots + z2 / (4.0 * shots * shots)).sqrt();
    let lo = if hits <= 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits >= shots { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Measured outcome at one depth of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub depth: u32,
    pub hits: u64,
    pub shots: u64,
    pub frequency: f64,
    /// 95% Wilson interval of `frequency`.
    pub wilson: (f64, f64),
}

impl DepthRecord {
    pub fn new(depth: u32, hits: u64, shots: u64) -> Result<Self> {
        let wilson = binomial_ci(hits, shots, 0.95)?;
        Ok(Self { depth, hits, shots, frequency: hits as f64 / shots as f64, wilson })
    }

    pub fn observation(&self) -> Observation {
        Observation { depth: self.depth, hits: self.hits as f64, shots: self.shots as f64 }
    }
}

/// Likelihood input: possibly fractional counts, so that infinite-shot
/// (noiseless) frequencies can be expressed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub depth: u32,
    pub hits: f64,
    pub shots: f64,
}

impl Observation {
    /// Counts that match `sin²((2m + 1)α)` exactly.
    pub fn noiseless(depth: u32, alpha: f64, shots: f64) -> Self {
        let p = ((2 * depth + 1) as f64 * alpha).sin().powi(2);
        Self { depth, hits: p * shots, shots }
    }

    fn log_likelihood(&self, alpha: f64) -> f64 {
        let p = ((2 * self.depth + 1) as f64 * alpha).sin().powi(2);
        xlogy(self.hits, p) + xlogy(self.shots - self.hits, 1.0 - p)
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Level of the reported likelihood-ratio interval.
    pub confidence: f64,
    /// Level of the `m = 0` Wilson interval that fixes the branch of `α`.
    pub anchor_confidence: f64,
    /// Records whose best restricted fit is rejected at this p-value are inconsistent.
    pub consistency_pvalue: f64,
    /// Coarse grid points per period of the fastest oscillating depth.
    pub points_per_period: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            anchor_confidence: 0.999,
            consistency_pvalue: 1e-6,
            points_per_period: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub alpha: f64,
    pub ci: (f64, f64),
    pub log_likelihood: f64,
}

/// Maximum-likelihood `α ∈ [0, π/2]` from observations at several depths.
///
/// The search is confined to the angles allowed by the `m = 0` Wilson interval
/// at `anchor_confidence`. A coarse grid locates the global peak there and a
/// golden-section search refines it. The interval is the hull of the
/// likelihood-ratio region within twelve Fisher widths of the peak; the
/// likelihood has narrow notches wherever `sin²` touches 0 or 1, so the
/// region itself need not be connected.
pub fn recover_angle(observations: &[Observation], config: &EstimatorConfig) -> Result<AngleEstimate> {
    let base: Vec<&Observation> = observations.iter().filter(|o| o.depth == 0).collect();
    if base.is_empty() {
        return Err(invalid("observations must include depth 0"));
    }
    if let Some(bad) = observations.iter().find(|o| !(o.shots > 0.0 && (0.0..=o.shots).contains(&o.hits))) {
        return Err(invalid(format!("bad counts {}/{} at depth {}", bad.hits, bad.shots, bad.depth)));
    }
    let (h0, s0) = base.iter().fold((0.0, 0.0), |(h, s), o| (h + o.hits, s + o.shots));
    let (p_lo, p_hi) = wilson(h0, s0, z_score(config.anchor_confidence)?);
    let lo = p_lo.sqrt().asin();
    let hi = p_hi.sqrt().asin().min(FRAC_PI_2);

    let ll = |a: f64| -> f64 { observations.iter().map(|o| o.log_likelihood(a)).sum() };

    let max_depth = observations.iter().map(|o| o.depth).max().unwrap_or(0);
    let period = PI / f64::from(2 * max_depth + 1);
    let step_target = period / config.points_per_period.max(4) as f64;
    let intervals = (((hi - lo) / step_target).ceil() as usize).max(64);
    let step = (hi - lo) / intervals as f64;

    let (mut best_a, mut best_ll) = (lo, f64::NEG_INFINITY);
    for k in 0..=intervals {
        let a = if k == intervals { hi } else { lo + step * k as f64 };
        let v = ll(a);
        if v > best_ll {
            best_a = a;
            best_ll = v;
        }
    }
    if !best_ll.is_finite() {
        return Err(Error::InconsistentRecords(format!(
            "no angle in [{lo:.6}, {hi:.6}] explains the records"
        )));
    }
    let (alpha, peak) = golden_max(&ll, (best_a - step).max(lo), (best_a + step).min(hi), 1e-12);
    let (alpha, peak) = if peak >= best_ll { (alpha, peak) } else { (best_a, best_ll) };

    check_consistency(observations, peak, config.consistency_pvalue)?;

    let threshold = peak - 0.5 * chi2_quantile(1.0, config.confidence)?;
    let fisher: f64 = observations
        .iter()
        .map(|o| 4.0 * o.shots * f64::from(2 * o.depth + 1).powi(2))
        .sum();
    let (ci_lo, ci_hi) = lr_hull(&ll, alpha, 12.0 / fisher.sqrt(), threshold);
    Ok(AngleEstimate { alpha, ci: (ci_lo, ci_hi), log_likelihood: peak })
}

fn chi2_quantile(dof: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence must lie in (0, 1), got {level}")));
    }
    Ok(ChiSquared::new(dof).expect("positive dof").inverse_cdf(level))
}

/// Deviance of the fit against the per-depth saturated model.
fn check_consistency(observations: &[Observation], peak: f64, pvalue: f64) -> Result<()> {
    let mut depths: Vec<u32> = observations.iter().map(|o| o.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    if depths.len() < 2 {
        return Ok(());
    }
    let saturated: f64 = depths
        .iter()
        .map(|&m| {
            let (h, s) = observations
                .iter()
                .filter(|o| o.depth == m)
                .fold((0.0, 0.0), |(h, s), o| (h + o.hits, s + o.shots));
            let p = h / s;
            xlogy(h, p) + xlogy(s - h, 1.0 - p)
        })
        .sum();
    let deviance = (2.0 * (saturated - peak)).max(0.0);
    let dist = ChiSquared::new((depths.len() - 1) as f64).expect("positive dof");
    let p = 1.0 - dist.cdf(deviance);
    if p < pvalue {
        return Err(Error::InconsistentRecords(format!(
            "deviance {deviance:.3} over {} depths (p = {p:.3e})",
            depths.len()
        )));
    }
    Ok(())
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Hull of `{f >= threshold}` within `reach` of `peak`, clipped to
/// `[0, π/2]`. Sampled on a grid, edges refined by bisection.
fn lr_hull(f: &impl Fn(f64) -> f64, peak: f64, reach: f64, threshold: f64) -> (f64, f64) {
    const CELLS: usize = 480;
    let lo = (peak - reach).max(0.0);
    let hi = (peak + reach).min(FRAC_PI_2);
    let step = (hi - lo) / CELLS as f64;
    let xs: Vec<f64> = (0..=CELLS).map(|k| if k == CELLS { hi } else { lo + step * k as f64 }).collect();
    let inside: Vec<bool> = xs.iter().map(|&x| f(x) >= threshold).collect();
    let first = inside.iter().position(|&b| b);
    let last = inside.iter().rposition(|&b| b);
    let (Some(i), Some(j)) = (first, last) else {
        return (peak, peak);
    };
    let left = if i == 0 { lo } else { bisect(f, xs[i], xs[i - 1], threshold) };
    let right = if j == CELLS { hi } else { bisect(f, xs[j], xs[j + 1], threshold) };
    (left.min(peak), right.max(peak))
}

fn bisect(f: &impl Fn(f64) -> f64, mut inside: f64, mut outside: f64, threshold: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if f(mid) >= threshold {
            inside = mid;
        } else {
            outside = mid;
        }
        if (outside - inside).abs() < 1e-13 {
            break;
        }
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AEResult {
    pub records: Vec<DepthRecord>,
    pub alpha_hat: f64,
    pub alpha_ci: (f64, f64),
    pub payoff_hat: f64,
    pub payoff_ci: (f64, f64),
    pub oracle_calls: u64,
}

/// Full pipeline: build the circuit for `dist` and `strike`, run `schedule`
/// (all repeats of a depth are pooled), recover `α` and scale to a payoff.
pub fn estimate_payoff(
    dist: &DiscreteDistribution,
    strike: f64,
    schedule: &AESchedule,
    seed: u64,
) -> Result<AEResult> {
    let circuit = PricingCircuit::new(dist, strike)?;
    estimate_with(&circuit, schedule, &EstimatorConfig::default(), seed)
}

pub fn estimate_with(
    circuit: &PricingCircuit,
    schedule: &AESchedule,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<AEResult> {
    schedule.validate()?;
    let states = circuit.amplified_states(&schedule.depths);
    let records = schedule
        .depths
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(k, (&m, state))| {
            let hits: u64 = (0..schedule.repeats)
                .map(|r| {
                    let mut rng = rng::substream(seed, &[u64::from(r), k as u64]);
                    circuit.sample_hits(state, schedule.shots_per_depth, &mut rng)
                })
                .sum();
            DepthRecord::new(m, hits, schedule.shots_per_depth * u64::from(schedule.repeats))
        })
        .collect::<Result<Vec<_>>>()?;
    let observations: Vec<Observation> = records.iter().map(DepthRecord::observation).collect();
    let est = recover_angle(&observations, config)?;
    let scale = circuit.angles().scale();
    let payoff = |a: f64| if scale > 0.0 { a.sin().powi(2) * scale } else { 0.0 };
    Ok(AEResult {
        records,
        alpha_hat: est.alpha,
        alpha_ci: est.ci,
        payoff_hat: payoff(est.alpha),
        payoff_ci: (payoff(est.ci.0), payoff(est.ci.1)),
        oracle_calls: schedule.oracle_calls(),
    })
}

/// One row of a convergence study: estimates that used the first
/// `depth_index + 1` depths of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub depth_index: usize,
    pub m: u32,
    /// Oracle calls of one estimate; the classical baseline draws this many samples.
    pub oracle_calls: u64,
    pub payoff_mean: f64,
    pub payoff_std: f64,
    pub abs_error: f64,
    pub mc_error: f64,
}

/// Repeats the estimate `schedule.repeats` times on independent streams.
/// For every prefix of `schedule.depths` it reports the spread and the mean
/// absolute error against the exact discrete payoff, next to classical
/// sampling from `dist` with the same number of oracle calls.
pub fn convergence_study(
    dist: &DiscreteDistribution,
    strike: f64,
    schedule: &AESchedule,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    convergence_study_with(&PricingCircuit::new(dist, strike)?, dist, strike, schedule, &EstimatorConfig::default(), seed)
}

pub fn convergence_study_with(
    circuit: &PricingCircuit,
    dist: &DiscreteDistribution,
    strike: f64,
    schedule: &AESchedule,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    schedule.validate()?;
    let exact = expected_payoff_discrete(dist, strike);
    let scale = circuit.angles().scale();
    let states = circuit.amplified_states(&schedule.depths);
    let shots = schedule.shots_per_depth;
    let budgets: Vec<u64> = (0..schedule.depths.len())
        .map(|k| oracle_calls(&schedule.depths[..=k], shots))
        .collect();
    let payoffs: Vec<f64> = dist.prices().iter().map(|&s| (s - strike).max(0.0)).collect();

    // per repeat: (quantum estimate, classical estimate) for every prefix
    let runs: Vec<Vec<(f64, f64)>> = (0..schedule.repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let r = u64::from(r);
            let observations: Vec<Observation> = schedule
                .depths
                .iter()
                .zip(&states)
                .enumerate()
                .map(|(k, (&m, state))| {
                    let mut rng = rng::substream(seed, &[r, k as u64]);
                    let hits = circuit.sample_hits(state, shots, &mut rng);
                    Observation { depth: m, hits: hits as f64, shots: shots as f64 }
                })
                .collect();
            (0..observations.len())
                .map(|k| {
                    let q = if scale > 0.0 {
                        recover_angle(&observations[..=k], config)?.alpha.sin().powi(2) * scale
                    } else {
                        0.0
                    };
                    let mut rng = rng::substream(seed, &[r, k as u64, MC_STREAM]);
                    let counts = rng::multinomial(dist.probs(), budgets[k], &mut rng);
                    let mc = counts.iter().zip(&payoffs).map(|(&c, f)| c as f64 * f).sum::<f64>()
                        / budgets[k] as f64;
                    Ok((q, mc))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = runs.len() as f64;
    Ok((0..schedule.depths.len())
        .map(|k| {
            let qs: Vec<f64> = runs.iter().map(|run| run[k].0).collect();
            let mean = qs.iter().sum::<f64>() / reps;
            let var = if runs.len() > 1 {
                qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (reps - 1.0)
            } else {
                0.0
            };
            ConvergenceRow {
                depth_index: k,
                m: schedule.depths[k],
                oracle_calls: budgets[k],
                payoff_mean: mean,
                payoff_std: var.sqrt(),
                abs_error: qs.iter().map(|q| (q - exact).abs()).sum::<f64>() / reps,
                mc_error: runs.iter().map(|run| (run[k].1 - exact).abs()).sum::<f64>() / reps,
            }
        })
        .collect())
}

const MC_STREAM: u64 = 0x4d43;

/// Least-squares slope of `ln y` against `ln x`, skipping non-positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
