//! Hybrid Wasserstein GAN for loading a market distribution.
//!
//! The generator is the loader circuit itself: `n − 1` beam-splitter angles,
//! its output the photon distribution over bins (exact, or estimated from a
//! finite number of detected photons). The critic is a small dense network
//! trained by gradient ascent on `E[score(real)] − E[score(fake)]` with weight
//! clipping. The generator never sees a gradient; a genetic algorithm evolves
//! a population of angle vectors using critic scores as fitness.

use std::f64::consts::FRAC_PI_2;
use std::io::{self, Write};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_loader, initial_state, sample_shots, LoaderParams};
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Loader circuit used as a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorAnsatz {
    pub n: usize,
    /// Splitter angles, one per swp block; the split probability is `cos²φ`.
    pub params: Vec<f64>,
    /// Photons detected per evaluation; 0 means exact probabilities.
    pub shot_budget: u64,
}

impl GeneratorAnsatz {
    pub fn new(n: usize, params: Vec<f64>, shot_budget: u64) -> Result<Self> {
        let a = Self { n, params, shot_budget };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidBinCount(self.n));
        }
        if self.params.len() != self.n - 1 {
            return Err(Error::InvalidLength { expected: self.n - 1, got: self.params.len() });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("generator angles must be finite"));
        }
        Ok(())
    }
}

/// Photon distribution over the bins (ancilla-0 modes) after the loader.
pub fn generate_distribution(ansatz: &GeneratorAnsatz, seed: u64) -> Result<Vec<f64>> {
    ansatz.validate()?;
    let loader = build_loader(&LoaderParams::from_angles(&ansatz.params)?, ansatz.n)?;
    let state = initial_state(ansatz.n)?.apply(&loader)?;
    if ansatz.shot_budget == 0 {
        return Ok(state.ancilla_zero_probs());
    }
    let counts = sample_shots(&state, ansatz.shot_budget, seed)?;
    let total = ansatz.shot_budget as f64;
    Ok((0..ansatz.n).map(|i| counts[2 * i] as f64 / total).collect())
}

/// Euclidean distance between two probability vectors.
pub fn l2_norm(fake: &[f64], real: &[f64]) -> Result<f64> {
    if fake.len() != real.len() {
        return Err(Error::DimensionMismatch { expected: real.len(), got: fake.len() });
    }
    Ok(fake.iter().zip(real).map(|(g, x)| (x - g).powi(2)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Hidden-layer nonlinearity of the critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    /// `ln(1 + eᶻ)`.
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative at the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Softplus => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// Dense critic: smooth activation on hidden layers, linear scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
    clip_bound: f64,
    activation: Activation,
}

impl CriticNet {
    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize], clip_bound: f64, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(invalid(format!("bad critic layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(invalid("critic output layer must have size 1"));
        }
        if !(clip_bound.is_finite() && clip_bound > 0.0) {
            return Err(invalid(format!("clip bound must be > 0, got {clip_bound}")));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self { layer_sizes: layer_sizes.to_vec(), layers, clip_bound, activation })
    }

    /// Weights drawn uniformly from `[−clip_bound, clip_bound]`.
    pub fn random(layer_sizes: &[usize], clip_bound: f64, activation: Activation, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, clip_bound, activation)?;
        let mut rng = rng::from_seed(seed);
        let params: Vec<f64> = (0..net.num_parameters())
            .map(|_| rng.random_range(-clip_bound..=clip_bound))
            .collect();
        net.set_parameters(&params)?;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flattened parameters: per layer, weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch { expected: self.num_parameters(), got: params.len() });
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().chain(layer.biases.iter_mut()).for_each(|w| *w = it.next().unwrap());
        }
        Ok(())
    }

    pub fn max_abs_parameter(&self) -> f64 {
        self.parameters().iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer; `acts[0]` is the input.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&acts[l], &mut z);
            let a = if l < last { z.iter().map(|&v| self.activation.apply(v)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.trace(x).1.last().unwrap()[0]
    }

    /// Adds `weight · ∂score(x)/∂params` into `grad`.
    fn accumulate_gradient(&self, x: &[f64], weight: f64, grad: &mut [f64]) {
        let (pre, acts) = self.trace(x);
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.weights.len() + l.biases.len();
                Some(start)
            })
            .collect();
        let mut delta = vec![weight];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let base = offsets[l];
            for (o, d) in delta.iter().enumerate() {
                for (i, v) in input.iter().enumerate() {
                    grad[base + o * layer.inputs + i] += d * v;
                }
                grad[base + layer.weights.len() + o] += d;
            }
            if l == 0 {
                break;
            }
            // back through the activation of the previous layer
            let mut prev = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, z) in prev.iter_mut().zip(&pre[l - 1]) {
                *p *= self.activation.derivative(*z);
            }
            delta = prev;
        }
    }

    /// `mean score(real) − mean score(fake)`.
    pub fn objective(&self, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
        check_batches(self, real, fake)?;
        let mean = |b: &[Vec<f64>]| b.iter().map(|x| self.score(x)).sum::<f64>() / b.len() as f64;
        Ok(mean(real) - mean(fake))
    }

    /// Gradient of [`CriticNet::objective`] by backpropagation, flattened like
    /// [`CriticNet::parameters`].
    pub fn objective_gradient(&self, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_batches(self, real, fake)?;
        let mut grad = vec![0.0; self.num_parameters()];
        let wr = 1.0 / real.len() as f64;
        let wf = -1.0 / fake.len() as f64;
        real.iter().for_each(|x| self.accumulate_gradient(x, wr, &mut grad));
        fake.iter().for_each(|x| self.accumulate_gradient(x, wf, &mut grad));
        Ok(grad)
    }
}

fn check_batches(net: &CriticNet, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<()> {
    if real.is_empty() || fake.is_empty() {
        return Err(invalid("critic batches must be non-empty"));
    }
    real.iter().chain(fake).try_for_each(|x| net.check_input(x))
}

pub fn critic_score(net: &CriticNet, dist: &[f64]) -> Result<f64> {
    net.check_input(dist)?;
    Ok(net.score(dist))
}

/// One ascent step on the Wasserstein objective, then clipping of every
/// parameter to `±clip_bound`.
pub fn critic_update(net: &CriticNet, real: &[Vec<f64>], fake: &[Vec<f64>], lr: f64) -> Result<CriticNet> {
    let grad = net.objective_gradient(real, fake)?;
    let clip = net.clip_bound;
    let params: Vec<f64> = net
        .parameters()
        .iter()
        .zip(&grad)
        .map(|(w, g)| (w + lr * g).clamp(-clip, clip))
        .collect();
    let mut next = net.clone();
    next.set_parameters(&params)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub population_size: usize,
    pub elite_fraction: f64,
    pub tournament_size: usize,
    /// Standard deviation of the Gaussian mutation, radians.
    pub mutation_std: f64,
    /// Probability that a child is a uniform crossover rather than a copy.
    pub crossover_rate: f64,
    pub critic_steps_per_generation: usize,
    pub critic_learning_rate: f64,
    /// Hidden layer widths; input is the bin count, output a scalar.
    pub critic_hidden: Vec<usize>,
    pub critic_activation: Activation,
    pub clip_bound: f64,
    /// Noise added to each real sample before renormalizing.
    pub real_jitter: f64,
    pub real_batch: usize,
    pub shot_budget: u64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            population_size: 30,
            elite_fraction: 0.2,
            tournament_size: 3,
            mutation_std: 0.05,
            crossover_rate: 0.5,
            critic_steps_per_generation: 5,
            critic_learning_rate: 5.0,
            critic_hidden: vec![32, 16],
            critic_activation: Activation::Tanh,
            clip_bound: 0.1,
            real_jitter: 0.01,
            real_batch: 30,
            shot_budget: 0,
            generations: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(invalid("population_size must be >= 2"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(invalid("elite_fraction must lie in (0, 1)"));
        }
        if self.generations == 0 {
            return Err(invalid("generations must be >= 1"));
        }
        if self.tournament_size == 0 || self.real_batch == 0 {
            return Err(invalid("tournament_size and real_batch must be >= 1"));
        }
        if !(self.mutation_std >= 0.0 && self.mutation_std.is_finite()) {
            return Err(invalid("mutation_std must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(invalid("crossover_rate must lie in [0, 1]"));
        }
        if !(self.real_jitter >= 0.0 && self.real_jitter.is_finite()) {
            return Err(invalid("real_jitter must be >= 0"));
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).round() as usize).clamp(1, self.population_size)
    }
}

/// Next generation: the top `elite_fraction` by fitness carried over
/// unchanged, the rest bred from tournament-selected parents by uniform
/// crossover and Gaussian mutation. Higher fitness is better.
pub fn evolve_generation(
    population: &[Vec<f64>],
    fitness: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if population.len() != config.population_size {
        return Err(Error::DimensionMismatch { expected: config.population_size, got: population.len() });
    }
    if fitness.len() != population.len() {
        return Err(Error::DimensionMismatch { expected: population.len(), got: fitness.len() });
    }
    let key = |i: usize| if fitness[i].is_nan() { f64::NEG_INFINITY } else { fitness[i] };
    let mut ranked: Vec<usize> = (0..population.len()).collect();
    ranked.sort_by(|&a, &b| key(b).total_cmp(&key(a)));

    let mut rng = rng::from_seed(seed);
    let mutation = Normal::new(0.0, config.mutation_std).map_err(|e| invalid(e.to_string()))?;
    let mut next: Vec<Vec<f64>> = ranked[..config.elite_count()].iter().map(|&i| population[i].clone()).collect();

    let pick = |rng: &mut rng::Rng| -> usize {
        (0..config.tournament_size)
            .map(|_| rng.random_range(0..population.len()))
            .max_by(|&a, &b| key(a).total_cmp(&key(b)).then(b.cmp(&a)))
            .unwrap()
    };
    while next.len() < population.len() {
        let a = pick(&mut rng);
        let b = pick(&mut rng);
        let mut child = if rng.random::<f64>() < config.crossover_rate {
            population[a]
                .iter()
                .zip(&population[b])
                .map(|(x, y)| if rng.random::<bool>() { *x } else { *y })
                .collect()
        } else {
            population[a].clone()
        };
        if config.mutation_std > 0.0 {
            child.iter_mut().for_each(|g| *g += mutation.sample(&mut rng));
        }
        next.push(child);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Lowest ℓ₂ to the target seen so far (the stored best snapshot).
    pub l2: f64,
    /// ℓ₂ of this generation's individual with the highest critic score.
    pub fittest_l2: f64,
    pub e_real: f64,
    pub e_fake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHistory {
    pub target: Vec<f64>,
    pub records: Vec<GenerationRecord>,
    /// Angles of the best snapshot.
    pub best_params: Vec<f64>,
    pub best_l2: f64,
}

impl GanHistory {
    pub fn final_l2(&self) -> f64 {
        self.best_l2
    }

    /// `generation,l2,e_real,e_fake` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "generation,l2,e_real,e_fake")?;
        for r in &self.records {
            writeln!(out, "{},{:.12e},{:.12e},{:.12e}", r.generation, r.l2, r.e_real, r.e_fake)?;
        }
        Ok(())
    }

    /// Best generator as an ansatz evaluated exactly.
    pub fn best_ansatz(&self) -> GeneratorAnsatz {
        GeneratorAnsatz { n: self.target.len(), params: self.best_params.clone(), shot_budget: 0 }
    }
}

fn jittered(target: &[f64], sigma: f64, rng: &mut rng::Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return target.to_vec();
    }
    let noise = Normal::new(0.0, sigma).expect("finite jitter");
    let mut x: Vec<f64> = target.iter().map(|p| (p + noise.sample(rng)).max(0.0)).collect();
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        x.iter_mut().for_each(|v| *v /= total);
        x
    } else {
        target.to_vec()
    }
}

const STREAM_INIT: u64 = 1;
const STREAM_FAKE: u64 = 2;
const STREAM_REAL: u64 = 3;
const STREAM_EVOLVE: u64 = 4;

/// Adversarial training of the loader towards `target`.
///
/// Each generation: evaluate all individuals, run
/// `critic_steps_per_generation` critic updates against jittered copies of the
/// target, score the fakes, breed the next population. ℓ₂ is always measured
/// on the exact circuit output.
pub fn train_gan(target: &[f64], config: &TrainConfig) -> Result<GanHistory> {
    config.validate()?;
    let n = target.len();
    if n < 2 {
        return Err(Error::InvalidBinCount(n));
    }
    let total: f64 = target.iter().sum();
    if target.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("target must be a probability vector (sum {total})")));
    }
    let seed = config.seed;
    let mut sizes = vec![n];
    sizes.extend(&config.critic_hidden);
    sizes.push(1);
    let mut critic = CriticNet::random(&sizes, config.clip_bound, config.critic_activation, rng::child_seed(seed, &[STREAM_INIT, 0]))?;

    let mut init_rng = rng::substream(seed, &[STREAM_INIT, 1]);
    let mut population: Vec<Vec<f64>> = (0..config.population_size)
        .map(|_| (0..n - 1).map(|_| init_rng.random_range(0.0..FRAC_PI_2)).collect())
        .collect();

    let mut records = Vec::with_capacity(config.generations);
    let mut best_l2 = f64::INFINITY;
    let mut best_params = population[0].clone();

    for g in 0..config.generations {
        let gen = g as u64;
        let evaluated: Vec<(Vec<f64>, f64)> = population
            .par_iter()
            .enumerate()
            .map(|(i, params)| -> Result<(Vec<f64>, f64)> {
                let exact = generate_distribution(&GeneratorAnsatz { n, params: params.clone(), shot_budget: 0 }, 0)?;
                let l2 = l2_norm(&exact, target)?;
                let fake = if config.shot_budget == 0 {
                    exact
                } else {
                    let ansatz = GeneratorAnsatz { n, params: params.clone(), shot_budget: config.shot_budget };
                    generate_distribution(&ansatz, rng::child_seed(seed, &[STREAM_FAKE, gen, i as u64]))?
                };
                Ok((fake, l2))
            })
            .collect::<Result<_>>()?;
        let (fakes, l2s): (Vec<Vec<f64>>, Vec<f64>) = evaluated.into_iter().unzip();

        for (i, &l2) in l2s.iter().enumerate() {
            if l2 < best_l2 {
                best_l2 = l2;
                best_params = population[i].clone();
            }
        }

        let mut real_rng = rng::substream(seed, &[STREAM_REAL, gen]);
        let mut reals = Vec::new();
        for _ in 0..config.critic_steps_per_generation {
            reals = (0..config.real_batch).map(|_| jittered(target, config.real_jitter, &mut real_rng)).collect();
            critic = critic_update(&critic, &reals, &fakes, config.critic_learning_rate)?;
        }
        if reals.is_empty() {
            reals = vec![target.to_vec()];
        }
        let fitness: Vec<f64> = fakes.iter().map(|f| critic.score(f)).collect();
        let e_real = reals.iter().map(|r| critic.score(r)).sum::<f64>() / reals.len() as f64;
        let e_fake = fitness.iter().sum::<f64>() / fitness.len() as f64;
        let fittest = (0..fitness.len()).max_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(b.cmp(&a))).unwrap();
        records.push(GenerationRecord { generation: g, l2: best_l2, fittest_l2: l2s[fittest], e_real, e_fake });

        population = evolve_generation(&population, &fitness, config, rng::child_seed(seed, &[STREAM_EVOLVE, gen]))?;
    }

    Ok(GanHistory { target: target.to_vec(), records, best_params, best_l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{fit_loader, initial_bin};
    use crate::market::DiscreteDistribution;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn exact(n: usize, params: Vec<f64>) -> Vec<f64> {
        generate_distribution(&GeneratorAnsatz::new(n, params, 0).unwrap(), 0).unwrap()
    }

    #[test]
    fn ansatz_validation() {
        assert!(GeneratorAnsatz::new(1, vec![], 0).is_err());
        assert!(GeneratorAnsatz::new(3, vec![0.1], 0).is_err());
        assert!(GeneratorAnsatz::new(3, vec![0.1, f64::NAN], 0).is_err());
    }

    #[test]
    fn zero_angles_give_delta_on_start_bin() {
        for n in [2, 5, 8] {
            let p = exact(n, vec![0.0; n - 1]);
            for (i, v) in p.iter().enumerate() {
                let want = if i == initial_bin(n) { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quarter_turn_on_two_bins() {
        let p = exact(2, vec![PI / 4.0]);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn shot_frequencies_track_exact_output() {
        let params = vec![0.3, 0.9, 1.2, 0.5, 0.7];
        let ex = exact(6, params.clone());
        let sampled = generate_distribution(&GeneratorAnsatz::new(6, params.clone(), 100_000).unwrap(), 5).unwrap();
        assert!(l2_norm(&sampled, &ex).unwrap() < 0.01);
        assert_abs_diff_eq!(sampled.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let again = generate_distribution(&GeneratorAnsatz::new(6, params, 100_000).unwrap(), 5).unwrap();
        assert_eq!(sampled, again);
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_norm(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_abs_diff_eq!(l2_norm(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(l2_norm(&[1.0], &[0.5, 0.5]).is_err());
    }

    /// Forward pass rebuilt from the flat parameter vector with nalgebra.
    fn forward_oracle(net: &CriticNet, x: &[f64]) -> f64 {
        let params = net.parameters();
        let sizes = net.layer_sizes();
        let mut a = DVector::from_column_slice(x);
        let mut at = 0;
        for l in 0..sizes.len() - 1 {
            let (i, o) = (sizes[l], sizes[l + 1]);
            let w = DMatrix::from_row_slice(o, i, &params[at..at + o * i]);
            at += o * i;
            let b = DVector::from_column_slice(&params[at..at + o]);
            at += o;
            let z = w * a + b;
            a = if l + 2 < sizes.len() { z.map(|v| v.tanh()) } else { z };
        }
        a[0]
    }

    #[test]
    fn critic_score_examples() {
        let zero = CriticNet::zeros(&[4, 8, 1], 0.1, Activation::Tanh).unwrap();
        assert_eq!(critic_score(&zero, &[0.25; 4]).unwrap(), 0.0);
        assert!(critic_score(&zero, &[0.5; 2]).is_err());
        let net = CriticNet::random(&[5, 32, 16, 1], 0.1, Activation::Tanh, 11).unwrap();
        assert!(net.max_abs_parameter() <= 0.1);
        let mut r = rng::from_seed(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
            let s = critic_score(&net, &x).unwrap();
            assert_eq!(s, critic_score(&net, &x).unwrap());
            assert_abs_diff_eq!(s, forward_oracle(&net, &x), epsilon = 1e-10);
        }
    }

    #[test]
    fn parameters_round_trip() {
        let mut net = CriticNet::zeros(&[3, 4, 1], 0.1, Activation::Softplus).unwrap();
        assert_eq!(net.num_parameters(), 3 * 4 + 4 + 4 + 1);
        let p: Vec<f64> = (0..net.num_parameters()).map(|k| k as f64 * 1e-3).collect();
        net.set_parameters(&p).unwrap();
        assert_eq!(net.parameters(), p);
        assert!(net.set_parameters(&p[1..]).is_err());
    }

    #[test]
    fn identical_batches_leave_critic_unchanged() {
        let net = CriticNet::random(&[4, 6, 1], 0.1, Activation::Tanh, 2).unwrap();
        let batch = vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1]];
        let grad = net.objective_gradient(&batch, &batch).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-15));
        let next = critic_update(&net, &batch, &batch, 1.0).unwrap();
        for (a, b) in next.parameters().iter().zip(net.parameters()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::from_seed(99);
        for case in 0..50u64 {
            let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Softplus };
            let n = 2 + (case % 5) as usize;
            let net = CriticNet::random(&[n, 5, 3, 1], 1.0, act, case).unwrap();
            let batch = |r: &mut rng::Rng| -> Vec<Vec<f64>> {
                (0..3).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect()
            };
            let (real, fake) = (batch(&mut r), batch(&mut r));
            let grad = net.objective_gradient(&real, &fake).unwrap();
            let base = net.parameters();
            let h = 1e-6;
            for k in 0..base.len() {
                let eval = |d: f64| {
                    let mut p = base.clone();
                    p[k] += d;
                    let mut m = net.clone();
                    m.set_parameters(&p).unwrap();
                    m.objective(&real, &fake).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let scale = fd.abs().max(grad[k].abs()).max(1e-3);
                assert!((fd - grad[k]).abs() / scale < 1e-5, "case {case} param {k}: {fd} vs {}", grad[k]);
            }
        }
    }

    #[test]
    fn update_clips_and_ascends() {
        let net = CriticNet::random(&[3, 4, 1], 0.1, Activation::Tanh, 8).unwrap();
        let real = vec![vec![1.0, 0.0, 0.0]];
        let fake = vec![vec![0.0, 0.0, 1.0]];
        let big = critic_update(&net, &real, &fake, 1e3).unwrap();
        assert!(big.max_abs_parameter() <= 0.1 + 1e-15);
        let small = critic_update(&net, &real, &fake, 1e-3).unwrap();
        assert!(small.objective(&real, &fake).unwrap() > net.objective(&real, &fake).unwrap());
    }

    fn cfg(pop: usize) -> TrainConfig {
        TrainConfig { population_size: pop, ..TrainConfig::default() }
    }

    #[test]
    fn uniform_population_without_mutation_is_fixed() {
        let config = TrainConfig { mutation_std: 0.0, ..cfg(10) };
        let pop = vec![vec![0.1, 0.2, 0.3]; 10];
        let next = evolve_generation(&pop, &[0.0; 10], &config, 4).unwrap();
        assert_eq!(next, pop);
    }

    #[test]
    fn elites_survive() {
        let config = cfg(10);
        let pop: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let fitness: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let next = evolve_generation(&pop, &fitness, &config, 1).unwrap();
        assert_eq!(next[0], vec![9.0]);
        assert_eq!(next[1], vec![8.0]);
        assert_eq!(next.len(), 10);
        assert!(evolve_generation(&pop[..9], &fitness[..9], &config, 1).is_err());
    }

    #[test]
    fn selection_favours_fitter_individuals() {
        let config = TrainConfig { mutation_std: 0.0, crossover_rate: 0.0, ..cfg(10) };
        let pop: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let fitness: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut mean = 0.0;
        for s in 0..100 {
            let next = evolve_generation(&pop, &fitness, &config, s).unwrap();
            mean += next[2..].iter().map(|c| c[0]).sum::<f64>() / 8.0;
        }
        mean /= 100.0;
        // tournament of three over 0..9 has expectation about 6.6
        assert!(mean > 5.5, "{mean}");
    }

    #[test]
    fn delta_target_is_learned_quickly() {
        let n = 4;
        let mut target = vec![0.0; n];
        target[initial_bin(n)] = 1.0;
        let config = TrainConfig { generations: 20, ..TrainConfig::default() };
        let h = train_gan(&target, &config).unwrap();
        assert!(h.final_l2() < 1e-3, "{}", h.final_l2());
    }

    #[test]
    fn training_is_reproducible_and_monotone() {
        let target = [0.1, 0.2, 0.4, 0.2, 0.1];
        let config = TrainConfig { generations: 15, seed: 12, ..TrainConfig::default() };
        let a = train_gan(&target, &config).unwrap();
        assert_eq!(a, train_gan(&target, &config).unwrap());
        assert_eq!(a.records.len(), 15);
        assert!(a.records.windows(2).all(|w| w[1].l2 <= w[0].l2));
        let best = exact(5, a.best_params.clone());
        assert_abs_diff_eq!(l2_norm(&best, &target).unwrap(), a.best_l2, epsilon = 1e-12);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("generation,l2,e_real,e_fake\n"));
        assert_eq!(text.lines().count(), 16);
    }

    #[test]
    fn shot_noise_training_runs() {
        let target = [0.25, 0.5, 0.25];
        let config = TrainConfig { generations: 5, shot_budget: 1000, ..TrainConfig::default() };
        let h = train_gan(&target, &config).unwrap();
        assert!(h.best_l2.is_finite());
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(train_gan(&[1.0], &TrainConfig::default()).is_err());
        assert!(train_gan(&[0.5, 0.6], &TrainConfig::default()).is_err());
        let bad = TrainConfig { population_size: 0, ..TrainConfig::default() };
        assert!(train_gan(&[0.5, 0.5], &bad).is_err());
    }

    #[test]
    fn any_target_is_representable() {
        let mut r = rng::from_seed(0);
        for n in 2..12 {
            let w: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let dist = DiscreteDistribution::from_weights((0..n).map(|i| i as f64).collect(), w).unwrap();
            let angles = fit_loader(&dist).unwrap().to_angles();
            let p = exact(n, angles);
            assert!(l2_norm(&p, dist.probs()).unwrap() < 1e-12);
        }
    }
}
