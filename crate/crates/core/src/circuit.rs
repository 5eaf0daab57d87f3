//! Exact unitaries of the unary pricing circuit.
//!
//! A single photon lives in `2n` waveguides: bin `i` with the ancilla in `|0⟩`
//! is mode `2i`, with the ancilla in `|1⟩` mode `2i + 1`. The photon enters
//! the middle bin on its ancilla-0 mode. Every operator here is a `2n × 2n`
//! matrix acting on that single-photon amplitude vector.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::market::DiscreteDistribution;
use crate::rng;

const NORM_TOLERANCE: f64 = 1e-12;

/// Mode index of bin `bin` with the ancilla in level `anc` (0 or 1).
#[inline]
pub fn mode(bin: usize, anc: usize) -> usize {
    2 * bin + anc
}

/// Bin the photon is injected into.
#[inline]
pub fn initial_bin(n: usize) -> usize {
    (n - 1) / 2
}

fn check_bins(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidBinCount(n))
    } else {
        Ok(())
    }
}

/// Normalized single-photon amplitudes over `2n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryState {
    amps: DVector<Complex64>,
}

impl UnaryState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() < 4 || !amps.len().is_multiple_of(2) {
            return Err(invalid(format!("state needs 2n >= 4 amplitudes, got {}", amps.len())));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amps: DVector::from_vec(amps) })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn n_bins(&self) -> usize {
        self.amps.len() / 2
    }

    pub fn amps(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    pub fn amp(&self, bin: usize, anc: usize) -> Complex64 {
        self.amps[mode(bin, anc)]
    }

    /// `|amp|²` for every mode.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Per-bin probability of finding the photon on the ancilla-0 mode.
    pub fn ancilla_zero_probs(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.amp(i, 0).norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&self, op: &CircuitUnitary) -> Result<Self> {
        if op.dim() != self.amps.len() {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), got: op.dim() });
        }
        Ok(Self { amps: &op.matrix * &self.amps })
    }
}

/// Photon in the middle bin, ancilla in `|0⟩`.
pub fn initial_state(n: usize) -> Result<UnaryState> {
    check_bins(n)?;
    let mut amps = DVector::from_element(2 * n, Complex64::new(0.0, 0.0));
    amps[mode(initial_bin(n), 0)] = Complex64::new(1.0, 0.0);
    Ok(UnaryState { amps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Loader,
    Payoff,
    SPsi,
    S0,
    Amplifier,
    Other,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Operator::Loader => "D",
            Operator::Payoff => "P",
            Operator::SPsi => "S_psi",
            Operator::S0 => "S_0",
            Operator::Amplifier => "Q",
            Operator::Other => "U",
        };
        f.write_str(s)
    }
}

/// A `2n × 2n` circuit matrix with the role it plays.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitUnitary {
    matrix: DMatrix<Complex64>,
    label: Operator,
}

impl CircuitUnitary {
    /// Wraps a matrix, checking it is square, even-sized and unitary to `1e-12`.
    pub fn new(matrix: DMatrix<Complex64>, label: Operator) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_multiple_of(2) || matrix.nrows() < 4 {
            return Err(invalid(format!(
                "circuit matrix must be 2n x 2n, got {} x {}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let op = Self { matrix, label };
        let err = op.unitarity_error();
        if err >= NORM_TOLERANCE {
            return Err(invalid(format!("matrix is not unitary (max deviation {err:e})")));
        }
        Ok(op)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn label(&self) -> Operator {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.dim() / 2
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), label: self.label }
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0f64;
        for ((i, j), g) in gram.iter().enumerate().map(|(k, g)| ((k % gram.nrows(), k / gram.nrows()), g)) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - Complex64::new(target, 0.0)).norm());
        }
        worst
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &Self, label: Operator) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self { matrix: &self.matrix * &rhs.matrix, label })
    }

    fn diagonal(entries: impl Iterator<Item = f64>, label: Operator) -> Self {
        let diag: Vec<Complex64> = entries.map(|d| Complex64::new(d, 0.0)).collect();
        Self { matrix: DMatrix::from_diagonal(&DVector::from_vec(diag)), label }
    }
}

/// Splitting probabilities of the `n − 1` swp blocks, in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoaderParams {
    splits: Vec<f64>,
}

impl LoaderParams {
    pub fn new(splits: Vec<f64>) -> Result<Self> {
        if let Some(bad) = splits.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("split probability {bad} outside [0, 1]")));
        }
        Ok(Self { splits })
    }

    /// Splits from beam-splitter angles, `p = cos²φ`.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(invalid("loader angles must be finite"));
        }
        Self::new(angles.iter().map(|a| a.cos().powi(2)).collect())
    }

    /// Angles `φ ∈ [0, π/2]` with `cos²φ = p`.
    pub fn to_angles(&self) -> Vec<f64> {
        self.splits.iter().map(|p| p.sqrt().acos()).collect()
    }

    pub fn splits(&self) -> &[f64] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    /// Gaussian jitter of `sigma_noise` radians on every splitter angle.
    pub fn perturbed(&self, sigma_noise: f64, seed: u64) -> Result<Self> {
        if sigma_noise == 0.0 {
            return Ok(self.clone());
        }
        let noise = Normal::new(0.0, sigma_noise).map_err(|e| invalid(e.to_string()))?;
        let mut rng = rng::from_seed(seed);
        let angles: Vec<f64> = self.to_angles().into_iter().map(|a| a + noise.sample(&mut rng)).collect();
        Self::from_angles(&angles)
    }
}

/// One swp block: couples bins `lower` and `lower + 1` in the given layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwpGate {
    pub lower: usize,
    pub layer: usize,
}

/// Gate schedule of the loader for `n` bins, in application order.
///
/// The first layer splits the injection bin `c` towards `c + 1`. Every later
/// layer `k` pushes amplitude one bin further out on both sides, the right
/// block `(c + k − 1, c + k)` first and then the left block `(c − k + 1, c − k + 2)`.
/// For even `n` the right side has one more block, which is what keeps the
/// depth at `⌊(n + 1)/2⌋`.
pub fn loader_schedule(n: usize) -> Vec<SwpGate> {
    if n < 2 {
        return Vec::new();
    }
    let c = initial_bin(n);
    let right = n - 1 - c;
    let left = c;
    let depth = right.max(left + 1);
    let mut gates = Vec::with_capacity(n - 1);
    for layer in 1..=depth {
        if layer <= right {
            gates.push(SwpGate { lower: c + layer - 1, layer });
        }
        if layer >= 2 && layer - 1 <= left {
            gates.push(SwpGate { lower: c - (layer - 1), layer });
        }
    }
    gates
}

/// Loader matrix `D`: the product of the scheduled swp blocks, each acting as
/// `[[√p, √(1−p)], [√(1−p), −√p]]` on a pair of bins (identity on the ancilla).
pub fn build_loader(params: &LoaderParams, n: usize) -> Result<CircuitUnitary> {
    check_bins(n)?;
    if params.len() != n - 1 {
        return Err(Error::InvalidLength { expected: n - 1, got: params.len() });
    }
    let mut m = DMatrix::<Complex64>::identity(2 * n, 2 * n);
    for (gate, &p) in loader_schedule(n).iter().zip(params.splits()) {
        let (a, b) = (p.sqrt(), (1.0 - p).sqrt());
        for anc in 0..2 {
            let (r0, r1) = (mode(gate.lower, anc), mode(gate.lower + 1, anc));
            for col in 0..2 * n {
                let (x, y) = (m[(r0, col)], m[(r1, col)]);
                m[(r0, col)] = x * a + y * b;
                m[(r1, col)] = x * b - y * a;
            }
        }
    }
    Ok(CircuitUnitary { matrix: m, label: Operator::Loader })
}

/// Splits that make `D · init` carry `√pᵢ` (up to a per-bin sign) on the
/// ancilla-0 mode of every bin.
///
/// Each block keeps the share of the mass arriving at its inner bin that
/// belongs to that bin and passes the rest outwards.
pub fn fit_loader(dist: &DiscreteDistribution) -> Result<LoaderParams> {
    let probs = dist.probs();
    let n = probs.len();
    check_bins(n)?;
    let c = initial_bin(n);
    let head = |i: usize| -> f64 { probs[..=i].iter().sum() };
    let tail = |i: usize| -> f64 { probs[i..].iter().sum() };
    let ratio = |keep: f64, total: f64| if total > 0.0 { (keep / total).clamp(0.0, 1.0) } else { 1.0 };

    let splits = loader_schedule(n)
        .into_iter()
        .map(|g| {
            if g.lower >= c {
                // right chain, amplitude arrives on the lower bin
                let k = g.lower;
                if k == c {
                    let keep = head(c);
                    ratio(keep, keep + tail(c + 1))
                } else {
                    ratio(probs[k], tail(k))
                }
            } else {
                // left chain, amplitude arrives on the upper bin
                let k = g.lower + 1;
                ratio(probs[k], head(k))
            }
        })
        .collect();
    LoaderParams::new(splits)
}

/// Payoff rotation angles with the strike mask and the normalization `s_max − K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffAngles {
    thetas: Vec<f64>,
    strike_mask: Vec<bool>,
    scale: f64,
}

impl PayoffAngles {
    /// Bare angles in `[0, π/2]`; every bin is measured and the payoff scale is 1.
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() < 2 {
            return Err(Error::InvalidBinCount(thetas.len()));
        }
        if let Some(bad) = thetas.iter().find(|t| !(0.0..=FRAC_PI_2).contains(*t)) {
            return Err(invalid(format!("rotation angle {bad} outside [0, pi/2]")));
        }
        let strike_mask = vec![true; thetas.len()];
        Ok(Self { thetas, strike_mask, scale: 1.0 })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Bins priced strictly above the strike.
    pub fn strike_mask(&self) -> &[bool] {
        &self.strike_mask
    }

    /// `s_max − K`; zero when the strike is at or above every price.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_degenerate(&self) -> bool {
        self.scale <= 0.0
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Gaussian jitter of `sigma_noise` radians on every angle, clamped to `[0, π/2]`.
    pub fn perturbed(&self, sigma_noise: f64, seed: u64) -> Result<Self> {
        if sigma_noise == 0.0 {
            return Ok(self.clone());
        }
        let noise = Normal::new(0.0, sigma_noise).map_err(|e| invalid(e.to_string()))?;
        let mut rng = rng::from_seed(seed);
        let thetas = self
            .thetas
            .iter()
            .map(|t| (t + noise.sample(&mut rng)).clamp(0.0, FRAC_PI_2))
            .collect();
        Ok(Self { thetas, ..self.clone() })
    }
}

/// `θᵢ = arcsin √((sᵢ − K)/(s_max − K))` for `sᵢ > K`, else 0.
///
/// A strike at or above `s_max` yields all-zero angles and a zero scale: the
/// payoff is identically zero.
pub fn payoff_angles(dist: &DiscreteDistribution, strike: f64) -> PayoffAngles {
    let s_max = dist.s_max();
    let n = dist.len();
    if s_max <= strike {
        log::warn!("strike {strike} >= s_max {s_max}: payoff is identically zero");
        return PayoffAngles { thetas: vec![0.0; n], strike_mask: vec![false; n], scale: 0.0 };
    }
    let scale = s_max - strike;
    let strike_mask: Vec<bool> = dist.prices().iter().map(|&s| s > strike).collect();
    let thetas = dist
        .prices()
        .iter()
        .map(|&s| if s > strike { ((s - strike) / scale).clamp(0.0, 1.0).sqrt().asin() } else { 0.0 })
        .collect();
    PayoffAngles { thetas, strike_mask, scale }
}

/// Block-diagonal `P` with `Mᵢ = [[cos θᵢ, −sin θᵢ], [sin θᵢ, cos θᵢ]]` on bin `i`.
pub fn build_payoff(angles: &PayoffAngles) -> CircuitUnitary {
    let n = angles.len();
    let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for (i, &t) in angles.thetas().iter().enumerate() {
        let (s, c) = t.sin_cos();
        let (a0, a1) = (mode(i, 0), mode(i, 1));
        m[(a0, a0)] = Complex64::new(c, 0.0);
        m[(a0, a1)] = Complex64::new(-s, 0.0);
        m[(a1, a0)] = Complex64::new(s, 0.0);
        m[(a1, a1)] = Complex64::new(c, 0.0);
    }
    CircuitUnitary { matrix: m, label: Operator::Payoff }
}

/// `S_ψ = diag(1, −1, 1, −1, …)`: π phase on every ancilla-1 mode.
pub fn build_s_psi(n: usize) -> Result<CircuitUnitary> {
    check_bins(n)?;
    Ok(CircuitUnitary::diagonal(
        (0..2 * n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }),
        Operator::SPsi,
    ))
}

/// `S₀`: π phase on the injection mode only.
pub fn build_s_0(n: usize) -> Result<CircuitUnitary> {
    check_bins(n)?;
    let start = mode(initial_bin(n), 0);
    Ok(CircuitUnitary::diagonal(
        (0..2 * n).map(|k| if k == start { -1.0 } else { 1.0 }),
        Operator::S0,
    ))
}

/// `Q = P · D · S₀ · D† · P† · S_ψ`.
pub fn build_q(loader: &CircuitUnitary, payoff: &CircuitUnitary, n: usize) -> Result<CircuitUnitary> {
    check_bins(n)?;
    for op in [loader, payoff] {
        if op.dim() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: op.dim() });
        }
    }
    let s_psi = build_s_psi(n)?;
    let s_0 = build_s_0(n)?;
    let pd = payoff.matrix() * loader.matrix();
    let matrix = &pd * s_0.matrix() * pd.adjoint() * s_psi.matrix();
    Ok(CircuitUnitary { matrix, label: Operator::Amplifier })
}

/// Probability of the ancilla-1 modes of the bins selected by `strike_mask`.
pub fn ancilla_one_prob(state: &UnaryState, strike_mask: &[bool]) -> Result<f64> {
    if strike_mask.len() != state.n_bins() {
        return Err(Error::DimensionMismatch { expected: state.n_bins(), got: strike_mask.len() });
    }
    Ok(strike_mask
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| state.amp(i, 1).norm_sqr())
        .sum())
}

/// Detector counts per mode for `shots` single photons.
pub fn sample_shots(state: &UnaryState, shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(invalid("shots must be >= 1"));
    }
    let mut rng = rng::from_seed(seed);
    Ok(rng::multinomial(&state.probabilities(), shots, &mut rng))
}
