//! Unary single-photon option pricing.
//!
//! The asset price distribution is path-encoded over `n` bins of a single
//! photon, each bin carrying a second waveguide that plays the role of the
//! payoff ancilla. This crate simulates the resulting `2n`-mode linear optical
//! circuit exactly, samples detector counts from it, recovers the payoff with
//! amplitude estimation, and trains the loading circuit adversarially.
//!
//! * [`market`]: Black–Scholes–Merton terminal law, binning and the Monte Carlo baseline.
//! * [`circuit`]: loader, payoff, reflection and amplification unitaries.
//! * [`estimation`]: amplitude estimation without phase estimation.
//! * [`gan`]: Wasserstein critic and evolutionary training of the loader.

pub mod circuit;
pub mod error;
pub mod estimation;
pub mod gan;
pub mod market;
pub mod rng;

pub use circuit::{
    ancilla_one_prob, build_loader, build_payoff, build_q, build_s_0, build_s_psi, fit_loader,
    initial_state, payoff_angles, sample_shots, CircuitUnitary, LoaderParams, PayoffAngles,
    UnaryState,
};
pub use error::{Error, Result};
pub use estimation::{
    binomial_ci, convergence_study, estimate_payoff, recover_angle, run_depth, AEResult,
    AESchedule, AngleEstimate, ConvergenceRow, DepthRecord, EstimatorConfig, Observation,
    PricingCircuit,
};
pub use gan::{
    critic_score, critic_update, Activation, evolve_generation, generate_distribution, l2_norm, train_gan,
    CriticNet, GanHistory, GenerationRecord, GeneratorAnsatz, TrainConfig,
};
pub use market::{
    discretize, expected_payoff_discrete, lognormal_terminal_params, mc_price, mc_price_with, BsmParams,
    DiscreteDistribution, McResult, PathScheme,
};
