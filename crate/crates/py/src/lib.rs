//! Python bindings: `import pyunary`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use unary_pricing as up;

fn to_py(e: up::Error) -> PyErr {
    match e {
        up::Error::InconsistentRecords(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "BsmParams", frozen, from_py_object)]
#[derive(Clone)]
struct BsmParams(up::BsmParams);

#[pymethods]
impl BsmParams {
    #[new]
    fn new(s0: f64, r: f64, sigma: f64, t: f64, strike: f64) -> PyResult<Self> {
        up::BsmParams::new(s0, r, sigma, t, strike).map(Self).map_err(to_py)
    }

    /// S0 = 1, r = 0, sigma = 0.4, T = 1, K = 1.
    #[staticmethod]
    fn reference() -> Self {
        Self(up::BsmParams::reference())
    }

    #[getter]
    fn s0(&self) -> f64 {
        self.0.s0
    }
    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }
    #[getter]
    fn strike(&self) -> f64 {
        self.0.strike
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("BsmParams(s0={}, r={}, sigma={}, t={}, strike={})", p.s0, p.r, p.sigma, p.t, p.strike)
    }
}

#[pyclass(name = "DiscreteDistribution", frozen, from_py_object)]
#[derive(Clone)]
struct DiscreteDistribution(up::DiscreteDistribution);

#[pymethods]
impl DiscreteDistribution {
    #[new]
    fn new(prices: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        up::DiscreteDistribution::new(prices, probs).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (mean, std, n, coverage = 0.997))]
    fn from_normal(mean: f64, std: f64, n: usize, coverage: f64) -> PyResult<Self> {
        up::DiscreteDistribution::from_normal(mean, std, n, coverage).map(Self).map_err(to_py)
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.0.prices().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    #[getter]
    fn s_max(&self) -> f64 {
        self.0.s_max()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteDistribution(prices={:?}, probs={:?})", self.0.prices(), self.0.probs())
    }
}

#[pyfunction]
#[pyo3(signature = (params, n, coverage = 0.997))]
fn discretize(params: &BsmParams, n: usize, coverage: f64) -> PyResult<DiscreteDistribution> {
    up::discretize(&params.0, n, coverage).map(DiscreteDistribution).map_err(to_py)
}

#[pyfunction]
fn expected_payoff_discrete(dist: &DiscreteDistribution, strike: f64) -> f64 {
    up::expected_payoff_discrete(&dist.0, strike)
}

/// Returns `(estimate, std_error)`. `euler_steps` switches to a random walk.
#[pyfunction]
#[pyo3(signature = (params, n_paths, seed = 0, euler_steps = None))]
fn mc_price(params: &BsmParams, n_paths: u64, seed: u64, euler_steps: Option<usize>) -> PyResult<(f64, f64)> {
    let scheme = euler_steps.map_or(up::PathScheme::Exact, |steps| up::PathScheme::Euler { steps });
    let r = up::mc_price_with(&params.0, n_paths, seed, scheme).map_err(to_py)?;
    Ok((r.estimate, r.std_error))
}

/// Loader splitter angles reproducing `dist` exactly.
#[pyfunction]
fn fit_loader(dist: &DiscreteDistribution) -> PyResult<Vec<f64>> {
    Ok(up::fit_loader(&dist.0).map_err(to_py)?.to_angles())
}

#[pyclass(name = "PricingCircuit", frozen)]
struct PricingCircuit(up::PricingCircuit);

#[pymethods]
impl PricingCircuit {
    #[new]
    fn new(dist: &DiscreteDistribution, strike: f64) -> PyResult<Self> {
        up::PricingCircuit::new(&dist.0, strike).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.0.n_bins()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    /// Masked ancilla-1 probability after `m` amplification rounds.
    fn hit_probability(&self, m: u32) -> f64 {
        self.0.hit_probability(m)
    }

    /// `(hits, shots)` from sampling the amplified state.
    #[pyo3(signature = (m, shots, seed = 0))]
    fn run_depth(&self, m: u32, shots: u64, seed: u64) -> PyResult<(u64, u64)> {
        up::run_depth(&self.0, m, shots, seed).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (hits, shots, confidence = 0.95))]
fn binomial_ci(hits: u64, shots: u64, confidence: f64) -> PyResult<(f64, f64)> {
    up::binomial_ci(hits, shots, confidence).map_err(to_py)
}

/// Returns `(alpha, ci_low, ci_high)`.
#[pyfunction]
#[pyo3(signature = (depths, hits, shots, confidence = 0.95))]
fn recover_angle(depths: Vec<u32>, hits: Vec<f64>, shots: Vec<f64>, confidence: f64) -> PyResult<(f64, f64, f64)> {
    if depths.len() != hits.len() || depths.len() != shots.len() {
        return Err(PyValueError::new_err("depths, hits and shots must have equal length"));
    }
    let obs: Vec<up::Observation> = depths
        .iter()
        .zip(&hits)
        .zip(&shots)
        .map(|((&depth, &hits), &shots)| up::Observation { depth, hits, shots })
        .collect();
    let config = up::EstimatorConfig { confidence, ..up::EstimatorConfig::default() };
    let est = up::recover_angle(&obs, &config).map_err(to_py)?;
    Ok((est.alpha, est.ci.0, est.ci.1))
}

fn schedule(depths: Option<Vec<u32>>, shots: u64, repeats: u32) -> PyResult<up::AESchedule> {
    let depths = depths.unwrap_or_else(|| up::AESchedule::default().depths);
    up::AESchedule::new(depths, shots, repeats).map_err(to_py)
}

#[pyclass(name = "AEResult", frozen, get_all)]
struct AEResult {
    payoff_hat: f64,
    payoff_ci: (f64, f64),
    alpha_hat: f64,
    alpha_ci: (f64, f64),
    oracle_calls: u64,
    /// `(depth, hits, shots)` per depth.
    records: Vec<(u32, u64, u64)>,
}

#[pyfunction]
#[pyo3(signature = (dist, strike, depths = None, shots_per_depth = 100, repeats = 50, seed = 0))]
fn estimate_payoff(
    py: Python<'_>,
    dist: &DiscreteDistribution,
    strike: f64,
    depths: Option<Vec<u32>>,
    shots_per_depth: u64,
    repeats: u32,
    seed: u64,
) -> PyResult<AEResult> {
    let s = schedule(depths, shots_per_depth, repeats)?;
    let r = py.detach(|| up::estimate_payoff(&dist.0, strike, &s, seed)).map_err(to_py)?;
    Ok(AEResult {
        payoff_hat: r.payoff_hat,
        payoff_ci: r.payoff_ci,
        alpha_hat: r.alpha_hat,
        alpha_ci: r.alpha_ci,
        oracle_calls: r.oracle_calls,
        records: r.records.iter().map(|d| (d.depth, d.hits, d.shots)).collect(),
    })
}

/// `(m, oracle_calls, payoff_mean, payoff_std, abs_error, mc_error)`.
type ConvergenceTuple = (u32, u64, f64, f64, f64, f64);

#[pyfunction]
#[pyo3(signature = (dist, strike, depths = None, shots_per_depth = 100, repeats = 50, seed = 0))]
fn convergence_study(
    py: Python<'_>,
    dist: &DiscreteDistribution,
    strike: f64,
    depths: Option<Vec<u32>>,
    shots_per_depth: u64,
    repeats: u32,
    seed: u64,
) -> PyResult<Vec<ConvergenceTuple>> {
    let s = schedule(depths, shots_per_depth, repeats)?;
    let rows = py.detach(|| up::convergence_study(&dist.0, strike, &s, seed)).map_err(to_py)?;
    Ok(rows
        .iter()
        .map(|r| (r.m, r.oracle_calls, r.payoff_mean, r.payoff_std, r.abs_error, r.mc_error))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (params, shot_budget = 0, seed = 0))]
fn generate_distribution(params: Vec<f64>, shot_budget: u64, seed: u64) -> PyResult<Vec<f64>> {
    let ansatz = up::GeneratorAnsatz::new(params.len() + 1, params, shot_budget).map_err(to_py)?;
    up::generate_distribution(&ansatz, seed).map_err(to_py)
}

#[pyfunction]
fn l2_norm(fake: Vec<f64>, real: Vec<f64>) -> PyResult<f64> {
    up::l2_norm(&fake, &real).map_err(to_py)
}

#[pyclass(name = "GanHistory", frozen, get_all)]
struct GanHistory {
    best_params: Vec<f64>,
    best_l2: f64,
    /// `(generation, l2, e_real, e_fake)`.
    records: Vec<(usize, f64, f64, f64)>,
}

#[pyfunction]
#[pyo3(signature = (target, generations = 100, seed = 0, population_size = 30, shot_budget = 0))]
fn train_gan(
    py: Python<'_>,
    target: Vec<f64>,
    generations: usize,
    seed: u64,
    population_size: usize,
    shot_budget: u64,
) -> PyResult<GanHistory> {
    let config = up::TrainConfig { generations, seed, population_size, shot_budget, ..up::TrainConfig::default() };
    let h = py.detach(|| up::train_gan(&target, &config)).map_err(to_py)?;
    Ok(GanHistory {
        best_params: h.best_params.clone(),
        best_l2: h.best_l2,
        records: h.records.iter().map(|r| (r.generation, r.l2, r.e_real, r.e_fake)).collect(),
    })
}

#[pymodule]
fn pyunary(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BsmParams>()?;
    m.add_class::<DiscreteDistribution>()?;
    m.add_class::<PricingCircuit>()?;
    m.add_class::<AEResult>()?;
    m.add_class::<GanHistory>()?;
    m.add_function(wrap_pyfunction!(discretize, m)?)?;
    m.add_function(wrap_pyfunction!(expected_payoff_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(mc_price, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loader, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_ci, m)?)?;
    m.add_function(wrap_pyfunction!(recover_angle, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(generate_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(l2_norm, m)?)?;
    m.add_function(wrap_pyfunction!(train_gan, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyDict;

    fn with_module(code: &std::ffi::CStr) {
        Python::initialize();
        Python::attach(|py| {
            let module = PyModule::new(py, "pyunary").unwrap();
            pyunary(&module).unwrap();
            let globals = PyDict::new(py);
            globals.set_item("pu", module).unwrap();
            py.run(code, Some(&globals), None).unwrap_or_else(|e| panic!("{e}"));
        });
    }

    #[test]
    fn payoff_round_trip() {
        with_module(
            c"
d = pu.DiscreteDistribution([1.0, 2.0, 3.0], [0.25, 0.5, 0.25])
assert abs(pu.expected_payoff_discrete(d, 1.5) - 0.625) < 1e-12
c = pu.PricingCircuit(d, 1.5)
assert abs(c.hit_probability(0) * 1.5 - 0.625) < 1e-12
res = pu.estimate_payoff(d, 1.5, depths=list(range(6)), shots_per_depth=500, repeats=2, seed=3)
lo, hi = res.payoff_ci
assert lo <= res.payoff_hat <= hi
assert len(res.records) == 6
",
        );
    }

    #[test]
    fn errors_map_to_python_exceptions() {
        with_module(
            c"
try:
    pu.BsmParams(1.0, 0.0, -0.4, 1.0, 1.0)
    raise AssertionError('accepted negative sigma')
except ValueError:
    pass
try:
    pu.recover_angle([0, 1, 2], [5000, 10000, 10000], [10000, 10000, 10000])
    raise AssertionError('accepted inconsistent records')
except RuntimeError:
    pass
",
        );
    }

    #[test]
    fn generator_helpers() {
        with_module(
            c"
d = pu.discretize(pu.BsmParams.reference(), 6)
angles = pu.fit_loader(d)
assert pu.l2_norm(pu.generate_distribution(angles), d.probs) < 1e-12
h = pu.train_gan(d.probs, generations=3, seed=1)
assert len(h.records) == 3 and len(h.best_params) == 5
",
        );
    }
}
