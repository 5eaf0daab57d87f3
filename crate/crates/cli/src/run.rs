//! Pipelines behind each mode and the files they write.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use unary_pricing::estimation::loglog_slope;
use unary_pricing::{
    convergence_study, estimate_payoff, expected_payoff_discrete, generate_distribution, mc_price_with,
    train_gan, DiscreteDistribution, GeneratorAnsatz,
};

use crate::config::{ConfigError, ExperimentConfig, Mode};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<unary_pricing::Error> for RunError {
    fn from(e: unary_pricing::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    mode: String,
    seed: u64,
    config: &'a ExperimentConfig,
    rerun: String,
}

/// Distribution the circuit loads: explicit, binned, or from trained angles.
fn loaded_distribution(cfg: &ExperimentConfig) -> Result<DiscreteDistribution, RunError> {
    let dist = cfg.market_distribution()?;
    let Some(path) = &cfg.gan_params else {
        return Ok(dist);
    };
    let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("gan_params: {}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| RunError::Config(format!("gan_params: {e}")))?;
    let ansatz: GeneratorAnsatz = serde_json::from_value(file.get("ansatz").cloned().unwrap_or(file))
        .map_err(|e| RunError::Config(format!("gan_params: {e}")))?;
    if ansatz.n != dist.len() {
        return Err(RunError::Config(format!("gan_params: {} bins, config has {}", ansatz.n, dist.len())));
    }
    let exact = GeneratorAnsatz { shot_budget: 0, ..ansatz };
    let probs = generate_distribution(&exact, 0).map_err(|e| RunError::Config(format!("gan_params: {e}")))?;
    Ok(dist.with_probs(probs)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn sci(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Value, RunError> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut csv = Vec::new();
    let summary = match cfg.mode {
        Mode::Price => price(cfg, &mut csv)?,
        Mode::Converge => converge(cfg, &mut csv)?,
        Mode::GanTrain => gan_train(cfg, &mut csv)?,
        Mode::McBaseline => mc_baseline(cfg, &mut csv)?,
    };
    fs::write(out.join("results.csv"), csv)?;
    write_json(&out.join("summary.json"), &summary)?;
    let resolved = toml::to_string_pretty(cfg).map_err(|e| RunError::Runtime(e.to_string()))?;
    fs::write(out.join("config.toml"), &resolved)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        config: cfg,
        rerun: "unary-pricing --config config.toml".into(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(summary)
}

fn price(cfg: &ExperimentConfig, csv: &mut Vec<u8>) -> Result<Value, RunError> {
    let dist = loaded_distribution(cfg)?;
    let strike = cfg.market.strike;
    let res = estimate_payoff(&dist, strike, &cfg.schedule()?, cfg.seed)?;
    writeln!(csv, "depth,hits,shots,frequency,wilson_lo,wilson_hi")?;
    for r in &res.records {
        writeln!(csv, "{},{},{},{},{},{}", r.depth, r.hits, r.shots, sci(r.frequency), sci(r.wilson.0), sci(r.wilson.1))?;
    }
    Ok(json!({
        "mode": "price",
        "n_bins": dist.len(),
        "strike": strike,
        "payoff_hat": res.payoff_hat,
        "ci": [res.payoff_ci.0, res.payoff_ci.1],
        "alpha_hat": res.alpha_hat,
        "alpha_ci": [res.alpha_ci.0, res.alpha_ci.1],
        "oracle_calls": res.oracle_calls,
        "discrete_payoff": expected_payoff_discrete(&dist, strike),
    }))
}

fn converge(cfg: &ExperimentConfig, csv: &mut Vec<u8>) -> Result<Value, RunError> {
    let dist = loaded_distribution(cfg)?;
    let schedule = cfg.schedule()?;
    let rows = convergence_study(&dist, cfg.market.strike, &schedule, cfg.seed)?;
    writeln!(csv, "depth,m,oracle_calls,payoff_mean,payoff_std,abs_error,mc_error")?;
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.depth_index,
            r.m,
            r.oracle_calls,
            sci(r.payoff_mean),
            sci(r.payoff_std),
            sci(r.abs_error),
            sci(r.mc_error)
        )?;
    }
    let calls: Vec<f64> = rows.iter().map(|r| r.oracle_calls as f64).collect();
    let slope = |ys: Vec<f64>| loglog_slope(&calls, &ys);
    let last = rows.last().expect("schedule has depths");
    Ok(json!({
        "mode": "converge",
        "n_bins": dist.len(),
        "strike": cfg.market.strike,
        "discrete_payoff": expected_payoff_discrete(&dist, cfg.market.strike),
        "payoff_hat": last.payoff_mean,
        "payoff_std": last.payoff_std,
        "oracle_calls": schedule.oracle_calls(),
        "ae_slope": slope(rows.iter().map(|r| r.abs_error).collect()),
        "mc_slope": slope(rows.iter().map(|r| r.mc_error).collect()),
    }))
}

fn gan_train(cfg: &ExperimentConfig, csv: &mut Vec<u8>) -> Result<Value, RunError> {
    let target = cfg.market_distribution()?;
    let mut train = cfg.gan.clone();
    train.seed = cfg.seed;
    let history = train_gan(target.probs(), &train)?;
    history.write_csv(&mut *csv)?;
    let best = json!({
        "ansatz": history.best_ansatz(),
        "l2": history.best_l2,
        "target": target.probs(),
        "prices": target.prices(),
    });
    write_json(&cfg.output_dir.join("best_params.json"), &best)?;
    Ok(json!({
        "mode": "gan-train",
        "n_bins": target.len(),
        "generations": history.records.len(),
        "l2_final": history.final_l2(),
        "best_params": history.best_params,
    }))
}

fn mc_baseline(cfg: &ExperimentConfig, csv: &mut Vec<u8>) -> Result<Value, RunError> {
    let res = mc_price_with(&cfg.market, cfg.mc.n_paths, cfg.seed, cfg.mc.scheme)?;
    writeln!(csv, "n_paths,estimate,std_error")?;
    writeln!(csv, "{},{},{}", res.n_paths, sci(res.estimate), sci(res.std_error))?;
    Ok(json!({
        "mode": "mc-baseline",
        "payoff_hat": res.estimate,
        "std_error": res.std_error,
        "ci": [res.estimate - 1.96 * res.std_error, res.estimate + 1.96 * res.std_error],
        "n_paths": res.n_paths,
        "oracle_calls": res.n_paths,
    }))
}
