//! Experiment configuration: a TOML file, dotted `key=value` overrides, and
//! validation into typed module configs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use unary_pricing::{AESchedule, BsmParams, DiscreteDistribution, PathScheme, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Price,
    Converge,
    GanTrain,
    McBaseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Price => "price",
            Mode::Converge => "converge",
            Mode::GanTrain => "gan-train",
            Mode::McBaseline => "mc-baseline",
        })
    }
}

/// Explicit price grid and probabilities, used instead of binning the market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    pub prices: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSection {
    pub depths: Vec<u32>,
    pub shots_per_depth: u64,
    pub repeats: u32,
}

impl Default for AeSection {
    fn default() -> Self {
        let s = AESchedule::default();
        Self { depths: s.depths, shots_per_depth: s.shots_per_depth, repeats: s.repeats }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: u64,
    pub scheme: PathScheme,
}

impl Default for McSection {
    fn default() -> Self {
        Self { n_paths: 100_000, scheme: PathScheme::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_n_bins")]
    pub n_bins: usize,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    /// Generator angles (a `best_params.json` from gan-train) used as the
    /// loaded distribution over the binned market prices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gan_params: Option<PathBuf>,
    pub market: BsmParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSection>,
    #[serde(default)]
    pub ae: AeSection,
    #[serde(default)]
    pub gan: TrainConfig,
    #[serde(default)]
    pub mc: McSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_bins() -> usize {
    8
}

fn default_coverage() -> f64 {
    0.997
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    /// Reference configuration with every default filled in.
    pub fn reference() -> Self {
        Self {
            mode: Mode::Price,
            seed: 0,
            output_dir: default_output_dir(),
            n_bins: default_n_bins(),
            coverage: default_coverage(),
            gan_params: None,
            market: BsmParams::reference(),
            distribution: None,
            ae: AeSection::default(),
            gan: TrainConfig::default(),
            mc: McSection::default(),
        }
    }

    pub fn schedule(&self) -> Result<AESchedule, ConfigError> {
        AESchedule::new(self.ae.depths.clone(), self.ae.shots_per_depth, self.ae.repeats)
            .map_err(|e| err(format!("ae: {e}")))
    }

    /// Explicit distribution if one is given, otherwise the binned market law.
    pub fn market_distribution(&self) -> Result<DiscreteDistribution, ConfigError> {
        match &self.distribution {
            Some(d) => DiscreteDistribution::new(d.prices.clone(), d.probs.clone())
                .map_err(|e| err(format!("distribution: {e}"))),
            None => unary_pricing::discretize(&self.market, self.n_bins, self.coverage)
                .map_err(|e| err(format!("n_bins/coverage: {e}"))),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.market.validate().map_err(|e| err(format!("market: {e}")))?;
        self.schedule()?;
        self.gan.validate().map_err(|e| err(format!("gan: {e}")))?;
        if self.mc.n_paths < 2 {
            return Err(err(format!("mc.n_paths: must be >= 2, got {}", self.mc.n_paths)));
        }
        if let PathScheme::Euler { steps: 0 } = self.mc.scheme {
            return Err(err("mc.scheme.steps: must be >= 1"));
        }
        let dist = self.market_distribution()?;
        if self.distribution.is_some() && self.n_bins != dist.len() {
            return Err(err(format!(
                "n_bins: {} does not match the {} explicit distribution bins",
                self.n_bins,
                dist.len()
            )));
        }
        Ok(())
    }
}

/// Reads `path` (if any), applies overrides in order and deserializes.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
            toml::from_str::<Table>(&text).map_err(|e| err(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for (key, raw) in overrides {
        set_path(&mut table, key, parse_value(key, raw)?)?;
    }
    // explicit distributions fix the bin count unless it is set
    if let Some(Value::Table(d)) = table.get("distribution") {
        if let (false, Some(Value::Array(p))) = (table.contains_key("n_bins"), d.get("prices")) {
            let n = p.len() as i64;
            table.insert("n_bins".into(), Value::Integer(n));
        }
    }
    let config: ExperimentConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| err(format!("config: {}", e.to_string().trim().replace('\n', " "))))?;
    config.validate()?;
    Ok(config)
}

/// Splits `a.b.c=value`.
pub fn parse_override(arg: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = arg.split_once('=').ok_or_else(|| err(format!("override `{arg}` is not key=value")))?;
    let k = k.trim();
    if k.is_empty() || k.split('.').any(str::is_empty) {
        return Err(err(format!("override `{arg}` has an empty key segment")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// TOML literal, inclusive range `a..b` / `a..=b`, or a bare string.
fn parse_value(key: &str, raw: &str) -> Result<Value, ConfigError> {
    if let Some((a, b)) = raw.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (i64, i64) = match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(err(format!("{key}: bad range `{raw}`"))),
        };
        if b < a {
            return Err(err(format!("{key}: empty range `{raw}`")));
        }
        return Ok(Value::Array((a..=b).map(Value::Integer).collect()));
    }
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => Ok(t.remove("v").expect("parsed key")),
        Err(_) => Ok(Value::String(raw.to_string())),
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for (i, p) in parts.iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(err(format!("{}: not a section", parts[..=i].join(".")))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Documented TOML listing every key with its default.
pub fn reference_page() -> String {
    let body = toml::to_string_pretty(&ExperimentConfig::reference()).expect("serializable defaults");
    format!(
        "# unary-pricing experiment configuration (all defaults)\n\
         #\n\
         # mode: price | converge | gan-train | mc-baseline\n\
         # market is required; everything else is optional.\n\
         # [distribution] with prices/probs replaces the binned market law.\n\
         # gan_params = \"best_params.json\" loads trained generator angles.\n\
         # mc.scheme = {{ kind = \"euler\", steps = 252 }} switches to a random walk.\n\
         # Overrides on the command line use dotted keys: ae.depths=0..50 gan.seed=3\n\
         # (ranges are inclusive).\n\n{body}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive() {
        let v = parse_value("ae.depths", "0..3").unwrap();
        assert_eq!(v, Value::Array((0..=3).map(Value::Integer).collect()));
        assert_eq!(parse_value("x", "2..=2").unwrap(), Value::Array(vec![Value::Integer(2)]));
        assert!(parse_value("x", "3..1").is_err());
    }

    #[test]
    fn literals_and_strings() {
        assert_eq!(parse_value("seed", "7").unwrap(), Value::Integer(7));
        assert_eq!(parse_value("x", "[1, 2]").unwrap().as_array().unwrap().len(), 2);
        assert_eq!(parse_value("mode", "gan-train").unwrap(), Value::String("gan-train".into()));
    }

    #[test]
    fn override_syntax() {
        assert_eq!(parse_override("a.b = 3").unwrap(), ("a.b".into(), "3".into()));
        assert!(parse_override("a.b").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn reference_page_round_trips() {
        let page = reference_page();
        let cfg: ExperimentConfig = toml::from_str(&page).unwrap();
        assert_eq!(cfg, ExperimentConfig::reference());
    }

    #[test]
    fn missing_market_is_named() {
        let e = load(None, &[("mode".into(), "price".into())]).unwrap_err();
        assert!(e.0.contains("market"), "{e}");
    }

    #[test]
    fn nested_overrides_apply() {
        let ov: Vec<(String, String)> = [
            "mode=converge",
            "market.s0=1",
            "market.r=0",
            "market.sigma=0.4",
            "market.t=1",
            "market.strike=1",
            "ae.depths=0..4",
            "gan.generations=3",
        ]
        .iter()
        .map(|s| parse_override(s).unwrap())
        .collect();
        let cfg = load(None, &ov).unwrap();
        assert_eq!(cfg.ae.depths, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.gan.generations, 3);
        assert_eq!(cfg.mode, Mode::Converge);
    }
}
