use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Keys the commands understand. Anything else in a config is rejected so
/// typos surface instead of silently falling back to defaults.
const KNOWN_KEYS: &[&str] = &[
    "sim.n",
    "sim.L",
    "sim.N",
    "sim.p",
    "sim.epsilon",
    "sim.profile",
    "sim.dt",
    "sim.t_max",
    "sim.threshold",
    "sim.step_control",
    "sim.snapshot_stride",
    "sim.nonlinear",
    "sim.dealias",
    "sweep.epsilons",
    "sweep.law",
    "sweep.parallel_width",
    "fit.input",
    "fit.law",
    "fit.n",
    "fit.p",
    "odi.epsilon",
    "odi.r_min",
    "odi.r_max",
    "odi.r_count",
    "advection.p",
    "advection.profiles",
    "advection.epsilon",
    "advection.epsilons",
    "advection.L",
    "advection.N",
    "fraclap.n",
    "fraclap.sigma",
    "fraclap.profile",
    "fraclap.q",
    "fraclap.shift",
    "fraclap.points",
    "fraclap.L",
    "fraclap.N",
    "fraclap.tolerance",
    "estimates.per_decade",
    "estimates.angles",
    "estimates.x_max",
    "estimates.r",
    "estimates.t_steps",
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Flat `section.key = value` settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override '{pair}' is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{key}: cannot parse '{v}'"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self
            .values
            .get(key)
            .ok_or_else(|| ConfigError(format!("missing required key '{key}'")))?;
        v.parse().map_err(|_| ConfigError(format!("{key}: cannot parse '{v}'")))
    }

    pub fn list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| ConfigError(format!("{key}: cannot parse '{s}'"))))
                .collect(),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }
}
