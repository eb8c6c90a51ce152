use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::HamiltonianConfig;
use crate::error::{GqkError, Result};
use crate::field::FieldSpec;
use crate::grid::{GridSpec, SpinSpec};
use crate::propagate::PropagatorConfig;

fn default_n() -> usize {
    32
}

fn default_box() -> f64 {
    16.0
}

fn default_mu() -> f64 {
    1.0
}

fn default_states() -> usize {
    4
}

fn default_suite() -> String {
    "default".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_box")]
    pub box_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            box_length: default_box(),
        }
    }
}

impl GridConfig {
    /// Builds the grid; `key` prefixes the diagnostic (e.g. `grid`).
    pub fn build(&self, key: &str) -> Result<GridSpec> {
        if self.n < 4 || !self.n.is_power_of_two() {
            return Err(GqkError::Config(format!(
                "{key}.n = {}: must be a power of two and at least 4",
                self.n
            )));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return Err(GqkError::Config(format!(
                "{key}.box_length = {}: must be positive",
                self.box_length
            )));
        }
        GridSpec::new(self.n, self.box_length)
    }
}

/// One entry of the `[[checks]]` list. Everything but `id` is optional and
/// falls back to the suite-level value or the check's own default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckEntry {
    pub id: String,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub two_s: Option<u32>,
    #[serde(default)]
    pub states: Option<usize>,
    /// Number of sampled group elements, pairs or triples.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianConfig>,
    #[serde(default)]
    pub eta: Option<[FieldSpec; 3]>,
    #[serde(default)]
    pub f: Option<[FieldSpec; 3]>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
}

impl CheckEntry {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.into(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_suite")]
    pub suite: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub two_s: u32,
    /// Size of the seeded state set used by most checks.
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    /// Absent: the default suite. Present but empty: no checks.
    #[serde(default)]
    pub checks: Option<Vec<CheckEntry>>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: default_suite(),
            seed: 0,
            grid: GridConfig::default(),
            mu: default_mu(),
            two_s: 0,
            states: default_states(),
            propagator: PropagatorConfig::default(),
            checks: None,
        }
    }
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| GqkError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            GqkError::Config(m) => GqkError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.build("grid")?;
        if !(self.mu > 0.0) {
            return Err(GqkError::Config(format!("mu = {}: must be positive", self.mu)));
        }
        if self.states == 0 {
            return Err(GqkError::Config("states: must be at least 1".into()));
        }
        self.propagator
            .validate()
            .map_err(|e| GqkError::Config(format!("propagator: {e}")))?;
        for (k, c) in self.checks.iter().flatten().enumerate() {
            if let Some(g) = &c.grid {
                g.build(&format!("checks[{k}].grid"))?;
            }
            if let Some(mu) = c.mu {
                if !(mu > 0.0) {
                    return Err(GqkError::Config(format!("checks[{k}].mu = {mu}: must be positive")));
                }
            }
            if let Some(t) = c.tolerance {
                if !(t > 0.0) {
                    return Err(GqkError::Config(format!(
                        "checks[{k}].tolerance = {t}: must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default)]
    pub x0: [f64; 3],
    #[serde(default)]
    pub p0: [f64; 3],
    pub width: f64,
    /// Spinor as `[re, im]` pairs; defaults to the first basis vector.
    #[serde(default)]
    pub spinor: Option<Vec<[f64; 2]>>,
}

/// Input of the `evolve` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub two_s: u32,
    pub hamiltonian: HamiltonianConfig,
    pub packet: PacketConfig,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    pub t_total: f64,
    /// Output intervals; the series has `steps + 1` rows (one when `t_total = 0`).
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    100
}

impl EvolveConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: EvolveConfig = toml::from_str(text).map_err(|e| GqkError::Config(e.to_string()))?;
        cfg.grid.build("grid")?;
        if !(cfg.t_total >= 0.0) {
            return Err(GqkError::Config(format!("t_total = {}: must be non-negative", cfg.t_total)));
        }
        if cfg.t_total > 0.0 && cfg.steps == 0 {
            return Err(GqkError::Config("steps: must be at least 1".into()));
        }
        cfg.propagator
            .validate()
            .map_err(|e| GqkError::Config(format!("propagator: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn spin(&self) -> SpinSpec {
        SpinSpec::new(self.two_s)
    }
}

fn default_pairs() -> usize {
    50
}

fn default_few() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_few")]
    pub translations: usize,
    #[serde(default = "default_pairs")]
    pub boost_translation: usize,
    #[serde(default = "default_few")]
    pub general: usize,
    #[serde(default = "default_identity")]
    pub identity: usize,
}

fn default_identity() -> usize {
    1
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            translations: default_few(),
            boost_translation: default_pairs(),
            general: default_few(),
            identity: default_identity(),
        }
    }
}

/// Input of the `multiplier` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub two_s: u32,
    #[serde(default)]
    pub sample: SampleConfig,
}

impl MultiplierConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: MultiplierConfig =
            toml::from_str(text).map_err(|e| GqkError::Config(e.to_string()))?;
        cfg.grid.build("grid")?;
        if !(cfg.mu > 0.0) {
            return Err(GqkError::Config(format!("mu = {}: must be positive", cfg.mu)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_grid_names_the_key() {
        let err = SuiteConfig::parse("[grid]\nn = 6\n").unwrap_err().to_string();
        assert!(err.contains("grid.n"), "{err}");
        let err = SuiteConfig::parse("[[checks]]\nid = \"CANON\"\ngrid = { n = 12 }\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("checks[0].grid.n"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = SuiteConfig::parse("seed = 1\nbogus = 2\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn empty_and_default_check_lists_differ() {
        assert!(SuiteConfig::parse("").unwrap().checks.is_none());
        assert_eq!(SuiteConfig::parse("checks = []").unwrap().checks, Some(vec![]));
    }
}
