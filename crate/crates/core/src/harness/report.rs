use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A side condition of a check: `value ≤ bound` (`at_most`) or `value ≥ bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub at_most: bool,
    pub pass: bool,
}

impl Condition {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            at_most: true,
            pass: value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            at_most: false,
            pass: value >= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub anchor: String,
    pub params: Value,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub tolerance_overridden: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    pub conditions: Vec<Condition>,
    pub pass: bool,
    pub conventions: Vec<String>,
    pub notes: Vec<String>,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: usize,
    pub box_length: f64,
    pub spacing: f64,
    pub k_max: f64,
    pub mu: f64,
    pub two_s: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub engine_version: String,
    pub seed: u64,
    pub grid: GridSummary,
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
    pub wall_time_s: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with every wall-time field zeroed, for comparisons.
    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        for c in &mut r.checks {
            c.wall_time_s = 0.0;
        }
        r
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
