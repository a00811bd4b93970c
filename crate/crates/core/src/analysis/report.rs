use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One failed pointwise check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(rename = "where")]
    pub location: String,
    pub expected: f64,
    pub got: f64,
}

/// Dependency indices with optional `(w⁻¹)_{0,τ}` weights keyed by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DependencyStructure {
    pub t: usize,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<usize, f64>>,
}

/// Outcome of a verification run, serialized as
/// `{ "pass", "violations": [{"where", "expected", "got"}], "dependency"? }`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub pass: bool,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependency: Option<DependencyStructure>,
    /// Largest probability discrepancy seen over all checked cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Report {
            pass: violations.is_empty(),
            violations,
            ..Report::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
