use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Search stopped at a limit with an incumbent; `gap` holds its quality.
    Feasible,
    /// Node limit reached before any incumbent was found.
    NodeLimit,
    IterationLimit,
    NumericFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::Feasible => "feasible",
            Status::NodeLimit => "node_limit",
            Status::IterationLimit => "iteration_limit",
            Status::NumericFailure => "numeric_failure",
        })
    }
}

impl Status {
    pub fn is_optimal(self) -> bool {
        self == Status::Optimal
    }

    /// True when `values` hold a primal-feasible assignment.
    pub fn has_solution(self) -> bool {
        matches!(self, Status::Optimal | Status::Feasible)
    }
}

/// Position of a variable or row logical relative to the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisStatus {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Basis keyed by name so it can seed a model that gained or lost entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub vars: IndexMap<String, BasisStatus>,
    pub rows: IndexMap<String, BasisStatus>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    #[serde(with = "nullable_f64")]
    pub objective: f64,
    pub values: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub duals: IndexMap<String, f64>,
    #[serde(default)]
    pub iterations: u64,
    #[serde(default)]
    pub nodes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip)]
    pub basis: Option<Basis>,
}

impl Solution {
    pub(crate) fn empty(status: Status) -> Self {
        Solution {
            status,
            objective: f64::NAN,
            values: IndexMap::new(),
            duals: IndexMap::new(),
            iterations: 0,
            nodes: 0,
            gap: None,
            basis: None,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// JSON dump `{status, objective, values, ...}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Non-finite objectives (no solution) serialize as JSON `null`.
mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
