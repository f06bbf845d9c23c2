//! In-memory representation of a linear or mixed-binary program.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// A linear row `Σ coef·x  (relation)  rhs`. Terms are sorted by variable
/// index with duplicates merged and exact zeros dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Lower and upper bound on the row activity implied by the relation.
    pub fn activity_bounds(&self) -> (f64, f64) {
        match self.relation {
            Relation::Le => (f64::NEG_INFINITY, self.rhs),
            Relation::Ge => (self.rhs, f64::INFINITY),
            Relation::Eq => (self.rhs, self.rhs),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: Sense,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("variable `{0}` already exists")]
    DuplicateVariable(String),
    #[error("constraint `{0}` already exists")]
    DuplicateConstraint(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("variable `{name}` has empty bound interval [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
}

/// Variable table, constraint rows and objective of one program.
#[derive(Clone, Debug)]
pub struct ProgramModel {
    vars: Vec<Variable>,
    var_index: HashMap<String, usize>,
    rows: Vec<Constraint>,
    row_index: HashMap<String, usize>,
    objective: Objective,
}

impl Default for ProgramModel {
    fn default() -> Self {
        Self::new()
    }
}

impl ProgramModel {
    pub fn new() -> Self {
        ProgramModel {
            vars: Vec::new(),
            var_index: HashMap::new(),
            rows: Vec::new(),
            row_index: HashMap::new(),
            objective: Objective { sense: Sense::Minimize, terms: Vec::new() },
        }
    }

    pub fn add_var(&mut self, name: &str, lower: f64, upper: f64, kind: VarKind) -> Result<usize, ModelError> {
        if self.var_index.contains_key(name) {
            return Err(ModelError::DuplicateVariable(name.to_string()));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        check_bounds(name, lower, upper)?;
        let idx = self.vars.len();
        self.vars.push(Variable { name: name.to_string(), lower, upper, kind });
        self.var_index.insert(name.to_string(), idx);
        Ok(idx)
    }

    pub fn add_constraint(
        &mut self,
        name: &str,
        terms: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        if self.row_index.contains_key(name) {
            return Err(ModelError::DuplicateConstraint(name.to_string()));
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name.to_string()));
        }
        let terms = self.normalize_terms(name, terms)?;
        let idx = self.rows.len();
        self.rows.push(Constraint { name: name.to_string(), terms, relation, rhs });
        self.row_index.insert(name.to_string(), idx);
        Ok(idx)
    }

    pub fn set_objective(
        &mut self,
        sense: Sense,
        terms: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<(), ModelError> {
        let terms = self.normalize_terms("objective", terms)?;
        self.objective = Objective { sense, terms };
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self.vars.get_mut(var).ok_or(ModelError::IndexOutOfRange(var))?;
        check_bounds(&v.name, lower, upper)?;
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) -> Result<(), ModelError> {
        let r = self.rows.get_mut(row).ok_or(ModelError::IndexOutOfRange(row))?;
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(r.name.clone()));
        }
        r.rhs = rhs;
        Ok(())
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn row_index(&self, name: &str) -> Option<usize> {
        self.row_index.get(name).copied()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, idx: usize) -> &Variable {
        &self.vars[idx]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Binary).map(|(i, _)| i)
    }

    pub fn has_binaries(&self) -> bool {
        self.vars.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Objective value of an assignment given in table order.
    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective.terms.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Largest violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.rows {
            let act: f64 = row.terms.iter().map(|&(j, c)| c * values[j]).sum();
            let (lo, hi) = row.activity_bounds();
            worst = worst.max(lo - act).max(act - hi);
        }
        worst
    }

    fn normalize_terms(
        &self,
        what: &str,
        terms: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Vec<(usize, f64)>, ModelError> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (j, c) in terms {
            if j >= self.vars.len() {
                return Err(ModelError::IndexOutOfRange(j));
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite(what.to_string()));
            }
            out.push((j, c));
        }
        out.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
        for (j, c) in out {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Ok(merged)
    }
}

fn check_bounds(name: &str, lower: f64, upper: f64) -> Result<(), ModelError> {
    if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(ModelError::NonFinite(name.to_string()));
    }
    if lower > upper {
        return Err(ModelError::InvalidBounds { name: name.to_string(), lower, upper });
    }
    Ok(())
}
