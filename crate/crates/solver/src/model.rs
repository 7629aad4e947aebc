//! In-memory linear model shared by the LP and MILP solvers and the LP-file
//! writer.

use std::collections::HashMap;
use std::fmt;

use crate::error::{SolverError, SolverResult};

/// Column index into a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Row index into a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for ConstraintSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.integer && self.lower >= 0.0 && self.upper <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimisation problem `min c'x + k  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    objective_constant: f64,
    registry: HashMap<String, VarId>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> SolverResult<VarId> {
        self.push_var(name.into(), lower, upper, false)
    }

    pub fn add_integer_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> SolverResult<VarId> {
        self.push_var(name.into(), lower, upper, true)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> SolverResult<VarId> {
        self.push_var(name.into(), 0.0, 1.0, true)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, integer: bool) -> SolverResult<VarId> {
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(SolverError::InvalidBounds { name, lower, upper });
        }
        if self.registry.contains_key(&name) {
            return Err(SolverError::DuplicateName(name));
        }
        let id = VarId(self.variables.len());
        self.registry.insert(name.clone(), id);
        self.variables.push(Variable { name, lower, upper, integer });
        self.objective.push(0.0);
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> SolverResult<RowId> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(SolverError::NonFinite(format!("rhs of row {name}")));
        }
        for &(v, a) in &terms {
            if v.0 >= self.variables.len() {
                return Err(SolverError::UnknownVariable(format!("column {} in row {name}", v.0)));
            }
            if !a.is_finite() {
                return Err(SolverError::NonFinite(format!("coefficient of {} in row {name}", self.variables[v.0].name)));
            }
        }
        let id = RowId(self.constraints.len());
        self.constraints.push(Constraint { name, terms, sense, rhs });
        Ok(id)
    }

    pub fn set_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.0] = coef;
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.0] += coef;
    }

    pub fn set_objective_constant(&mut self, k: f64) {
        self.objective_constant = k;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> SolverResult<()> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(SolverError::InvalidBounds {
                name: self.variables[var.0].name.clone(),
                lower,
                upper,
            });
        }
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn set_integer(&mut self, var: VarId, integer: bool) {
        self.variables[var.0].integer = integer;
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.registry.get(name).copied()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: RowId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(j, _)| VarId(j))
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(bounds, f64::max)
    }

    /// Structural well-formedness: finite data, consistent bounds.
    pub fn validate(&self) -> SolverResult<()> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolverError::InvalidBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolverError::NonFinite(format!("objective coefficient of {}", self.variables[j].name)));
            }
        }
        Ok(())
    }
}
