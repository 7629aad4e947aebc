//! Continuous LP solving with certified optimality.

use crate::error::{SolverError, SolverResult};
use crate::model::{ConstraintSense, LinearModel};
use crate::simplex::{RunOutcome, Simplex};

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-7;
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;
pub const DUALITY_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration_limit",
            LpStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural values, indexed like the model's variables.
    pub x: Vec<f64>,
    /// Row duals: the rate of change of the optimum per unit of rhs.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_values(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations,
        }
    }
}

/// Residuals of an optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub max_complementarity: f64,
}

impl DualityReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn within_tolerances(&self) -> bool {
        self.max_primal_residual <= PRIMAL_TOL
            && self.max_dual_residual <= DUAL_TOL
            && self.max_complementarity <= COMPLEMENTARITY_TOL
            && self.gap() <= DUALITY_GAP_TOL * self.primal_objective.abs().max(1.0)
    }
}

fn iteration_budget(model: &LinearModel) -> usize {
    50 * (model.num_vars() + model.num_constraints()) + 10_000
}

/// Solves the continuous relaxation of `model` (integrality is ignored).
pub fn solve_lp(model: &LinearModel) -> SolverResult<LpSolution> {
    model.validate()?;
    let mut spx = Simplex::new(model);
    Ok(run_certified(model, &mut spx, iteration_budget(model)))
}

/// Runs the engine and certifies an optimal answer, retrying from a fresh
/// factorisation when the certificate fails.
pub(crate) fn run_certified(model: &LinearModel, spx: &mut Simplex, budget: usize) -> LpSolution {
    let mut attempts = 0;
    loop {
        let outcome = spx.solve(budget);
        let status = match outcome {
            RunOutcome::Optimal => LpStatus::Optimal,
            RunOutcome::Infeasible => LpStatus::Infeasible,
            RunOutcome::Unbounded => LpStatus::Unbounded,
            RunOutcome::IterationLimit => LpStatus::IterationLimit,
            RunOutcome::Numerical => LpStatus::NumericalFailure,
        };
        if status != LpStatus::Optimal {
            return LpSolution::without_values(status, spx.iterations);
        }
        let sol = extract(model, spx);
        let report = residuals(model, &sol, |j| spx.bounds(j));
        if report.within_tolerances() {
            return sol;
        }
        attempts += 1;
        if attempts >= 3 || !spx.polish() {
            return LpSolution::without_values(LpStatus::NumericalFailure, spx.iterations);
        }
    }
}

pub(crate) fn extract(model: &LinearModel, spx: &mut Simplex) -> LpSolution {
    let (duals, reduced_costs) = spx.duals();
    let x = spx.primal().to_vec();
    LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_value(&x),
        x,
        duals,
        reduced_costs,
        iterations: spx.iterations,
    }
}

/// Primal, dual and complementarity residuals of an optimal solution.
pub fn check_duality(model: &LinearModel, sol: &LpSolution) -> SolverResult<DualityReport> {
    if sol.status != LpStatus::Optimal {
        return Err(SolverError::NotOptimal(sol.status.to_string()));
    }
    if sol.x.len() != model.num_vars() {
        return Err(SolverError::DimensionMismatch { expected: model.num_vars(), got: sol.x.len() });
    }
    if sol.duals.len() != model.num_constraints() {
        return Err(SolverError::DimensionMismatch { expected: model.num_constraints(), got: sol.duals.len() });
    }
    Ok(residuals(model, sol, |j| {
        let v = &model.variables()[j];
        (v.lower, v.upper)
    }))
}

fn residuals(model: &LinearModel, sol: &LpSolution, bounds: impl Fn(usize) -> (f64, f64)) -> DualityReport {
    let x = &sol.x;
    let y = &sol.duals;
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    let mut dual_obj = model.objective_constant();

    // Reduced costs are recomputed from the duals rather than trusted.
    let mut d = model.objective().to_vec();
    for (i, c) in model.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            d[v.0] -= y[i] * a;
        }
        let slack = c.rhs - c.activity(x);
        primal = primal.max(c.violation(x));
        let sign_violation = match c.sense {
            ConstraintSense::Le => y[i].max(0.0),
            ConstraintSense::Ge => (-y[i]).max(0.0),
            ConstraintSense::Eq => 0.0,
        };
        dual = dual.max(sign_violation);
        if c.sense != ConstraintSense::Eq {
            comp = comp.max((y[i] * slack).abs());
        }
        dual_obj += c.rhs * y[i];
    }
    for j in 0..model.num_vars() {
        let (lower, upper) = bounds(j);
        let xj = x[j];
        primal = primal.max(lower - xj).max(xj - upper);
        let dj = d[j];
        if dj > 0.0 {
            if lower.is_finite() {
                dual_obj += dj * lower;
                comp = comp.max(dj * (xj - lower));
            } else {
                dual = dual.max(dj);
                dual_obj += dj * xj;
            }
        } else if dj < 0.0 {
            if upper.is_finite() {
                dual_obj += dj * upper;
                comp = comp.max(-dj * (upper - xj));
            } else {
                dual = dual.max(-dj);
                dual_obj += dj * xj;
            }
        }
    }
    DualityReport {
        primal_objective: model.objective_value(x),
        dual_objective: dual_obj,
        max_primal_residual: primal,
        max_dual_residual: dual,
        max_complementarity: comp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstraintSense::*;

    #[test]
    fn single_bound_row() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 10.0).unwrap();
        m.set_objective(x, 1.0);
        m.add_constraint("floor", vec![(x, 1.0)], Ge, 3.0).unwrap();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_model() {
        let m = LinearModel::new();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY).unwrap();
        let y = m.add_var("y", 0.0, f64::INFINITY).unwrap();
        m.set_objective(x, -1.0);
        m.add_constraint("r", vec![(x, 1.0), (y, -1.0)], Le, 1.0).unwrap();
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn contradictory_rows() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 5.0).unwrap();
        m.add_constraint("lo", vec![(x, 1.0)], Ge, 4.0).unwrap();
        m.add_constraint("hi", vec![(x, 1.0)], Le, 2.0).unwrap();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(check_duality(&m, &s).is_err());
    }

    #[test]
    fn free_variable_equality() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let y = m.add_var("y", 0.0, 4.0).unwrap();
        m.set_objective(y, 1.0);
        m.add_constraint("tie", vec![(x, 1.0), (y, -1.0)], Eq, -2.0).unwrap();
        m.add_constraint("xmin", vec![(x, 1.0)], Ge, 1.0).unwrap();
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!(check_duality(&m, &s).unwrap().within_tolerances());
    }
}
