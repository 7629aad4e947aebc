//! Linear and mixed-integer programming for desk-scale scheduling models.
//!
//! [`LinearModel`] holds a minimisation problem; [`solve_lp`] solves its
//! continuous relaxation with a bounded primal simplex and certifies the
//! answer, [`solve_milp`] runs branch-and-bound on top, and [`lpfile`] reads
//! and writes CPLEX LP text.

mod error;
mod lp;
mod lu;
mod milp;
mod model;
mod simplex;

pub mod lpfile;

pub use error::{SolverError, SolverResult};
pub use lp::{
    check_duality, solve_lp, DualityReport, LpSolution, LpStatus, COMPLEMENTARITY_TOL, DUALITY_GAP_TOL, DUAL_TOL,
    PRIMAL_TOL,
};
pub use lpfile::{export_lp_file, parse_lp_str, read_lp_file, write_lp_string};
pub use milp::{solve_milp, solve_milp_with_start, BnbConfig, MilpSolution, MilpStatus, INTEGRALITY_TOL};
pub use model::{Constraint, ConstraintSense, LinearModel, RowId, VarId, Variable};
