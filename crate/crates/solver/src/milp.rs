//! Branch-and-bound over the simplex relaxation.
//!
//! The search dives depth first from each node it picks (taking the child on
//! the rounding side of the branching variable) and, once a dive ends, picks
//! the open node with the smallest relaxation bound. Dives reuse the live
//! basis; nodes taken from the open list restore their parent's basis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::SolverResult;
use crate::lp::{run_certified, LpStatus};
use crate::model::LinearModel;
use crate::simplex::{BasisState, Simplex};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const INCUMBENT_FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Wall-clock budget. When it runs out with an incumbent in hand the
    /// result is reported as [`MilpStatus::GapLimit`].
    pub time_limit: Option<Duration>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig { abs_gap: 1e-6, rel_gap: 1e-6, node_limit: 1_000_000, time_limit: None }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.abs_gap > 0.0) || !(self.rel_gap > 0.0) {
            return Err("gaps must be positive".into());
        }
        if self.node_limit < 1 {
            return Err("node_limit must be at least 1".into());
        }
        Ok(())
    }

    fn tolerance(&self, incumbent: f64) -> f64 {
        self.abs_gap.max(self.rel_gap * incumbent.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Stopped early (time budget or unsolvable nodes) with an incumbent whose
    /// gap exceeds the requested one.
    GapLimit,
    NodeLimit,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::GapLimit => "gap_limit",
            MilpStatus::NodeLimit => "node_limit",
            MilpStatus::Unbounded => "unbounded",
            MilpStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective (NaN without an incumbent).
    pub objective: f64,
    /// Incumbent values; empty without an incumbent.
    pub x: Vec<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Objective of every accepted incumbent, in acceptance order.
    pub incumbent_history: Vec<f64>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

struct Node {
    bound: f64,
    seq: usize,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Rc<BasisState>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound (then the oldest node) compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a LinearModel,
    cfg: &'a BnbConfig,
    spx: Simplex,
    ints: Vec<usize>,
    root_bounds: Vec<(f64, f64)>,
    applied: Vec<(usize, f64, f64)>,
    incumbent: Option<(f64, Vec<f64>)>,
    history: Vec<f64>,
    budget: usize,
}

impl Search<'_> {
    fn apply(&mut self, changes: &[(usize, f64, f64)]) {
        for &(j, _, _) in &self.applied {
            let (lo, hi) = self.root_bounds[j];
            self.spx.set_bounds(j, lo, hi);
        }
        for &(j, lo, hi) in changes {
            self.spx.set_bounds(j, lo, hi);
        }
        self.applied = changes.to_vec();
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((z, _)) => z - self.cfg.tolerance(*z),
            None => f64::INFINITY,
        }
    }

    fn offer(&mut self, x: Vec<f64>) {
        let z = self.model.objective_value(&x);
        if self.incumbent.as_ref().map_or(true, |(best, _)| z < *best) {
            self.history.push(z);
            self.incumbent = Some((z, x));
        }
    }

    /// Rounds the integer columns of an integral relaxation point and checks
    /// the rounded point against every row; when rounding breaks a row, the
    /// continuous columns are re-solved with the integers fixed.
    fn accept_integral(&mut self, x: &[f64]) {
        let mut xr = x.to_vec();
        for &j in &self.ints {
            xr[j] = xr[j].round();
        }
        if self.model.max_violation(&xr) <= INCUMBENT_FEAS_TOL {
            self.offer(xr);
            return;
        }
        if let Some(fixed) = self.fix_and_solve(&xr) {
            self.offer(fixed);
        }
    }

    fn fix_and_solve(&mut self, xr: &[f64]) -> Option<Vec<f64>> {
        let saved = self.spx.snapshot();
        let restore: Vec<(usize, f64, f64)> = self
            .ints
            .iter()
            .map(|&j| {
                let (lo, hi) = self.spx.bounds(j);
                (j, lo, hi)
            })
            .collect();
        for &j in &self.ints {
            self.spx.set_bounds(j, xr[j], xr[j]);
        }
        let sol = run_certified(self.model, &mut self.spx, self.budget);
        for &(j, lo, hi) in &restore {
            self.spx.set_bounds(j, lo, hi);
        }
        self.spx.restore(&saved);
        if sol.status != LpStatus::Optimal {
            return None;
        }
        let mut x = sol.x;
        for &j in &self.ints {
            x[j] = xr[j];
        }
        (self.model.max_violation(&x) <= INCUMBENT_FEAS_TOL).then_some(x)
    }

    /// Most fractional integer column, lowest index on ties.
    fn branching_var(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_frac = INTEGRALITY_TOL;
        for &j in &self.ints {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > best_frac {
                best_frac = dist;
                best = Some((j, x[j]));
            }
        }
        best
    }
}

/// Solves `model` honouring integrality flags.
pub fn solve_milp(model: &LinearModel, cfg: &BnbConfig) -> SolverResult<MilpSolution> {
    search(model, cfg, None)
}

/// Like [`solve_milp`], seeded with a known solution. A start point that is
/// not integral or breaks a row or bound is ignored.
pub fn solve_milp_with_start(model: &LinearModel, cfg: &BnbConfig, start: &[f64]) -> SolverResult<MilpSolution> {
    if start.len() != model.num_vars() {
        return Err(crate::error::SolverError::DimensionMismatch { expected: model.num_vars(), got: start.len() });
    }
    search(model, cfg, Some(start))
}

fn search(model: &LinearModel, cfg: &BnbConfig, start_point: Option<&[f64]>) -> SolverResult<MilpSolution> {
    model.validate()?;
    let start = Instant::now();
    let mut spx = Simplex::new(model);
    let ints: Vec<usize> = model.integer_vars().map(|v| v.0).collect();
    let mut root_bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lower, v.upper)).collect();
    for &j in &ints {
        let (lo, hi) = root_bounds[j];
        let (lo, hi) = (lo.ceil(), hi.floor());
        if lo > hi {
            return Ok(finish(MilpStatus::Infeasible, None, f64::INFINITY, 0, 0, Vec::new()));
        }
        root_bounds[j] = (lo, hi);
        spx.set_bounds(j, lo, hi);
    }
    let budget = 50 * (model.num_vars() + model.num_constraints()) + 10_000;
    let mut s = Search {
        model,
        cfg,
        spx,
        ints,
        root_bounds,
        applied: Vec::new(),
        incumbent: None,
        history: Vec::new(),
        budget,
    };

    if let Some(x0) = start_point {
        let integral = s.ints.iter().all(|&j| (x0[j] - x0[j].round()).abs() <= INTEGRALITY_TOL);
        let in_bounds = model
            .variables()
            .iter()
            .zip(x0)
            .all(|(v, &x)| x >= v.lower - INCUMBENT_FEAS_TOL && x <= v.upper + INCUMBENT_FEAS_TOL);
        if integral && in_bounds {
            s.accept_integral(x0);
        }
    }

    let mut open: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    // Bounds of nodes that could not be evaluated; they keep the global bound
    // honest.
    let mut lost_bound = f64::INFINITY;
    let mut stopped_early = false;

    let mut current: Option<Node> = Some(Node { bound: f64::NEG_INFINITY, seq, changes: Vec::new(), basis: None });
    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match open.pop() {
                Some(n) => {
                    if n.bound >= s.cutoff() {
                        continue;
                    }
                    n
                }
                None => break,
            },
        };
        if nodes >= cfg.node_limit || cfg.time_limit.map_or(false, |t| start.elapsed() >= t) {
            open.push(node);
            stopped_early = true;
            break;
        }
        if let Some(b) = &node.basis {
            s.spx.restore(b);
        }
        s.apply(&node.changes);
        nodes += 1;
        let sol = run_certified(model, &mut s.spx, budget);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded if nodes == 1 => {
                return Ok(finish(MilpStatus::Unbounded, None, f64::NEG_INFINITY, nodes, s.spx.iterations, Vec::new()));
            }
            _ => {
                lost_bound = lost_bound.min(node.bound);
                if nodes == 1 {
                    return Ok(finish(MilpStatus::NumericalFailure, None, f64::NEG_INFINITY, nodes, s.spx.iterations, Vec::new()));
                }
                continue;
            }
        }
        let bound = sol.objective.max(node.bound);
        if bound >= s.cutoff() {
            continue;
        }
        let Some((j, v)) = s.branching_var(&sol.x) else {
            s.accept_integral(&sol.x);
            continue;
        };

        let (lo, hi) = s.spx.bounds(j);
        let with = |lo: f64, hi: f64| {
            let mut c: Vec<(usize, f64, f64)> = node.changes.iter().copied().filter(|&(k, _, _)| k != j).collect();
            c.push((j, lo, hi));
            c
        };
        let down = with(lo, v.floor());
        let up = with(v.ceil(), hi);
        let up_first = v - v.floor() >= 0.5;
        let (dive, other) = if up_first { (up, down) } else { (down, up) };
        let basis = Rc::new(s.spx.snapshot());
        seq += 1;
        open.push(Node { bound, seq, changes: other, basis: Some(basis) });
        seq += 1;
        current = Some(Node { bound, seq, changes: dive, basis: None });
    }

    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let iterations = s.spx.iterations;
    let history = s.history;
    match s.incumbent {
        None => {
            let status = if stopped_early {
                MilpStatus::NodeLimit
            } else if lost_bound < f64::INFINITY {
                MilpStatus::NumericalFailure
            } else {
                MilpStatus::Infeasible
            };
            let bound = open_bound.min(lost_bound);
            Ok(finish(status, None, bound, nodes, iterations, history))
        }
        Some((z, x)) => {
            let bound = open_bound.min(lost_bound).min(z);
            let gap = (z - bound).abs();
            let status = if gap <= cfg.tolerance(z) {
                MilpStatus::Optimal
            } else if stopped_early && nodes >= cfg.node_limit {
                MilpStatus::NodeLimit
            } else {
                MilpStatus::GapLimit
            };
            Ok(finish(status, Some((z, x)), bound, nodes, iterations, history))
        }
    }
}

fn finish(
    status: MilpStatus,
    incumbent: Option<(f64, Vec<f64>)>,
    bound: f64,
    nodes: usize,
    lp_iterations: usize,
    incumbent_history: Vec<f64>,
) -> MilpSolution {
    let (objective, x) = incumbent.unwrap_or((f64::NAN, Vec::new()));
    let gap = if objective.is_finite() { (objective - bound).abs() } else { f64::INFINITY };
    MilpSolution { status, objective, x, bound, gap, nodes, lp_iterations, incumbent_history }
}
