//! Bounded-variable primal simplex on a revised (factorised) basis.
//!
//! Every row `a_i x (<=,=,>=) b_i` gets a logical column `s_i` so that
//! `A x + s = b`; the logical bounds encode the row sense. Phase one
//! minimises the sum of bound violations of the basic variables (a composite
//! method, so no artificial columns), phase two the true objective. Pricing is
//! Dantzig's rule with a Harris two-pass ratio test; after a run of degenerate
//! pivots the engine falls back to Bland's rule until progress resumes.

use crate::lu::{factorize, LuFactors, SparseColumn};
use crate::model::{ConstraintSense, LinearModel};

pub(crate) const FEAS_TOL: f64 = 1e-9;
pub(crate) const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column held at zero.
    AtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RunOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

/// Basis snapshot used to warm-start a later solve.
#[derive(Debug, Clone)]
pub(crate) struct BasisState {
    basis: Vec<usize>,
    status: Vec<VarStatus>,
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    // Row-wise copy of the structural matrix, for pivot rows.
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    pos: Vec<usize>,
    lu: Option<LuFactors>,
    xb_dirty: bool,
    work: Vec<f64>,
    pub iterations: usize,
}

impl Simplex {
    pub fn new(model: &LinearModel) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                cols[v.0].push((i, a));
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_start.push(0);
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < col.len() {
                let i = col[k].0;
                let mut a = 0.0;
                while k < col.len() && col[k].0 == i {
                    a += col[k].1;
                    k += 1;
                }
                if a != 0.0 {
                    row_idx.push(i);
                    vals.push(a);
                }
            }
            col_start.push(row_idx.len());
        }
        drop(cols);
        let mut row_start = vec![0usize; m + 1];
        for &i in &row_idx {
            row_start[i + 1] += 1;
        }
        for i in 0..m {
            row_start[i + 1] += row_start[i];
        }
        let mut fill = row_start.clone();
        let mut row_col = vec![0usize; row_idx.len()];
        let mut row_val = vec![0.0; row_idx.len()];
        for j in 0..n {
            for p in col_start[j]..col_start[j + 1] {
                let i = row_idx[p];
                row_col[fill[i]] = j;
                row_val[fill[i]] = vals[p];
                fill[i] += 1;
            }
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for (v, &c) in model.variables().iter().zip(model.objective()) {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(c);
        }
        let mut b = Vec::with_capacity(m);
        for c in model.constraints() {
            let (lo, hi) = match c.sense {
                ConstraintSense::Le => (0.0, f64::INFINITY),
                ConstraintSense::Ge => (f64::NEG_INFINITY, 0.0),
                ConstraintSense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
            b.push(c.rhs);
        }

        let mut s = Simplex {
            m,
            n,
            col_start,
            row_idx,
            vals,
            row_start,
            row_col,
            row_val,
            lower,
            upper,
            cost,
            b,
            x: vec![0.0; n + m],
            basis: (n..n + m).collect(),
            status: vec![VarStatus::AtLower; n + m],
            pos: vec![usize::MAX; n + m],
            lu: None,
            xb_dirty: true,
            work: vec![0.0; m],
            iterations: 0,
        };
        for (p, &j) in s.basis.iter().enumerate() {
            s.status[j] = VarStatus::Basic;
            s.pos[j] = p;
        }
        for j in 0..n {
            s.place_nonbasic(j);
        }
        s.crash();
        s
    }

    /// Replaces logicals of equality rows by structural columns while the
    /// basis stays triangular. A column qualifies when it has no entry in a
    /// row already pivoted on; free and cheap columns with wide bounds go first.
    fn crash(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut open: Vec<bool> = (0..m).map(|i| self.lower[n + i] == self.upper[n + i]).collect();
        if !open.iter().any(|&o| o) {
            return;
        }
        let mut taken = vec![false; m];
        let mut order: Vec<usize> = (0..n).filter(|&j| self.lower[j] < self.upper[j] && self.col_start[j + 1] > self.col_start[j]).collect();
        let key = |j: usize| {
            let free = self.lower[j].is_infinite() && self.upper[j].is_infinite();
            let range = self.upper[j] - self.lower[j];
            (!free, self.cost[j].abs(), -range)
        };
        order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
        for j in order {
            let (rows, vals) = self.column(j);
            if rows.iter().any(|&r| taken[r]) {
                continue;
            }
            let amax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut pick: Option<(usize, f64)> = None;
            for (&r, &a) in rows.iter().zip(vals) {
                if open[r] && a.abs() >= 0.1 * amax && pick.map_or(true, |(_, b)| a.abs() > b) {
                    pick = Some((r, a.abs()));
                }
            }
            let Some((r, _)) = pick else { continue };
            taken[r] = true;
            open[r] = false;
            let logical = n + r;
            let p = self.pos[logical];
            self.status[logical] = VarStatus::AtLower;
            self.pos[logical] = usize::MAX;
            self.place_nonbasic(logical);
            self.basis[p] = j;
            self.status[j] = VarStatus::Basic;
            self.pos[j] = p;
        }
    }


    fn place_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let st = match self.status[j] {
            VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
            _ if lo.is_finite() => VarStatus::AtLower,
            _ if hi.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::AtZero,
        };
        self.status[j] = st;
        self.x[j] = match st {
            VarStatus::AtLower => lo,
            VarStatus::AtUpper => hi,
            _ => 0.0,
        };
    }

    /// Changes the bounds of a structural column, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            let old = self.x[j];
            self.place_nonbasic(j);
            if self.x[j] != old {
                self.xb_dirty = true;
            }
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn snapshot(&self) -> BasisState {
        BasisState { basis: self.basis.clone(), status: self.status.clone() }
    }

    pub fn restore(&mut self, state: &BasisState) {
        self.basis.clone_from(&state.basis);
        self.status.clone_from(&state.status);
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for (p, &j) in self.basis.iter().enumerate() {
            self.pos[j] = p;
        }
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.place_nonbasic(j);
            }
        }
        self.lu = None;
        self.xb_dirty = true;
    }

    /// Structural column `j` in compressed form.
    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_start[j]..self.col_start[j + 1];
        (&self.row_idx[r.clone()], &self.vals[r])
    }

    fn refactor(&mut self) -> bool {
        loop {
            let unit_rows: Vec<usize> = self.basis.iter().map(|&j| j.saturating_sub(self.n)).collect();
            let one = [1.0];
            let cols: Vec<SparseColumn<'_>> = self
                .basis
                .iter()
                .zip(&unit_rows)
                .map(|(&j, r)| {
                    if j < self.n {
                        let (rows, vals) = self.column(j);
                        SparseColumn { rows, vals }
                    } else {
                        SparseColumn { rows: std::slice::from_ref(r), vals: &one }
                    }
                })
                .collect();
            match factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.xb_dirty = true;
                    return true;
                }
                Err(sing) => {
                    drop(cols);
                    if sing.dependent_positions.len() != sing.free_rows.len() {
                        return false;
                    }
                    for (&p, &r) in sing.dependent_positions.iter().zip(&sing.free_rows) {
                        let out = self.basis[p];
                        let logical = self.n + r;
                        if self.status[logical] == VarStatus::Basic {
                            return false;
                        }
                        self.status[out] = VarStatus::AtLower;
                        self.pos[out] = usize::MAX;
                        self.place_nonbasic(out);
                        self.basis[p] = logical;
                        self.status[logical] = VarStatus::Basic;
                        self.pos[logical] = p;
                    }
                }
            }
        }
    }

    fn recompute_xb(&mut self) {
        let mut r = self.b.clone();
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    r[self.row_idx[p]] -= self.vals[p] * xj;
                }
            } else {
                r[j - self.n] -= xj;
            }
        }
        let lu = self.lu.as_ref().expect("factorised");
        lu.ftran(&mut r, &mut self.work);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = r[p];
        }
        self.xb_dirty = false;
    }

    fn ensure_factor(&mut self) -> bool {
        let stale = match &self.lu {
            None => true,
            Some(lu) => lu.num_updates() >= REFACTOR_EVERY || lu.eta_nnz() > 4 * lu.factor_nnz() + 4 * self.m,
        };
        if stale && !self.refactor() {
            return false;
        }
        if self.xb_dirty {
            self.recompute_xb();
        }
        true
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let xj = self.x[j];
        if xj < self.lower[j] - FEAS_TOL {
            self.lower[j] - xj
        } else if xj > self.upper[j] + FEAS_TOL {
            xj - self.upper[j]
        } else {
            0.0
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        if j < self.n {
            let mut s = c;
            for p in self.col_start[j]..self.col_start[j + 1] {
                s -= y[self.row_idx[p]] * self.vals[p];
            }
            s
        } else {
            c - y[j - self.n]
        }
    }

    /// Reduced costs of every column for the current phase.
    fn price_all(&mut self, phase1: bool, y: &mut [f64], d: &mut [f64]) {
        for p in 0..self.m {
            let j = self.basis[p];
            y[p] = if phase1 {
                let xj = self.x[j];
                if xj < self.lower[j] - FEAS_TOL {
                    -1.0
                } else if xj > self.upper[j] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost[j]
            };
        }
        self.lu.as_ref().unwrap().btran(y, &mut self.work);
        for j in 0..self.n + self.m {
            d[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { self.reduced_cost(j, y, phase1) };
        }
    }

    /// Runs primal simplex from the current basis.
    ///
    /// Phase one reprices every column each iteration. Phase two keeps the
    /// reduced costs up to date through the pivot row and prices with
    /// Devex reference weights.
    pub fn solve(&mut self, max_iter: usize) -> RunOutcome {
        let m = self.m;
        let total = self.n + m;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut rho = vec![0.0; m];
        let mut d = vec![0.0; total];
        let mut prow = vec![0.0; total];
        let mut touched: Vec<usize> = Vec::new();
        let mut weight = vec![1.0; total];
        let mut d_valid = false;
        // Phase two keeps the basis feasible, so feasibility is rechecked
        // only after a refactorisation.
        let mut phase1 = true;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut verified_rounds = 0;
        let start_iter = self.iterations;

        loop {
            if self.iterations - start_iter >= max_iter {
                return RunOutcome::IterationLimit;
            }
            if !self.ensure_factor() {
                return RunOutcome::Numerical;
            }
            if self.lu.as_ref().unwrap().num_updates() == 0 {
                d_valid = false;
                phase1 = true;
            }
            if phase1 {
                phase1 = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
            }
            if phase1 {
                self.price_all(true, &mut y, &mut d);
                d_valid = false;
            } else if !d_valid {
                self.price_all(false, &mut y, &mut d);
                d_valid = true;
            }

            // Pricing.
            let mut entering = usize::MAX;
            let mut best = 0.0;
            let mut enter_dir = 0.0;
            for j in 0..total {
                let dj = d[j];
                if dj.abs() <= OPT_TOL {
                    continue;
                }
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let dir = match st {
                    VarStatus::AtLower if dj < -OPT_TOL => 1.0,
                    VarStatus::AtUpper if dj > OPT_TOL => -1.0,
                    VarStatus::AtZero if dj.abs() > OPT_TOL => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    entering = j;
                    enter_dir = dir;
                    break;
                }
                let score = if phase1 { dj.abs() } else { dj * dj / weight[j] };
                if score > best {
                    best = score;
                    entering = j;
                    enter_dir = dir;
                }
            }

            if entering == usize::MAX {
                // Confirm on a fresh factorisation before declaring.
                if verified_rounds < 2 && self.lu.as_ref().unwrap().num_updates() > 0 {
                    verified_rounds += 1;
                    self.lu = None;
                    continue;
                }
                return if phase1 { RunOutcome::Infeasible } else { RunOutcome::Optimal };
            }

            // Entering column through the basis.
            alpha.iter_mut().for_each(|a| *a = 0.0);
            if entering < self.n {
                for p in self.col_start[entering]..self.col_start[entering + 1] {
                    alpha[self.row_idx[p]] += self.vals[p];
                }
            } else {
                alpha[entering - self.n] = 1.0;
            }
            self.lu.as_ref().unwrap().ftran(&mut alpha, &mut self.work);

            // Ratio test. x_B moves by -dir * theta * alpha.
            let flip_dist = self.upper[entering] - self.lower[entering];
            let (theta, leave) = self.ratio_test(&alpha, enter_dir, phase1, bland);
            let (theta, leave) = if flip_dist.is_finite() && flip_dist <= theta {
                (flip_dist, None)
            } else {
                (theta, leave)
            };
            if !theta.is_finite() {
                if phase1 {
                    if self.lu.as_ref().unwrap().num_updates() > 0 {
                        self.lu = None;
                        continue;
                    }
                    return RunOutcome::Numerical;
                }
                return RunOutcome::Unbounded;
            }

            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            if theta != 0.0 {
                let step = enter_dir * theta;
                self.x[entering] += step;
                for p in 0..m {
                    let a = alpha[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= step * a;
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    let st = if enter_dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.status[entering] = st;
                    self.x[entering] = if enter_dir > 0.0 { self.upper[entering] } else { self.lower[entering] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    let pivot = alpha[r];
                    if d_valid && pivot.abs() >= 1e-7 {
                        self.update_duals(r, entering, out, pivot, &mut rho, &mut prow, &mut touched, &mut d, &mut weight);
                    } else {
                        d_valid = false;
                    }
                    self.status[out] = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    if !self.x[out].is_finite() {
                        self.status[out] = VarStatus::AtZero;
                        self.x[out] = 0.0;
                    }
                    self.pos[out] = usize::MAX;
                    self.basis[r] = entering;
                    self.status[entering] = VarStatus::Basic;
                    self.pos[entering] = r;
                    if pivot.abs() < 1e-7 {
                        // Poorly conditioned pivot: rebuild from scratch.
                        self.lu = None;
                    } else {
                        self.lu.as_mut().unwrap().push_update(r, &alpha);
                    }
                }
            }
        }
    }

    /// Updates phase-two reduced costs and Devex weights for the pivot on
    /// basis position `r`, before the basis changes.
    #[allow(clippy::too_many_arguments)]
    fn update_duals(
        &mut self,
        r: usize,
        entering: usize,
        out: usize,
        pivot: f64,
        rho: &mut [f64],
        prow: &mut [f64],
        touched: &mut Vec<usize>,
        d: &mut [f64],
        weight: &mut [f64],
    ) {
        rho.iter_mut().for_each(|v| *v = 0.0);
        rho[r] = 1.0;
        self.lu.as_ref().unwrap().btran(rho, &mut self.work);
        touched.clear();
        for (i, &ri) in rho.iter().enumerate() {
            if ri.abs() <= 1e-13 {
                continue;
            }
            let logical = self.n + i;
            if self.status[logical] != VarStatus::Basic {
                prow[logical] = ri;
                touched.push(logical);
            }
            for p in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_col[p];
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                if prow[j] == 0.0 {
                    touched.push(j);
                }
                prow[j] += ri * self.row_val[p];
                if prow[j] == 0.0 {
                    prow[j] = f64::MIN_POSITIVE;
                }
            }
        }
        let step = d[entering] / pivot;
        let wq = weight[entering];
        let mut reset = false;
        for &j in touched.iter() {
            let a = prow[j];
            prow[j] = 0.0;
            if j == entering {
                continue;
            }
            d[j] -= step * a;
            let ratio = a / pivot;
            let w = (ratio * ratio * wq).max(weight[j]);
            weight[j] = w;
            reset |= w > 1e6;
        }
        d[entering] = 0.0;
        d[out] = -step;
        weight[out] = (wq / (pivot * pivot)).max(1.0);
        if reset {
            weight.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    /// Returns the step length and, unless the entering column flips, the
    /// leaving basis position with the bound it leaves at.
    fn ratio_test(&self, alpha: &[f64], dir: f64, phase1: bool, bland: bool) -> (f64, Option<(usize, bool)>) {
        // For each basic variable: rate of change per unit step and the
        // distance to the bound it runs into.
        let blocking = |p: usize| -> Option<(f64, f64, bool)> {
            let a = alpha[p];
            if a.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.basis[p];
            let rate = -dir * a;
            let xj = self.x[j];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if rate < 0.0 {
                if phase1 && xj > hi + FEAS_TOL {
                    Some((xj - hi, -rate, true))
                } else if phase1 && xj < lo - FEAS_TOL {
                    None
                } else if lo.is_finite() {
                    Some((xj - lo, -rate, false))
                } else {
                    None
                }
            } else if phase1 && xj < lo - FEAS_TOL {
                Some((lo - xj, rate, false))
            } else if phase1 && xj > hi + FEAS_TOL {
                None
            } else if hi.is_finite() {
                Some((hi - xj, rate, true))
            } else {
                None
            }
        };

        if bland {
            let mut best: Option<(f64, usize, usize, bool)> = None;
            for p in 0..self.m {
                if let Some((dist, rate, up)) = blocking(p) {
                    let t = dist.max(0.0) / rate;
                    let j = self.basis[p];
                    let better = match best {
                        None => true,
                        Some((bt, _, bj, _)) => t < bt - 1e-12 || (t <= bt + 1e-12 && j < bj),
                    };
                    if better {
                        best = Some((t, p, j, up));
                    }
                }
            }
            return match best {
                None => (f64::INFINITY, None),
                Some((t, p, _, up)) => (t, Some((p, up))),
            };
        }

        let mut theta_max = f64::INFINITY;
        let mut candidates: Vec<(usize, f64, bool)> = Vec::new();
        for p in 0..self.m {
            if let Some((dist, rate, up)) = blocking(p) {
                let t = (dist.max(0.0) + FEAS_TOL) / rate;
                if t < theta_max {
                    theta_max = t;
                }
                candidates.push((p, dist.max(0.0) / rate, up));
            }
        }
        if !theta_max.is_finite() {
            return (f64::INFINITY, None);
        }
        let mut chosen: Option<(usize, bool, f64, f64)> = None;
        for &(p, t, up) in &candidates {
            if t <= theta_max {
                let a = alpha[p].abs();
                if chosen.map_or(true, |(_, _, ba, _)| a > ba) {
                    chosen = Some((p, up, a, t));
                }
            }
        }
        let (p, up, _, t) = chosen.expect("theta_max finite implies a candidate");
        (t, Some((p, up)))
    }

    /// Primal values of the structural columns.
    pub fn primal(&self) -> &[f64] {
        &self.x[..self.n]
    }


    /// Row duals `y` with `B' y = c_B`, and structural reduced costs.
    pub fn duals(&mut self) -> (Vec<f64>, Vec<f64>) {
        if self.lu.is_none() {
            self.refactor();
        }
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.lu.as_ref().unwrap().btran(&mut y, &mut self.work);
        let d = (0..self.n).map(|j| self.reduced_cost(j, &y, false)).collect();
        (y, d)
    }

    /// Rebuilds the factorisation and basic values from scratch.
    pub fn polish(&mut self) -> bool {
        if !self.refactor() {
            return false;
        }
        self.recompute_xb();
        true
    }

}
