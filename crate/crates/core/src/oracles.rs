//! Exact solvers for the two availability lower levels and a brute-force
//! bilevel enumerator. Both are independent of the duality reformulation
//! and are used to check it.

use evagg_solver::{solve_lp, ConstraintSense, LinearModel, LpStatus, VarId};

use crate::domain::{AggregatorParams, EvParams, EvUncertainty, FleetSpec, Horizon, PriceSeries};
use crate::error::{CoreError, CoreResult};

/// `min Σ w_t a_t  s.t.  Σ a_t >= k_min,  a_lo <= a <= a_hi,  a binary`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerLevelInstance {
    pub weights: Vec<f64>,
    pub k_min: u32,
    pub a_lo: Vec<u8>,
    pub a_hi: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerLevelSolution {
    pub alpha: Vec<u8>,
    pub objective: f64,
}

impl LowerLevelInstance {
    /// Net chemical energy each available hour adds: the worst case for
    /// the battery picks the profile that minimises it.
    pub fn draining(ev: &EvParams, horizon: &Horizon, c: &[f64], d: &[f64], unc: &EvUncertainty) -> Self {
        let weights = c
            .iter()
            .zip(d)
            .map(|(&ci, &di)| ev.eta * horizon.energy(ci) - horizon.energy(di) / ev.eta)
            .collect();
        Self::with_weights(weights, unc)
    }

    /// Energy exchanged with the grid at each available hour. Powers a
    /// hair below zero, as solvers return them, count as zero.
    pub fn interaction(ev: &EvParams, horizon: &Horizon, c: &[f64], d: &[f64], unc: &EvUncertainty) -> Self {
        let weights = c
            .iter()
            .zip(d)
            .map(|(&ci, &di)| ev.eta * horizon.energy(ci.max(0.0)) + horizon.energy(di.max(0.0)) / ev.eta)
            .collect();
        Self::with_weights(weights, unc)
    }

    fn with_weights(weights: Vec<f64>, unc: &EvUncertainty) -> Self {
        LowerLevelInstance { weights, k_min: unc.k_min, a_lo: unc.a_lo.clone(), a_hi: unc.a_hi.clone() }
    }

    pub fn validate(&self) -> CoreResult<()> {
        let n = self.weights.len();
        if self.a_lo.len() != n || self.a_hi.len() != n {
            return Err(CoreError::Validation("lower-level bounds and weights differ in length".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(CoreError::Validation("non-finite lower-level weight".into()));
        }
        if self.a_lo.iter().zip(&self.a_hi).any(|(&l, &h)| l > h || h > 1) {
            return Err(CoreError::Validation("lower-level bounds must satisfy 0 <= a_lo <= a_hi <= 1".into()));
        }
        let cap: u32 = self.a_hi.iter().map(|&a| a as u32).sum();
        if cap < self.k_min {
            return Err(CoreError::Validation(format!(
                "lower level infeasible: only {cap} hours can be available, {} required",
                self.k_min
            )));
        }
        Ok(())
    }

    pub fn objective_of(&self, alpha: &[u8]) -> f64 {
        self.weights.iter().zip(alpha).filter(|(_, &a)| a == 1).map(|(w, _)| w).sum()
    }

    pub fn is_feasible(&self, alpha: &[u8]) -> bool {
        alpha.len() == self.weights.len()
            && alpha.iter().zip(&self.a_lo).zip(&self.a_hi).all(|((&a, &l), &h)| l <= a && a <= h)
            && alpha.iter().map(|&a| a as u32).sum::<u32>() >= self.k_min
    }
}

/// Greedy exact solver: start from the lower bounds, switch on every free
/// hour with a negative weight, then the cheapest remaining free hours
/// until the count is met. Ties go to the earliest hour.
pub fn solve_lower_level(inst: &LowerLevelInstance) -> CoreResult<LowerLevelSolution> {
    inst.validate()?;
    let mut alpha = inst.a_lo.clone();
    let mut rest = Vec::new();
    for t in 0..alpha.len() {
        if inst.a_lo[t] == 0 && inst.a_hi[t] == 1 {
            if inst.weights[t] < 0.0 {
                alpha[t] = 1;
            } else {
                rest.push(t);
            }
        }
    }
    let mut count: u32 = alpha.iter().map(|&a| a as u32).sum();
    rest.sort_by(|&a, &b| inst.weights[a].total_cmp(&inst.weights[b]).then(a.cmp(&b)));
    for t in rest {
        if count >= inst.k_min {
            break;
        }
        alpha[t] = 1;
        count += 1;
    }
    let objective = inst.objective_of(&alpha);
    Ok(LowerLevelSolution { alpha, objective })
}

/// Worst-case draining profile and the net energy it leaves the battery.
pub fn solve_draining(inst: &LowerLevelInstance) -> CoreResult<LowerLevelSolution> {
    solve_lower_level(inst)
}

/// Least-interaction profile. Its weights are never negative, so only the
/// count forces hours on.
pub fn solve_interaction(inst: &LowerLevelInstance) -> CoreResult<LowerLevelSolution> {
    if inst.weights.iter().any(|&w| w < 0.0) {
        return Err(CoreError::Validation("interaction weights must be nonnegative".into()));
    }
    solve_lower_level(inst)
}

/// Every feasible binary profile, in lexicographic order.
pub fn feasible_profiles(inst: &LowerLevelInstance) -> Vec<Vec<u8>> {
    let free: Vec<usize> = (0..inst.weights.len()).filter(|&t| inst.a_lo[t] < inst.a_hi[t]).collect();
    assert!(free.len() <= 24, "too many free hours to enumerate");
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << free.len()) {
        let mut alpha = inst.a_lo.clone();
        for (k, &t) in free.iter().enumerate() {
            // Highest bit for the earliest hour keeps the order lexicographic.
            if mask >> (free.len() - 1 - k) & 1 == 1 {
                alpha[t] = 1;
            }
        }
        if inst.is_feasible(&alpha) {
            out.push(alpha);
        }
    }
    out
}

/// Minimum over all feasible binary profiles. The first minimiser in
/// lexicographic order is returned.
pub fn exhaustive_lower_level(inst: &LowerLevelInstance) -> CoreResult<LowerLevelSolution> {
    inst.validate()?;
    let mut best: Option<LowerLevelSolution> = None;
    for alpha in feasible_profiles(inst) {
        let objective = inst.objective_of(&alpha);
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(LowerLevelSolution { alpha, objective });
        }
    }
    best.ok_or_else(|| CoreError::Validation("no feasible profile".into()))
}

/// Continuous relaxation with the count row and `a_lo <= a <= a_hi` bounds.
pub fn relaxed_lower_level(inst: &LowerLevelInstance) -> CoreResult<LinearModel> {
    inst.validate()?;
    let mut m = LinearModel::new();
    let vars: Vec<VarId> = (0..inst.weights.len())
        .map(|t| m.add_var(format!("a_{t}"), inst.a_lo[t] as f64, inst.a_hi[t] as f64))
        .collect::<Result<_, _>>()?;
    for (&v, &w) in vars.iter().zip(&inst.weights) {
        m.set_objective(v, w);
    }
    m.add_constraint("count", vars.iter().map(|&v| (v, 1.0)).collect(), ConstraintSense::Ge, inst.k_min as f64)?;
    Ok(m)
}

pub const ENUMERATION_MAX_EVS: usize = 2;
pub const ENUMERATION_MAX_PERIODS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelOptimum {
    pub objective: f64,
    pub alpha: Vec<Vec<u8>>,
    pub p: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    /// Number of joint profiles whose upper-level problem was feasible.
    pub feasible_profiles: usize,
}

/// Exact optimum of the robust bilevel problem on a tiny instance.
///
/// Every joint availability profile is fixed in turn. With the profile
/// fixed, both lower-level conditions become finitely many linear rows in
/// the schedule: the worst-case draining energy must reach the daily demand
/// for every feasible profile, and the fixed profile must interact no more
/// than any other feasible profile. The best of these LPs is the bilevel
/// optimum; `None` means no profile admits a feasible schedule.
pub fn enumerate_bilevel(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    uncertainty: &[EvUncertainty],
    demand: &[f64],
    params: &AggregatorParams,
) -> CoreResult<Option<BilevelOptimum>> {
    let nv = fleet.len();
    let nt = horizon.n_periods;
    if nv == 0 || nv > ENUMERATION_MAX_EVS || nt > ENUMERATION_MAX_PERIODS {
        return Err(CoreError::Validation(format!(
            "enumeration limited to {ENUMERATION_MAX_EVS} EVs and {ENUMERATION_MAX_PERIODS} periods, got {nv} and {nt}"
        )));
    }
    if uncertainty.len() != nv || demand.len() != nv || prices.len() != nt {
        return Err(CoreError::Validation("enumeration inputs differ in size".into()));
    }
    let profiles: Vec<Vec<Vec<u8>>> = uncertainty
        .iter()
        .map(|u| {
            u.validate(nt)?;
            let inst = LowerLevelInstance::with_weights(vec![0.0; nt], u);
            Ok(feasible_profiles(&inst))
        })
        .collect::<CoreResult<_>>()?;

    let mut best: Option<BilevelOptimum> = None;
    let mut feasible = 0;
    let mut idx = vec![0usize; nv];
    loop {
        let joint: Vec<&Vec<u8>> = idx.iter().zip(&profiles).map(|(&i, p)| &p[i]).collect();
        let (model, cols) = fixed_profile_model(fleet, horizon, prices, &joint, &profiles, demand, params)?;
        let sol = solve_lp(&model)?;
        match sol.status {
            LpStatus::Optimal => {
                feasible += 1;
                if best.as_ref().map_or(true, |b| sol.objective < b.objective) {
                    let pick = |ids: &Vec<VarId>| ids.iter().map(|v| sol.x[v.0]).collect::<Vec<f64>>();
                    best = Some(BilevelOptimum {
                        objective: sol.objective,
                        alpha: joint.iter().map(|a| a.to_vec()).collect(),
                        p: pick(&cols.p),
                        c: cols.c.iter().map(pick).collect(),
                        d: cols.d.iter().map(pick).collect(),
                        feasible_profiles: 0,
                    });
                }
            }
            LpStatus::Infeasible => {}
            other => {
                return Err(CoreError::NotSolved {
                    model: "enumeration".into(),
                    status: other.to_string(),
                    diagnosis: None,
                })
            }
        }
        // Odometer over the per-EV profile lists.
        let mut v = 0;
        loop {
            if v == nv {
                return Ok(best.map(|b| BilevelOptimum { feasible_profiles: feasible, ..b }));
            }
            idx[v] += 1;
            if idx[v] < profiles[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

struct FixedColumns {
    p: Vec<VarId>,
    c: Vec<Vec<VarId>>,
    d: Vec<Vec<VarId>>,
}

fn fixed_profile_model(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    joint: &[&Vec<u8>],
    profiles: &[Vec<Vec<u8>>],
    demand: &[f64],
    params: &AggregatorParams,
) -> CoreResult<(LinearModel, FixedColumns)> {
    use ConstraintSense::*;
    let nt = horizon.n_periods;
    let h = horizon.period_hours;
    let mut m = LinearModel::new();
    let mut cols = FixedColumns { p: Vec::new(), c: Vec::new(), d: Vec::new() };
    for t in 0..nt {
        let p = m.add_var(format!("p_{t}"), -params.feeder_cap, params.feeder_cap)?;
        m.set_objective(p, prices.lambda[t] * h);
        cols.p.push(p);
    }
    let mut balance: Vec<Vec<(VarId, f64)>> = cols.p.iter().map(|&p| vec![(p, 1.0)]).collect();
    for (v, ev) in fleet.evs.iter().enumerate() {
        let alpha = joint[v];
        let cap = ev.usable();
        let rate = ev.cycle_cost_rate();
        let mut c = Vec::new();
        let mut d = Vec::new();
        let mut tau = Vec::new();
        let mut prev_e: Option<VarId> = None;
        for t in 0..nt {
            let a = alpha[t] as f64;
            let ct = m.add_var(format!("c_{v}_{t}"), 0.0, ev.c_max)?;
            let dt = m.add_var(format!("d_{v}_{t}"), 0.0, ev.d_max * a)?;
            let (elo, ehi) = if t + 1 == nt { (ev.e_init, ev.e_init) } else { (ev.e_min, ev.e_max) };
            let et = m.add_var(format!("e_{v}_{t}"), elo, ehi)?;
            let st = m.add_var(format!("s_{v}_{t}"), 0.0, f64::INFINITY)?;
            let cd = m.add_var(format!("cd_{v}_{t}"), 0.0, f64::INFINITY)?;
            let tt = m.add_var(format!("tau_{v}_{t}"), 0.0, cap * (1.0 - a))?;
            m.set_objective(st, params.pen_balance);
            m.set_objective(cd, 1.0);
            let mut row = vec![(et, 1.0), (ct, -ev.eta * a * h), (dt, h / ev.eta), (tt, 1.0), (st, -1.0)];
            let rhs = match prev_e {
                Some(pe) => {
                    row.push((pe, -1.0));
                    0.0
                }
                None => ev.e_init,
            };
            m.add_constraint(format!("dyn_{v}_{t}"), row, Eq, rhs)?;
            m.add_constraint(
                format!("deg_{v}_{t}"),
                vec![(cd, 1.0), (dt, -rate * h / ev.eta), (tt, -rate)],
                Eq,
                0.0,
            )?;
            balance[t].push((ct, -1.0));
            balance[t].push((dt, 1.0));
            prev_e = Some(et);
            c.push(ct);
            d.push(dt);
            tau.push(tt);
        }
        m.add_constraint(format!("demand_{v}"), tau.iter().map(|&x| (x, 1.0)).collect(), Eq, demand[v])?;
        for (k, q) in profiles[v].iter().enumerate() {
            // Draining energy under profile q covers the demand.
            let mut row = Vec::new();
            for t in 0..nt {
                if q[t] == 1 {
                    row.push((c[t], ev.eta * h));
                    row.push((d[t], -h / ev.eta));
                }
            }
            m.add_constraint(format!("drain_{v}_{k}"), row, Ge, demand[v])?;
            // The fixed profile interacts no more than q does.
            let mut row = Vec::new();
            for t in 0..nt {
                let diff = q[t] as f64 - alpha[t] as f64;
                if diff != 0.0 {
                    row.push((c[t], diff * ev.eta * h));
                    row.push((d[t], diff * h / ev.eta));
                }
            }
            if !row.is_empty() {
                m.add_constraint(format!("respond_{v}_{k}"), row, Ge, 0.0)?;
            }
        }
        cols.c.push(c);
        cols.d.push(d);
    }
    for (t, row) in balance.into_iter().enumerate() {
        m.add_constraint(format!("balance_{t}"), row, Eq, 0.0)?;
    }
    Ok((m, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(weights: &[f64], k: u32) -> LowerLevelInstance {
        let n = weights.len();
        LowerLevelInstance { weights: weights.to_vec(), k_min: k, a_lo: vec![0; n], a_hi: vec![1; n] }
    }

    #[test]
    fn draining_example() {
        let s = solve_draining(&free(&[2.0, -1.0, 3.0], 2)).unwrap();
        assert_eq!(s.alpha, vec![1, 1, 0]);
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn nothing_forced() {
        let inst = LowerLevelInstance { weights: vec![1.0, 2.0, 3.0], k_min: 0, a_lo: vec![0, 1, 0], a_hi: vec![1; 3] };
        let s = solve_draining(&inst).unwrap();
        assert_eq!(s.alpha, vec![0, 1, 0]);
        assert_eq!(s.objective, 2.0);
    }

    #[test]
    fn fixed_profile_ignores_weights() {
        let inst = LowerLevelInstance { weights: vec![-5.0, 5.0, -1.0], k_min: 1, a_lo: vec![0, 1, 1], a_hi: vec![0, 1, 1] };
        assert_eq!(solve_draining(&inst).unwrap().alpha, vec![0, 1, 1]);
    }

    #[test]
    fn interaction_examples() {
        let s = solve_interaction(&free(&[5.0, 1.0, 4.0], 2)).unwrap();
        assert_eq!(s.alpha, vec![0, 1, 1]);
        assert_eq!(s.objective, 5.0);
        let forced = LowerLevelInstance { weights: vec![3.0, 1.0, 2.0], k_min: 2, a_lo: vec![0; 3], a_hi: vec![1, 0, 1] };
        assert_eq!(solve_interaction(&forced).unwrap().alpha, vec![1, 0, 1]);
        let idle = solve_interaction(&free(&[0.0; 4], 2)).unwrap();
        assert_eq!(idle.alpha, vec![1, 1, 0, 0]);
        assert_eq!(idle.objective, 0.0);
    }

    #[test]
    fn infeasible_count_is_rejected() {
        let inst = LowerLevelInstance { weights: vec![1.0; 3], k_min: 3, a_lo: vec![0; 3], a_hi: vec![1, 1, 0] };
        assert!(solve_lower_level(&inst).is_err());
        assert!(exhaustive_lower_level(&inst).is_err());
    }

    #[test]
    fn profiles_are_complete() {
        let inst = free(&[0.0; 4], 2);
        assert_eq!(feasible_profiles(&inst).len(), 11);
    }

    #[test]
    fn enumeration_size_guard() {
        let fleet = FleetSpec { evs: vec![EvParams::reference("a"); 3] };
        let h = Horizon::new(2).unwrap();
        let prices = PriceSeries::new(vec![0.1, 0.1]).unwrap();
        let u = EvUncertainty { k_min: 0, a_lo: vec![1, 1], a_hi: vec![1, 1] };
        let r = enumerate_bilevel(&fleet, &h, &prices, &[u.clone(), u.clone(), u], &[0.0; 3], &AggregatorParams::default());
        assert!(r.is_err());
    }
}
