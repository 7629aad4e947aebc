//! Building, solving and decoding in one call, with per-EV decomposition
//! when the feeder cannot bind.

use std::time::Duration;

use evagg_solver::{solve_lp, solve_milp, solve_milp_with_start, BnbConfig, LinearModel, LpStatus, MilpStatus, VarId};

use super::{
    build_deterministic, build_feasibility, build_robust_milp, build_stochastic, decode, decode_feasibility,
    FeasibilityOutcome, ModelArtifacts, RowTag, VarMap,
};
use crate::domain::{AggregatorParams, DayRecord, DispatchSolution, EvUncertainty, FleetSpec, Horizon, PriceSeries};
use crate::error::{CoreError, CoreResult};
use crate::estimation::{ExpectedProfiles, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchOptions {
    pub bnb: BnbConfig,
    /// Solve EV by EV when the feeder limit exceeds the fleet's rating.
    pub decompose: bool,
    /// Budget for the branch-and-bound of a robust model whose feeder
    /// limit binds.
    pub coupled_time_limit: Option<Duration>,
    /// Price-adjustment rounds when per-EV plans overload the feeder.
    pub congestion_rounds: usize,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        DispatchOptions { bnb: BnbConfig::default(), decompose: true, coupled_time_limit: Some(Duration::from_secs(20)), congestion_rounds: 2 }
    }
}

/// Robust-model data that the other formulations do not need.
#[derive(Debug, Clone, Copy)]
pub struct RobustInputs<'a> {
    pub uncertainty: &'a [EvUncertainty],
    pub demand: &'a [f64],
}

fn separable(fleet: &FleetSpec, params: &AggregatorParams, opts: &DispatchOptions) -> bool {
    opts.decompose && fleet.len() > 1 && fleet.aggregate_rating() <= params.feeder_cap
}

fn single(fleet: &FleetSpec, v: usize) -> FleetSpec {
    FleetSpec { evs: vec![fleet.evs[v].clone()] }
}

/// Row tags whose removal alone makes an infeasible model feasible.
pub(crate) fn diagnose(art: &ModelArtifacts) -> Option<String> {
    let mut tags: Vec<RowTag> = art.row_tags.clone();
    tags.sort();
    tags.dedup();
    let mut culprits = Vec::new();
    for tag in tags {
        let mut m = LinearModel::new();
        for v in art.model.variables() {
            m.add_var(v.name.clone(), v.lower, v.upper).ok()?;
        }
        for (i, c) in art.model.constraints().iter().enumerate() {
            if art.row_tags[i] != tag {
                m.add_constraint(c.name.clone(), c.terms.clone(), c.sense, c.rhs).ok()?;
            }
        }
        if solve_lp(&m).map(|s| s.status == LpStatus::Optimal).unwrap_or(false) {
            culprits.push(tag.name());
        }
    }
    if culprits.is_empty() {
        Some("no single constraint family is responsible".into())
    } else {
        Some(format!("conflict involves {}", culprits.join(", ")))
    }
}

fn solve_continuous(art: &ModelArtifacts, label: &str) -> CoreResult<(Vec<f64>, f64)> {
    let sol = solve_lp(&art.model)?;
    if sol.status != LpStatus::Optimal {
        let diagnosis = (sol.status == LpStatus::Infeasible).then(|| diagnose(art)).flatten();
        return Err(CoreError::NotSolved { model: label.into(), status: sol.status.to_string(), diagnosis });
    }
    Ok((sol.x, sol.objective))
}

fn accept_milp(art: &ModelArtifacts, sol: evagg_solver::MilpSolution, label: &str) -> CoreResult<DispatchSolution> {
    match sol.status {
        MilpStatus::Optimal | MilpStatus::GapLimit if sol.has_incumbent() => decode(art, &sol.x, &sol.status.to_string(), sol.objective),
        MilpStatus::Infeasible => Err(CoreError::NotSolved {
            model: label.into(),
            status: sol.status.to_string(),
            diagnosis: diagnose(art),
        }),
        other => Err(CoreError::NotSolved { model: label.into(), status: other.to_string(), diagnosis: None }),
    }
}

/// Column pairs `(full, part)` for EV `v` of the full model and the only
/// EV of a single-EV model.
fn ev_columns(full: &VarMap, v: usize, part: &VarMap) -> Vec<(VarId, VarId)> {
    let mut out = Vec::new();
    let mut rows = |a: &[Vec<VarId>], b: &[Vec<VarId>]| out.extend(a[v].iter().copied().zip(b[0].iter().copied()));
    for (fs, ps) in full.schedules.iter().zip(&part.schedules) {
        rows(&fs.c, &ps.c);
        rows(&fs.d, &ps.d);
        rows(&fs.e, &ps.e);
        rows(&fs.s, &ps.s);
        if let (Some(a), Some(b)) = (&fs.cdeg, &ps.cdeg) {
            rows(a, b);
        }
    }
    if let (Some(f), Some(p)) = (&full.robust, &part.robust) {
        for (a, b) in [
            (&f.tau, &p.tau),
            (&f.alpha, &p.alpha),
            (&f.zc, &p.zc),
            (&f.zd, &p.zd),
            (&f.drain_lo_dual, &p.drain_lo_dual),
            (&f.drain_hi_dual, &p.drain_hi_dual),
            (&f.contact_lo_dual, &p.contact_lo_dual),
            (&f.contact_hi_dual, &p.contact_hi_dual),
        ] {
            rows(a, b);
        }
        out.push((f.drain_count_dual[v], p.drain_count_dual[0]));
        out.push((f.contact_count_dual[v], p.contact_count_dual[0]));
    }
    out
}

/// Point of the full model made of single-EV solutions, one per EV in
/// fleet order. Purchases add up.
fn assemble(full: &ModelArtifacts, parts: &[(ModelArtifacts, Vec<f64>)]) -> CoreResult<Vec<f64>> {
    let n = full.model.num_vars();
    let mut x = vec![0.0; n];
    let mut set = vec![false; n];
    for (v, (art, xv)) in parts.iter().enumerate() {
        for (f, p) in ev_columns(&full.vars, v, &art.vars) {
            x[f.0] = xv[p.0];
            set[f.0] = true;
        }
        for (f, p) in full.vars.p.iter().zip(&art.vars.p) {
            x[f.0] += xv[p.0];
            set[f.0] = true;
        }
    }
    match set.iter().position(|s| !s) {
        Some(j) => Err(CoreError::invariant(
            "assembly",
            format!("column {} has no counterpart in the per-EV models", full.model.variables()[j].name),
        )),
        None => Ok(x),
    }
}

pub fn solve_deterministic(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    expected: &ExpectedProfiles,
    params: &AggregatorParams,
    opts: &DispatchOptions,
) -> CoreResult<DispatchSolution> {
    let art = build_deterministic(fleet, horizon, prices, expected, params)?;
    if separable(fleet, params, opts) {
        let parts = (0..fleet.len())
            .map(|v| {
                let sub = ExpectedProfiles { alpha: vec![expected.alpha[v].clone()], tau: vec![expected.tau[v].clone()] };
                let part = build_deterministic(&single(fleet, v), horizon, prices, &sub, params)?;
                let (x, _) = solve_continuous(&part, "deterministic")?;
                Ok((part, x))
            })
            .collect::<CoreResult<Vec<_>>>()?;
        let x = assemble(&art, &parts)?;
        return decode(&art, &x, "optimal", art.model.objective_value(&x));
    }
    let (x, z) = solve_continuous(&art, "deterministic")?;
    decode(&art, &x, "optimal", z)
}

/// The shared purchase couples all EVs, so this is always one model.
pub fn solve_stochastic(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    scenarios: &[Scenario],
    params: &AggregatorParams,
) -> CoreResult<DispatchSolution> {
    let art = build_stochastic(fleet, horizon, prices, scenarios, params)?;
    let (x, z) = solve_continuous(&art, "stochastic")?;
    decode(&art, &x, "optimal", z)
}

/// Weights tried in turn by `feeder_shares`; the last split is equal, so
/// its shares always sum to the limit.
const SHARE_WEIGHTS: [f64; 3] = [0.9, 0.5, 0.0];
/// Price raise per congestion round, as a fraction of the mean price per
/// feeder limit of excess.
const CONGESTION_STEP: f64 = 0.5;
const MIN_SIGNAL: f64 = 1e-4;

/// Feeder share of every EV and period. Hours with room keep the per-EV
/// purchases `loose` of a relaxed solve; elsewhere a fraction `weight` of
/// the limit goes in proportion to them and the rest in equal parts.
fn feeder_shares(loose: &[Vec<f64>], cap: f64, weight: f64) -> Vec<Vec<f64>> {
    let nv = loose.len() as f64;
    let nt = loose.first().map_or(0, |r| r.len());
    let mut shares = vec![vec![0.0; nt]; loose.len()];
    for t in 0..nt {
        let used: f64 = loose.iter().map(|r| r[t].abs()).sum();
        for (v, r) in loose.iter().enumerate() {
            shares[v][t] = if used <= cap {
                r[t].abs() + (cap - used) / nv
            } else {
                cap * (weight * r[t].abs() / used + (1.0 - weight) / nv)
            };
        }
    }
    shares
}

/// Solves the robust model.
///
/// EVs are solved one at a time against a feeder limit that cannot bind.
/// If their summed purchase respects the real limit the result is optimal.
/// Otherwise each EV is re-solved inside a share of the limit, which gives
/// a feasible plan with status `feasible`. Only when even an equal share
/// is infeasible for some EV does the full model go to branch-and-bound, seeded with the
/// relaxed availability and stopped after `coupled_time_limit`.
pub fn solve_robust(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    inputs: RobustInputs<'_>,
    params: &AggregatorParams,
    opts: &DispatchOptions,
) -> CoreResult<DispatchSolution> {
    let RobustInputs { uncertainty, demand } = inputs;
    let nv = fleet.len();
    let art = build_robust_milp(fleet, horizon, prices, uncertainty, demand, params)?;
    let per_ev = opts.decompose && nv > 1;
    if !per_ev {
        let sol = solve_milp(&art.model, &opts.bnb)?;
        return accept_milp(&art, sol, "robust");
    }
    let loose = AggregatorParams { feeder_cap: params.feeder_cap.max(fleet.aggregate_rating()), ..*params };
    let proven = std::cell::Cell::new(true);
    let solve_part = |v: usize, lambda: &PriceSeries, share: Option<&[f64]>| -> CoreResult<Option<(ModelArtifacts, Vec<f64>)>> {
        let mut part =
            build_robust_milp(&single(fleet, v), horizon, lambda, &uncertainty[v..=v], &demand[v..=v], &loose)?;
        if let Some(share) = share {
            for (&id, &cap) in part.vars.p.iter().zip(share) {
                part.model.set_bounds(id, -cap, cap)?;
            }
        }
        let sol = solve_milp(&part.model, &opts.bnb)?;
        match sol.status {
            MilpStatus::Optimal | MilpStatus::GapLimit if sol.has_incumbent() => {
                proven.set(proven.get() && sol.status == MilpStatus::Optimal);
                Ok(Some((part, sol.x)))
            }
            MilpStatus::Infeasible if share.is_some() => Ok(None),
            _ => accept_milp(&part, sol, "robust").map(|_| None),
        }
    };
    let relaxed = |lambda: &PriceSeries| -> CoreResult<Vec<(ModelArtifacts, Vec<f64>)>> {
        (0..nv)
            .map(|v| solve_part(v, lambda, None)?.ok_or_else(|| CoreError::invariant("robust", "per-EV solve gave no point")))
            .collect()
    };
    let within = |x: &[f64]| art.vars.p.iter().all(|id| x[id.0].abs() <= params.feeder_cap + 1e-9);
    let purchases = |parts: &[(ModelArtifacts, Vec<f64>)]| -> Vec<Vec<f64>> {
        parts.iter().map(|(a, xv)| a.vars.p.iter().map(|id| xv[id.0]).collect()).collect()
    };
    let equal = vec![params.feeder_cap / nv as f64; horizon.n_periods];
    // Plan within feeder shares derived from the per-EV purchases `loose`.
    let shared_plan = |loose: &[Vec<f64>]| -> CoreResult<Option<Vec<f64>>> {
        for weight in SHARE_WEIGHTS {
            let shares = feeder_shares(loose, params.feeder_cap, weight);
            let mut shared = Vec::with_capacity(nv);
            for (v, share) in shares.iter().enumerate() {
                match solve_part(v, prices, Some(share))? {
                    Some(p) => shared.push(p),
                    None => match solve_part(v, prices, Some(&equal))? {
                        Some(p) => shared.push(p),
                        None => return Ok(None),
                    },
                }
            }
            let x = assemble(&art, &shared)?;
            if within(&x) {
                return Ok(Some(x));
            }
        }
        Ok(None)
    };

    let parts = relaxed(prices)?;
    let x = assemble(&art, &parts)?;
    if within(&x) {
        let status = if proven.get() { "optimal" } else { "feasible" };
        return decode(&art, &x, status, art.model.objective_value(&x));
    }

    // Congestion rounds: raise the price of hours that buy beyond the limit
    // (lower it where sales exceed it) and plan again.
    let mut best = shared_plan(&purchases(&parts))?;
    let consider = |cand: Vec<f64>, best: &mut Option<Vec<f64>>| {
        let better = best.as_ref().map_or(true, |b| art.model.objective_value(&cand) < art.model.objective_value(b));
        if better {
            *best = Some(cand);
        }
    };
    let mean = prices.lambda.iter().sum::<f64>() / horizon.n_periods as f64;
    let mut signal = prices.lambda.clone();
    let mut current = purchases(&parts);
    for _ in 0..opts.congestion_rounds {
        for (t, sig) in signal.iter_mut().enumerate() {
            let net: f64 = current.iter().map(|r| r[t]).sum();
            let excess = (net - params.feeder_cap).max(0.0) - (-net - params.feeder_cap).max(0.0);
            *sig = (*sig + CONGESTION_STEP * mean * excess / params.feeder_cap).max(MIN_SIGNAL);
        }
        let adjusted = relaxed(&PriceSeries { lambda: signal.clone() })?;
        let x = assemble(&art, &adjusted)?;
        current = purchases(&adjusted);
        if within(&x) {
            consider(x, &mut best);
        } else if let Some(x) = shared_plan(&current)? {
            consider(x, &mut best);
        }
    }
    if let Some(x) = best {
        return decode(&art, &x, "feasible", art.model.objective_value(&x));
    }

    let rv = art.vars.robust.as_ref().expect("robust columns");
    let mut fixed = art.model.clone();
    for row in &rv.alpha {
        for id in row {
            let a = x[id.0];
            fixed.set_bounds(*id, a, a)?;
        }
    }
    let cfg = BnbConfig { time_limit: opts.coupled_time_limit, ..opts.bnb.clone() };
    let seed = solve_lp(&fixed)?;
    let sol = if seed.status == LpStatus::Optimal {
        solve_milp_with_start(&art.model, &cfg, &seed.x)?
    } else {
        solve_milp(&art.model, &cfg)?
    };
    accept_milp(&art, sol, "robust")
}

/// Realised availability and consumption of one day per EV.
pub fn evaluate_feasibility(
    fleet: &FleetSpec,
    horizon: &Horizon,
    realized: &[DayRecord],
    committed: &[f64],
    params: &AggregatorParams,
) -> CoreResult<FeasibilityOutcome> {
    let alpha: Vec<Vec<u8>> = realized.iter().map(|r| r.avail.clone()).collect();
    let tau: Vec<Vec<f64>> = realized.iter().map(|r| r.cons.clone()).collect();
    let art = build_feasibility(fleet, horizon, &alpha, &tau, committed, params)?;
    let (x, z) = solve_continuous(&art, "feasibility")?;
    decode_feasibility(&art, &x, z)
}
