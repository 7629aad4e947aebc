//! Builders for the dispatch formulations and the ex-post feasibility
//! check, plus decoding of solver output.

mod decode;
mod dispatch;

pub use decode::{audit_robust, decode, decode_feasibility, FeasibilityOutcome, RobustAudit};
pub use dispatch::{
    evaluate_feasibility, solve_deterministic, solve_robust, solve_stochastic, DispatchOptions, RobustInputs,
};

use std::fmt;

use evagg_solver::{ConstraintSense, LinearModel, VarId};

use crate::domain::{AggregatorParams, EvParams, EvUncertainty, FleetSpec, Horizon, ModelKind, PriceSeries};
use crate::error::{CoreError, CoreResult};
use crate::estimation::{ExpectedProfiles, Scenario};

use ConstraintSense::*;

/// Role of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    /// Net purchase equals fleet charging minus discharging.
    PowerBalance,
    /// Fleet net charging in one scenario stays within the purchase.
    ScenarioBalance,
    /// Battery energy carried from one period to the next.
    EnergyBalance,
    /// Degradation cost definition.
    Degradation,
    /// Discharging only while available.
    DischargeAvailability,
    /// Transport energy sums to the expected daily demand.
    TransportTotal,
    /// Transport energy only while away.
    TransportWhileAway,
    /// Worst-case draining energy covers the daily demand.
    DrainingBound,
    /// Dual feasibility of the draining lower level.
    DrainingDual,
    /// Minimum available-hour count.
    AvailableCount,
    /// Dual feasibility of the interaction lower level.
    InteractionDual,
    /// Strong duality of the interaction lower level.
    InteractionOptimality,
    /// `0 <= c - zc`.
    ChargeEnvelopeLow,
    /// `c - zc <= (1 - a) cmax`.
    ChargeEnvelopeHigh,
    /// `zc <= a cmax`.
    ChargeProduct,
    DischargeEnvelopeLow,
    DischargeEnvelopeHigh,
    DischargeProduct,
    /// Realised net charging against the committed purchase or sale.
    CommitmentBalance,
}

impl RowTag {
    pub fn name(&self) -> &'static str {
        match self {
            RowTag::PowerBalance => "power_balance",
            RowTag::ScenarioBalance => "scenario_balance",
            RowTag::EnergyBalance => "energy_balance",
            RowTag::Degradation => "degradation",
            RowTag::DischargeAvailability => "discharge_availability",
            RowTag::TransportTotal => "transport_total",
            RowTag::TransportWhileAway => "transport_while_away",
            RowTag::DrainingBound => "draining_bound",
            RowTag::DrainingDual => "draining_dual",
            RowTag::AvailableCount => "available_count",
            RowTag::InteractionDual => "interaction_dual",
            RowTag::InteractionOptimality => "interaction_optimality",
            RowTag::ChargeEnvelopeLow => "charge_envelope_low",
            RowTag::ChargeEnvelopeHigh => "charge_envelope_high",
            RowTag::ChargeProduct => "charge_product",
            RowTag::DischargeEnvelopeLow => "discharge_envelope_low",
            RowTag::DischargeEnvelopeHigh => "discharge_envelope_high",
            RowTag::DischargeProduct => "discharge_product",
            RowTag::CommitmentBalance => "commitment_balance",
        }
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Dispatch(ModelKind),
    Feasibility,
}

/// Columns of one copy of the fleet schedule, `[ev][period]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleVars {
    pub c: Vec<Vec<VarId>>,
    pub d: Vec<Vec<VarId>>,
    pub e: Vec<Vec<VarId>>,
    pub s: Vec<Vec<VarId>>,
    /// Absent in the feasibility check, which ignores degradation.
    pub cdeg: Option<Vec<Vec<VarId>>>,
}

/// Robust-only columns, `[ev][period]` or `[ev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustVars {
    pub tau: Vec<Vec<VarId>>,
    pub alpha: Vec<Vec<VarId>>,
    pub zc: Vec<Vec<VarId>>,
    pub zd: Vec<Vec<VarId>>,
    pub drain_count_dual: Vec<VarId>,
    pub drain_lo_dual: Vec<Vec<VarId>>,
    pub drain_hi_dual: Vec<Vec<VarId>>,
    pub contact_count_dual: Vec<VarId>,
    pub contact_lo_dual: Vec<Vec<VarId>>,
    pub contact_hi_dual: Vec<Vec<VarId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarMap {
    /// Net purchase per period; empty in the feasibility check, where the
    /// purchase is a parameter.
    pub p: Vec<VarId>,
    /// One schedule copy, or one per scenario.
    pub schedules: Vec<ScheduleVars>,
    pub probabilities: Vec<f64>,
    pub robust: Option<RobustVars>,
    /// Undelivered sale per period, present only where a sale was committed.
    pub shortfall: Vec<Option<VarId>>,
}

#[derive(Debug, Clone)]
pub struct ModelArtifacts {
    pub formulation: Formulation,
    pub model: LinearModel,
    pub vars: VarMap,
    pub row_tags: Vec<RowTag>,
    pub horizon: Horizon,
    pub fleet: FleetSpec,
    pub params: AggregatorParams,
    /// Availability bounds of the robust model, kept for decoding audits.
    pub uncertainty: Option<Vec<EvUncertainty>>,
}

impl ModelArtifacts {
    pub fn rows_tagged(&self, tag: RowTag) -> impl Iterator<Item = usize> + '_ {
        self.row_tags.iter().enumerate().filter(move |(_, &t)| t == tag).map(|(i, _)| i)
    }

    pub fn count_tagged(&self, tag: RowTag) -> usize {
        self.rows_tagged(tag).count()
    }

    /// Contiguous row ranges per tag, in row order.
    pub fn tag_ranges(&self) -> Vec<(RowTag, std::ops::Range<usize>)> {
        let mut out: Vec<(RowTag, std::ops::Range<usize>)> = Vec::new();
        for (i, &tag) in self.row_tags.iter().enumerate() {
            match out.last_mut() {
                Some((t, r)) if *t == tag && r.end == i => r.end = i + 1,
                _ => out.push((tag, i..i + 1)),
            }
        }
        out
    }

    pub fn kind(&self) -> Option<ModelKind> {
        match self.formulation {
            Formulation::Dispatch(k) => Some(k),
            Formulation::Feasibility => None,
        }
    }
}

struct Builder {
    m: LinearModel,
    tags: Vec<RowTag>,
}

impl Builder {
    fn new() -> Self {
        Builder { m: LinearModel::new(), tags: Vec::new() }
    }

    fn var(&mut self, name: String, lo: f64, hi: f64) -> CoreResult<VarId> {
        Ok(self.m.add_var(name, lo, hi)?)
    }

    fn row(&mut self, tag: RowTag, name: String, terms: Vec<(VarId, f64)>, sense: ConstraintSense, rhs: f64) -> CoreResult<()> {
        self.m.add_constraint(name, terms, sense, rhs)?;
        self.tags.push(tag);
        Ok(())
    }
}

fn check_common(fleet: &FleetSpec, horizon: &Horizon, prices: Option<&PriceSeries>, params: &AggregatorParams) -> CoreResult<()> {
    let diags = crate::domain::validate_fleet(fleet, horizon);
    if !diags.is_empty() {
        return Err(CoreError::Validation(diags.join("; ")));
    }
    params.validate()?;
    if let Some(prices) = prices {
        if prices.len() != horizon.n_periods {
            return Err(CoreError::Validation(format!(
                "{} prices for a {}-period horizon",
                prices.len(),
                horizon.n_periods
            )));
        }
        PriceSeries::new(prices.lambda.clone())?;
    }
    Ok(())
}

fn check_grid<T>(what: &str, grid: &[Vec<T>], n_evs: usize, n_periods: usize) -> CoreResult<()> {
    if grid.len() != n_evs || grid.iter().any(|r| r.len() != n_periods) {
        return Err(CoreError::Validation(format!("{what} must be {n_evs} EVs by {n_periods} periods")));
    }
    Ok(())
}

/// Purchase columns with the feeder limit as bounds.
fn add_purchase(b: &mut Builder, horizon: &Horizon, prices: &PriceSeries, params: &AggregatorParams) -> CoreResult<Vec<VarId>> {
    (0..horizon.n_periods)
        .map(|t| {
            let p = b.var(format!("p_{t}"), -params.feeder_cap, params.feeder_cap)?;
            b.m.set_objective(p, horizon.energy(prices.lambda[t]));
            Ok(p)
        })
        .collect()
}

/// Battery energy column bounds; the last period is pinned to the start.
fn energy_bounds(ev: &EvParams, t: usize, n_periods: usize) -> (f64, f64) {
    if t + 1 == n_periods {
        (ev.e_init, ev.e_init)
    } else {
        (ev.e_min, ev.e_max)
    }
}

/// One schedule copy driven by known availability and consumption.
/// `weight` scales the degradation and slack costs; `None` drops the
/// degradation columns and leaves the slack cost at `slack_cost`.
fn add_known_schedule(
    b: &mut Builder,
    fleet: &FleetSpec,
    horizon: &Horizon,
    alpha: &[Vec<f64>],
    tau: &[Vec<f64>],
    prefix: &str,
    degradation_weight: Option<f64>,
    slack_cost: f64,
) -> CoreResult<ScheduleVars> {
    let nt = horizon.n_periods;
    let h = horizon.period_hours;
    let mut out = ScheduleVars { c: Vec::new(), d: Vec::new(), e: Vec::new(), s: Vec::new(), cdeg: degradation_weight.map(|_| Vec::new()) };
    for (v, ev) in fleet.evs.iter().enumerate() {
        let (mut cs, mut ds, mut es, mut ss, mut cds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for t in 0..nt {
            let a = alpha[v][t];
            let c = b.var(format!("{prefix}c_{v}_{t}"), 0.0, ev.c_max)?;
            let d = b.var(format!("{prefix}d_{v}_{t}"), 0.0, ev.d_max * a)?;
            let (elo, ehi) = energy_bounds(ev, t, nt);
            let e = b.var(format!("{prefix}e_{v}_{t}"), elo, ehi)?;
            let s = b.var(format!("{prefix}s_{v}_{t}"), 0.0, f64::INFINITY)?;
            b.m.set_objective(s, slack_cost);
            let mut terms = vec![(e, 1.0), (c, -ev.eta * a * h), (d, h / ev.eta), (s, -1.0)];
            let mut rhs = -tau[v][t];
            match es.last() {
                Some(&prev) => terms.push((prev, -1.0)),
                None => rhs += ev.e_init,
            }
            b.row(RowTag::EnergyBalance, format!("{prefix}energy_{v}_{t}"), terms, Eq, rhs)?;
            if let Some(w) = degradation_weight {
                let cd = b.var(format!("{prefix}cdeg_{v}_{t}"), 0.0, f64::INFINITY)?;
                b.m.set_objective(cd, w);
                let rate = ev.cycle_cost_rate();
                b.row(
                    RowTag::Degradation,
                    format!("{prefix}degradation_{v}_{t}"),
                    vec![(cd, 1.0), (d, -rate * h / ev.eta)],
                    Eq,
                    rate * tau[v][t],
                )?;
                cds.push(cd);
            }
            cs.push(c);
            ds.push(d);
            es.push(e);
            ss.push(s);
        }
        out.c.push(cs);
        out.d.push(ds);
        out.e.push(es);
        out.s.push(ss);
        if let Some(cd) = out.cdeg.as_mut() {
            cd.push(cds);
        }
    }
    Ok(out)
}

/// Deterministic plan on expected availability and consumption.
pub fn build_deterministic(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    expected: &ExpectedProfiles,
    params: &AggregatorParams,
) -> CoreResult<ModelArtifacts> {
    check_common(fleet, horizon, Some(prices), params)?;
    let (nv, nt) = (fleet.len(), horizon.n_periods);
    check_grid("expected availability", &expected.alpha, nv, nt)?;
    check_grid("expected consumption", &expected.tau, nv, nt)?;
    if expected.alpha.iter().flatten().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(CoreError::Validation("expected availability must lie in [0, 1]".into()));
    }
    if expected.tau.iter().flatten().any(|x| !(*x >= 0.0)) {
        return Err(CoreError::Validation("expected consumption must be nonnegative".into()));
    }
    let mut b = Builder::new();
    let p = add_purchase(&mut b, horizon, prices, params)?;
    let sched = add_known_schedule(&mut b, fleet, horizon, &expected.alpha, &expected.tau, "", Some(1.0), params.pen_balance)?;
    for t in 0..nt {
        let mut terms = vec![(p[t], 1.0)];
        for v in 0..nv {
            terms.push((sched.c[v][t], -1.0));
            terms.push((sched.d[v][t], 1.0));
        }
        b.row(RowTag::PowerBalance, format!("power_balance_{t}"), terms, Eq, 0.0)?;
    }
    Ok(ModelArtifacts {
        formulation: Formulation::Dispatch(ModelKind::Deterministic),
        model: b.m,
        vars: VarMap { p, schedules: vec![sched], probabilities: vec![1.0], robust: None, shortfall: Vec::new() },
        row_tags: b.tags,
        horizon: *horizon,
        fleet: fleet.clone(),
        params: *params,
        uncertainty: None,
    })
}

/// Two-stage plan: one purchase for all scenarios, a recourse schedule per
/// scenario.
pub fn build_stochastic(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    scenarios: &[Scenario],
    params: &AggregatorParams,
) -> CoreResult<ModelArtifacts> {
    check_common(fleet, horizon, Some(prices), params)?;
    let (nv, nt) = (fleet.len(), horizon.n_periods);
    if scenarios.is_empty() {
        return Err(CoreError::Validation("no scenarios".into()));
    }
    for (w, sc) in scenarios.iter().enumerate() {
        check_grid(&format!("scenario {w} availability"), &sc.alpha, nv, nt)?;
        check_grid(&format!("scenario {w} consumption"), &sc.tau, nv, nt)?;
        if !(sc.probability > 0.0) {
            return Err(CoreError::Validation(format!("scenario {w} has probability {}", sc.probability)));
        }
    }
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::Validation(format!("scenario probabilities sum to {total}")));
    }
    let mut b = Builder::new();
    let p = add_purchase(&mut b, horizon, prices, params)?;
    let mut schedules = Vec::new();
    for (w, sc) in scenarios.iter().enumerate() {
        let prefix = format!("w{w}_");
        let sched = add_known_schedule(
            &mut b,
            fleet,
            horizon,
            &sc.alpha,
            &sc.tau,
            &prefix,
            Some(sc.probability),
            sc.probability * params.pen_balance,
        )?;
        for t in 0..nt {
            let mut terms = Vec::with_capacity(2 * nv + 1);
            for v in 0..nv {
                terms.push((sched.c[v][t], 1.0));
                terms.push((sched.d[v][t], -1.0));
            }
            terms.push((p[t], -1.0));
            b.row(RowTag::ScenarioBalance, format!("{prefix}scenario_balance_{t}"), terms, Le, 0.0)?;
        }
        schedules.push(sched);
    }
    Ok(ModelArtifacts {
        formulation: Formulation::Dispatch(ModelKind::Stochastic),
        model: b.m,
        vars: VarMap {
            p,
            schedules,
            probabilities: scenarios.iter().map(|s| s.probability).collect(),
            robust: None,
            shortfall: Vec::new(),
        },
        row_tags: b.tags,
        horizon: *horizon,
        fleet: fleet.clone(),
        params: *params,
        uncertainty: None,
    })
}

/// Largest daily transport energy the robust model can place: one full
/// usable battery per hour the EV can be away.
pub fn transport_ceiling(ev: &EvParams, unc: &EvUncertainty) -> f64 {
    let n = unc.a_lo.len() as u32;
    let forced_on: u32 = unc.a_lo.iter().map(|&a| a as u32).sum();
    let away = n - forced_on.max(unc.k_min);
    ev.usable() * away as f64
}

/// Single-level robust model: the draining lower level enters through its
/// dual, the interaction lower level through primal and dual feasibility
/// plus strong duality, and the products of availability with charging and
/// discharging are linearised exactly.
pub fn build_robust_milp(
    fleet: &FleetSpec,
    horizon: &Horizon,
    prices: &PriceSeries,
    uncertainty: &[EvUncertainty],
    demand: &[f64],
    params: &AggregatorParams,
) -> CoreResult<ModelArtifacts> {
    check_common(fleet, horizon, Some(prices), params)?;
    let (nv, nt) = (fleet.len(), horizon.n_periods);
    let h = horizon.period_hours;
    if uncertainty.len() != nv || demand.len() != nv {
        return Err(CoreError::Validation("uncertainty and demand must have one entry per EV".into()));
    }
    for (v, (ev, unc)) in fleet.evs.iter().zip(uncertainty).enumerate() {
        unc.validate(nt).map_err(|e| CoreError::Validation(format!("EV {}: {e}", ev.id)))?;
        let xi = demand[v];
        if !(xi >= 0.0) {
            return Err(CoreError::Validation(format!("EV {}: demand {xi} must be nonnegative", ev.id)));
        }
        let ceiling = transport_ceiling(ev, unc);
        if xi > ceiling + 1e-9 {
            return Err(CoreError::Validation(format!(
                "EV {}: demand {xi} kWh exceeds the {ceiling} kWh that can be placed in away hours",
                ev.id
            )));
        }
    }

    let mut b = Builder::new();
    let p = add_purchase(&mut b, horizon, prices, params)?;
    let mut sched = ScheduleVars { c: Vec::new(), d: Vec::new(), e: Vec::new(), s: Vec::new(), cdeg: Some(Vec::new()) };
    let mut rv = RobustVars {
        tau: Vec::new(),
        alpha: Vec::new(),
        zc: Vec::new(),
        zd: Vec::new(),
        drain_count_dual: Vec::new(),
        drain_lo_dual: Vec::new(),
        drain_hi_dual: Vec::new(),
        contact_count_dual: Vec::new(),
        contact_lo_dual: Vec::new(),
        contact_hi_dual: Vec::new(),
    };
    let inf = f64::INFINITY;
    for (v, ev) in fleet.evs.iter().enumerate() {
        let unc = &uncertainty[v];
        let cap = ev.usable();
        let rate = ev.cycle_cost_rate();
        let k = unc.k_min as f64;
        let col = |b: &mut Builder, name: &str, lo: f64, hi: f64| -> CoreResult<Vec<VarId>> {
            (0..nt).map(|t| b.var(format!("{name}_{v}_{t}"), lo, hi)).collect()
        };
        let c = col(&mut b, "c", 0.0, ev.c_max)?;
        let d = col(&mut b, "d", 0.0, ev.d_max)?;
        let e: Vec<VarId> = (0..nt)
            .map(|t| {
                let (lo, hi) = energy_bounds(ev, t, nt);
                b.var(format!("e_{v}_{t}"), lo, hi)
            })
            .collect::<CoreResult<_>>()?;
        let s = col(&mut b, "s", 0.0, inf)?;
        let cd = col(&mut b, "cdeg", 0.0, inf)?;
        let tau = col(&mut b, "tau", 0.0, inf)?;
        let alpha: Vec<VarId> = (0..nt)
            .map(|t| Ok(b.m.add_integer_var(format!("a_{v}_{t}"), unc.a_lo[t] as f64, unc.a_hi[t] as f64)?))
            .collect::<CoreResult<_>>()?;
        let zc = col(&mut b, "zc", 0.0, inf)?;
        let zd = col(&mut b, "zd", 0.0, inf)?;
        let dz = b.var(format!("dz_{v}"), 0.0, inf)?;
        let dlo = col(&mut b, "dlo", 0.0, inf)?;
        let dhi = col(&mut b, "dhi", -inf, 0.0)?;
        let iz = b.var(format!("iz_{v}"), 0.0, inf)?;
        let ilo = col(&mut b, "ilo", 0.0, inf)?;
        let ihi = col(&mut b, "ihi", -inf, 0.0)?;
        for t in 0..nt {
            b.m.set_objective(s[t], params.pen_balance);
            b.m.set_objective(cd[t], 1.0);
        }

        for t in 0..nt {
            let mut terms = vec![(e[t], 1.0), (zc[t], -ev.eta * h), (d[t], h / ev.eta), (tau[t], 1.0), (s[t], -1.0)];
            let rhs = if t == 0 {
                ev.e_init
            } else {
                terms.push((e[t - 1], -1.0));
                0.0
            };
            b.row(RowTag::EnergyBalance, format!("energy_{v}_{t}"), terms, Eq, rhs)?;
        }
        for t in 0..nt {
            b.row(RowTag::DischargeAvailability, format!("discharge_availability_{v}_{t}"), vec![(d[t], 1.0), (alpha[t], -ev.d_max)], Le, 0.0)?;
        }
        for t in 0..nt {
            b.row(
                RowTag::Degradation,
                format!("degradation_{v}_{t}"),
                vec![(cd[t], 1.0), (d[t], -rate * h / ev.eta), (tau[t], -rate)],
                Eq,
                0.0,
            )?;
        }
        b.row(RowTag::TransportTotal, format!("transport_total_{v}"), tau.iter().map(|&x| (x, 1.0)).collect(), Eq, demand[v])?;
        for t in 0..nt {
            b.row(RowTag::TransportWhileAway, format!("transport_while_away_{v}_{t}"), vec![(tau[t], 1.0), (alpha[t], cap)], Le, cap)?;
        }

        // Draining lower level through its dual.
        let mut terms = Vec::new();
        if k != 0.0 {
            terms.push((dz, k));
        }
        for t in 0..nt {
            if unc.a_lo[t] == 1 {
                terms.push((dlo[t], 1.0));
            }
            if unc.a_hi[t] == 1 {
                terms.push((dhi[t], 1.0));
            }
        }
        b.row(RowTag::DrainingBound, format!("draining_bound_{v}"), terms, Ge, demand[v])?;
        for t in 0..nt {
            b.row(
                RowTag::DrainingDual,
                format!("draining_dual_{v}_{t}"),
                vec![(dz, 1.0), (dlo[t], 1.0), (dhi[t], 1.0), (c[t], -ev.eta * h), (d[t], h / ev.eta)],
                Eq,
                0.0,
            )?;
        }

        // Interaction lower level: primal count, dual rows, strong duality.
        b.row(RowTag::AvailableCount, format!("available_count_{v}"), alpha.iter().map(|&a| (a, 1.0)).collect(), Ge, k)?;
        for t in 0..nt {
            b.row(
                RowTag::InteractionDual,
                format!("interaction_dual_{v}_{t}"),
                vec![(iz, 1.0), (ilo[t], 1.0), (ihi[t], 1.0), (c[t], -ev.eta * h), (d[t], -h / ev.eta)],
                Eq,
                0.0,
            )?;
        }
        let mut terms = Vec::new();
        if k != 0.0 {
            terms.push((iz, k));
        }
        for t in 0..nt {
            if unc.a_lo[t] == 1 {
                terms.push((ilo[t], 1.0));
            }
            if unc.a_hi[t] == 1 {
                terms.push((ihi[t], 1.0));
            }
        }
        for t in 0..nt {
            terms.push((zc[t], -ev.eta * h));
            terms.push((zd[t], -h / ev.eta));
        }
        b.row(RowTag::InteractionOptimality, format!("interaction_optimality_{v}"), terms, Eq, 0.0)?;

        // Exact linearisation of availability times charging/discharging.
        for (x, z, xmax, tags, name) in [
            (&c, &zc, ev.c_max, [RowTag::ChargeEnvelopeLow, RowTag::ChargeEnvelopeHigh, RowTag::ChargeProduct], "charge"),
            (&d, &zd, ev.d_max, [RowTag::DischargeEnvelopeLow, RowTag::DischargeEnvelopeHigh, RowTag::DischargeProduct], "discharge"),
        ] {
            for t in 0..nt {
                b.row(tags[0], format!("{name}_envelope_low_{v}_{t}"), vec![(x[t], 1.0), (z[t], -1.0)], Ge, 0.0)?;
                b.row(tags[1], format!("{name}_envelope_high_{v}_{t}"), vec![(x[t], 1.0), (z[t], -1.0), (alpha[t], xmax)], Le, xmax)?;
                b.row(tags[2], format!("{name}_product_{v}_{t}"), vec![(z[t], 1.0), (alpha[t], -xmax)], Le, 0.0)?;
            }
        }

        sched.c.push(c);
        sched.d.push(d);
        sched.e.push(e);
        sched.s.push(s);
        sched.cdeg.as_mut().unwrap().push(cd);
        rv.tau.push(tau);
        rv.alpha.push(alpha);
        rv.zc.push(zc);
        rv.zd.push(zd);
        rv.drain_count_dual.push(dz);
        rv.drain_lo_dual.push(dlo);
        rv.drain_hi_dual.push(dhi);
        rv.contact_count_dual.push(iz);
        rv.contact_lo_dual.push(ilo);
        rv.contact_hi_dual.push(ihi);
    }
    for t in 0..nt {
        let mut terms = vec![(p[t], 1.0)];
        for v in 0..nv {
            terms.push((sched.c[v][t], -1.0));
            terms.push((sched.d[v][t], 1.0));
        }
        b.row(RowTag::PowerBalance, format!("power_balance_{t}"), terms, Eq, 0.0)?;
    }
    Ok(ModelArtifacts {
        formulation: Formulation::Dispatch(ModelKind::Robust),
        model: b.m,
        vars: VarMap { p, schedules: vec![sched], probabilities: vec![1.0], robust: Some(rv), shortfall: Vec::new() },
        row_tags: b.tags,
        horizon: *horizon,
        fleet: fleet.clone(),
        params: *params,
        uncertainty: Some(uncertainty.to_vec()),
    })
}

/// Ex-post check of a committed purchase against realised availability
/// and consumption: battery slack and undelivered sales, both penalised.
pub fn build_feasibility(
    fleet: &FleetSpec,
    horizon: &Horizon,
    realized_alpha: &[Vec<u8>],
    realized_tau: &[Vec<f64>],
    committed: &[f64],
    params: &AggregatorParams,
) -> CoreResult<ModelArtifacts> {
    check_common(fleet, horizon, None, params)?;
    let (nv, nt) = (fleet.len(), horizon.n_periods);
    check_grid("realised availability", realized_alpha, nv, nt)?;
    check_grid("realised consumption", realized_tau, nv, nt)?;
    if committed.len() != nt {
        return Err(CoreError::Validation(format!("{} committed purchases for {nt} periods", committed.len())));
    }
    if realized_alpha.iter().flatten().any(|&a| a > 1) {
        return Err(CoreError::Validation("realised availability must be 0/1".into()));
    }
    if realized_tau.iter().flatten().any(|x| !(*x >= 0.0)) || committed.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Validation("realised consumption and commitments must be finite and nonnegative".into()));
    }
    let alpha: Vec<Vec<f64>> = realized_alpha.iter().map(|r| r.iter().map(|&a| a as f64).collect()).collect();
    let mut b = Builder::new();
    let sched = add_known_schedule(&mut b, fleet, horizon, &alpha, realized_tau, "", None, params.pen_balance)?;
    let mut shortfall = Vec::with_capacity(nt);
    for (t, &pt) in committed.iter().enumerate() {
        let mut terms = Vec::with_capacity(2 * nv + 1);
        for v in 0..nv {
            terms.push((sched.c[v][t], 1.0));
            terms.push((sched.d[v][t], -1.0));
        }
        let sf = if pt < 0.0 {
            let x = b.var(format!("shortfall_{t}"), 0.0, f64::INFINITY)?;
            b.m.set_objective(x, horizon.energy(params.pen_sale));
            terms.push((x, -1.0));
            Some(x)
        } else {
            None
        };
        b.row(RowTag::CommitmentBalance, format!("commitment_balance_{t}"), terms, Le, pt)?;
        shortfall.push(sf);
    }
    Ok(ModelArtifacts {
        formulation: Formulation::Feasibility,
        model: b.m,
        vars: VarMap { p: Vec::new(), schedules: vec![sched], probabilities: vec![1.0], robust: None, shortfall },
        row_tags: b.tags,
        horizon: *horizon,
        fleet: fleet.clone(),
        params: *params,
        uncertainty: None,
    })
}
