use evagg_solver::VarId;

use super::{Formulation, ModelArtifacts, RowTag, ScheduleVars};
use crate::domain::{DispatchSolution, EvUncertainty, ModelKind, RobustDetail, Schedule, ScenarioSchedule};
use crate::error::{CoreError, CoreResult};
use crate::oracles::{solve_draining, solve_interaction, LowerLevelInstance};

/// Slack allowed on every decoded identity.
pub const DECODE_TOL: f64 = 1e-6;

fn grid(x: &[f64], ids: &[Vec<VarId>]) -> Vec<Vec<f64>> {
    ids.iter().map(|row| row.iter().map(|v| x[v.0]).collect()).collect()
}

fn schedule(x: &[f64], sv: &ScheduleVars) -> Schedule {
    Schedule {
        c: grid(x, &sv.c),
        d: grid(x, &sv.d),
        e: grid(x, &sv.e),
        s: grid(x, &sv.s),
        cdeg: sv.cdeg.as_ref().map(|cd| grid(x, cd)).unwrap_or_default(),
    }
}

/// Worst row and bound of the model at `x`, reported by tag.
fn check_rows(art: &ModelArtifacts, x: &[f64]) -> CoreResult<()> {
    for (j, v) in art.model.variables().iter().enumerate() {
        let viol = (v.lower - x[j]).max(x[j] - v.upper);
        if viol > DECODE_TOL {
            return Err(CoreError::invariant(
                "bounds",
                format!("{} = {} outside [{}, {}]", v.name, x[j], v.lower, v.upper),
            ));
        }
    }
    for (i, c) in art.model.constraints().iter().enumerate() {
        let viol = c.violation(x);
        if viol > DECODE_TOL {
            return Err(CoreError::invariant(art.row_tags[i].name(), format!("row {} violated by {viol:e}", c.name)));
        }
    }
    Ok(())
}

fn weighted_mean(blocks: &[Vec<Vec<f64>>], weights: &[f64]) -> Vec<Vec<f64>> {
    let mut out = blocks[0].iter().map(|r| vec![0.0; r.len()]).collect::<Vec<_>>();
    for (b, &w) in blocks.iter().zip(weights) {
        for (o, r) in out.iter_mut().zip(b) {
            for (a, &x) in o.iter_mut().zip(r) {
                *a += w * x;
            }
        }
    }
    out
}

/// Reads a dispatch solution out of a solved model and checks it.
pub fn decode(art: &ModelArtifacts, x: &[f64], status: &str, objective: f64) -> CoreResult<DispatchSolution> {
    let Formulation::Dispatch(kind) = art.formulation else {
        return Err(CoreError::Validation("feasibility models decode through decode_feasibility".into()));
    };
    if x.len() != art.model.num_vars() {
        return Err(CoreError::Validation(format!("{} values for {} columns", x.len(), art.model.num_vars())));
    }
    check_rows(art, x)?;
    let nt = art.horizon.n_periods;
    let p: Vec<f64> = art.vars.p.iter().map(|v| x[v.0]).collect();
    for (t, &pt) in p.iter().enumerate() {
        if pt.abs() > art.params.feeder_cap + DECODE_TOL {
            return Err(CoreError::invariant("feeder", format!("p[{t}] = {pt} beyond the feeder limit")));
        }
    }
    let copies: Vec<Schedule> = art.vars.schedules.iter().map(|sv| schedule(x, sv)).collect();
    for sched in &copies {
        for (v, ev) in art.fleet.evs.iter().enumerate() {
            for t in 0..nt {
                let low = sched.c[v][t].min(sched.d[v][t]).min(sched.s[v][t]);
                let low = sched.cdeg.get(v).map_or(low, |r| low.min(r[t]));
                if low < -DECODE_TOL {
                    return Err(CoreError::invariant("bounds", format!("negative schedule value for EV {v} at {t}")));
                }
            }
            let last = sched.e[v][nt - 1];
            if (last - ev.e_init).abs() > DECODE_TOL {
                return Err(CoreError::invariant(RowTag::EnergyBalance.name(), format!("EV {v} ends at {last}, not {}", ev.e_init)));
            }
        }
        for t in 0..nt {
            let net: f64 = (0..art.fleet.len()).map(|v| sched.c[v][t] - sched.d[v][t]).sum();
            let bad = match kind {
                ModelKind::Stochastic => net > p[t] + DECODE_TOL,
                _ => (net - p[t]).abs() > DECODE_TOL,
            };
            if bad {
                let tag = if kind == ModelKind::Stochastic { RowTag::ScenarioBalance } else { RowTag::PowerBalance };
                return Err(CoreError::invariant(tag.name(), format!("fleet net {net} against purchase {} at {t}", p[t])));
            }
        }
    }

    let robust = match &art.vars.robust {
        None => None,
        Some(rv) => {
            let sched = &copies[0];
            let mut alpha = Vec::new();
            for (v, row) in rv.alpha.iter().enumerate() {
                let mut out = Vec::new();
                for (t, id) in row.iter().enumerate() {
                    let a = x[id.0];
                    if (a - a.round()).abs() > DECODE_TOL {
                        return Err(CoreError::invariant("integrality", format!("availability of EV {v} at {t} is {a}")));
                    }
                    out.push(a.round() as u8);
                }
                alpha.push(out);
            }
            let zc = grid(x, &rv.zc);
            let zd = grid(x, &rv.zd);
            for v in 0..alpha.len() {
                for t in 0..nt {
                    let a = alpha[v][t] as f64;
                    if (zc[v][t] - a * sched.c[v][t]).abs() > DECODE_TOL {
                        return Err(CoreError::invariant(RowTag::ChargeProduct.name(), format!("zc differs from a*c for EV {v} at {t}")));
                    }
                    if (zd[v][t] - a * sched.d[v][t]).abs() > DECODE_TOL {
                        return Err(CoreError::invariant(RowTag::DischargeProduct.name(), format!("zd differs from a*d for EV {v} at {t}")));
                    }
                }
            }
            Some(RobustDetail {
                tau: grid(x, &rv.tau),
                alpha,
                zc,
                zd,
                drain_count_dual: rv.drain_count_dual.iter().map(|v| x[v.0]).collect(),
                drain_lo_dual: grid(x, &rv.drain_lo_dual),
                drain_hi_dual: grid(x, &rv.drain_hi_dual),
                contact_count_dual: rv.contact_count_dual.iter().map(|v| x[v.0]).collect(),
                contact_lo_dual: grid(x, &rv.contact_lo_dual),
                contact_hi_dual: grid(x, &rv.contact_hi_dual),
            })
        }
    };

    let (schedule, scenarios) = if copies.len() == 1 {
        (copies.into_iter().next().unwrap(), None)
    } else {
        let w = &art.vars.probabilities;
        let field = |f: fn(&Schedule) -> &Vec<Vec<f64>>| weighted_mean(&copies.iter().map(|s| f(s).clone()).collect::<Vec<_>>(), w);
        let mean = Schedule {
            c: field(|s| &s.c),
            d: field(|s| &s.d),
            e: field(|s| &s.e),
            s: field(|s| &s.s),
            cdeg: field(|s| &s.cdeg),
        };
        let sc = copies
            .into_iter()
            .zip(w)
            .map(|(schedule, &probability)| ScenarioSchedule { probability, schedule })
            .collect();
        (mean, Some(sc))
    };

    Ok(DispatchSolution { model_kind: kind, status: status.to_string(), objective, p, schedule, robust, scenarios })
}

/// Result of the ex-post feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub objective: f64,
    /// Battery slack over all EVs and periods, kWh.
    pub slack_total: f64,
    /// Undelivered sales, kWh.
    pub shortfall_total: f64,
    pub shortfall: Vec<f64>,
    pub schedule: Schedule,
}

pub fn decode_feasibility(art: &ModelArtifacts, x: &[f64], objective: f64) -> CoreResult<FeasibilityOutcome> {
    if art.formulation != Formulation::Feasibility {
        return Err(CoreError::Validation("not a feasibility model".into()));
    }
    check_rows(art, x)?;
    let schedule = schedule(x, &art.vars.schedules[0]);
    let shortfall: Vec<f64> = art.vars.shortfall.iter().map(|v| v.map_or(0.0, |v| x[v.0])).collect();
    let slack_total = schedule.s.iter().flatten().sum();
    let shortfall_total = shortfall.iter().map(|&p| art.horizon.energy(p)).sum();
    Ok(FeasibilityOutcome { objective, slack_total, shortfall_total, shortfall, schedule })
}

/// Independent re-check of a robust plan against the exact lower-level
/// solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustAudit {
    /// Smallest worst-case draining energy minus the daily demand, kWh.
    pub drain_margin: f64,
    /// Largest gap between the interaction optimum and the dual objective
    /// carried by the plan.
    pub strong_duality_residual: f64,
    /// Largest gap between the plan's interaction and the optimum.
    pub response_gap: f64,
    pub linearization_residual: f64,
    /// Largest `min(c, d)` at any EV and period, kW.
    pub simultaneous: f64,
}

impl RobustAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.drain_margin >= -tol
            && self.strong_duality_residual <= tol
            && self.response_gap <= tol
            && self.linearization_residual <= tol
            && self.simultaneous <= tol
    }
}

pub fn audit_robust(
    art: &ModelArtifacts,
    sol: &DispatchSolution,
    demand: &[f64],
) -> CoreResult<RobustAudit> {
    let unc: &[EvUncertainty] = art
        .uncertainty
        .as_deref()
        .ok_or_else(|| CoreError::Validation("audit needs a robust model".into()))?;
    let detail = sol.robust.as_ref().ok_or_else(|| CoreError::Validation("audit needs a robust solution".into()))?;
    let h = &art.horizon;
    let mut audit = RobustAudit {
        drain_margin: f64::INFINITY,
        strong_duality_residual: 0.0,
        response_gap: 0.0,
        linearization_residual: 0.0,
        simultaneous: 0.0,
    };
    for (v, ev) in art.fleet.evs.iter().enumerate() {
        let c = &sol.schedule.c[v];
        let d = &sol.schedule.d[v];
        let drain = solve_draining(&LowerLevelInstance::draining(ev, h, c, d, &unc[v]))?;
        audit.drain_margin = audit.drain_margin.min(drain.objective - demand[v]);
        let inst = LowerLevelInstance::interaction(ev, h, c, d, &unc[v]);
        let best = solve_interaction(&inst)?;
        let dual = unc[v].k_min as f64 * detail.contact_count_dual[v]
            + (0..h.n_periods)
                .map(|t| unc[v].a_lo[t] as f64 * detail.contact_lo_dual[v][t] + unc[v].a_hi[t] as f64 * detail.contact_hi_dual[v][t])
                .sum::<f64>();
        audit.strong_duality_residual = audit.strong_duality_residual.max((best.objective - dual).abs());
        audit.response_gap = audit.response_gap.max(inst.objective_of(&detail.alpha[v]) - best.objective);
        for t in 0..h.n_periods {
            let a = detail.alpha[v][t] as f64;
            audit.linearization_residual = audit
                .linearization_residual
                .max((detail.zc[v][t] - a * c[t]).abs())
                .max((detail.zd[v][t] - a * d[t]).abs());
            audit.simultaneous = audit.simultaneous.max(c[t].min(d[t]));
        }
    }
    if art.fleet.is_empty() {
        audit.drain_margin = 0.0;
    }
    Ok(audit)
}
