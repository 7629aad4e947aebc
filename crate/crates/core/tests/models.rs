mod common;

use evagg_core::domain::{AggregatorParams, DayRecord, ModelKind};
use evagg_core::models::*;
use evagg_core::CoreError;

const TOL: f64 = 1e-6;

fn whole() -> DispatchOptions {
    DispatchOptions { decompose: false, ..Default::default() }
}

#[test]
fn deterministic_decomposition_matches_the_full_model() {
    let mut rng = common::rng(21);
    for _ in 0..5 {
        let case = common::known_case(&mut rng, 4, 24);
        let e = case.expected();
        let split = solve_deterministic(&case.fleet, &case.horizon, &case.prices, &e, &case.params, &Default::default()).unwrap();
        let full = solve_deterministic(&case.fleet, &case.horizon, &case.prices, &e, &case.params, &whole()).unwrap();
        assert!((split.objective - full.objective).abs() < TOL, "{} vs {}", split.objective, full.objective);
        assert_eq!(split.model_kind, ModelKind::Deterministic);
    }
}

#[test]
fn binding_feeder_limits_every_model() {
    let mut rng = common::rng(8);
    let case = common::known_case(&mut rng, 3, 12);
    let params = AggregatorParams { feeder_cap: 2.0, ..case.params };
    let df = solve_deterministic(&case.fleet, &case.horizon, &case.prices, &case.expected(), &params, &Default::default()).unwrap();
    let sf = solve_stochastic(&case.fleet, &case.horizon, &case.prices, &[case.scenario()], &params).unwrap();
    for p in df.p.iter().chain(&sf.p) {
        assert!(p.abs() <= 2.0 + TOL, "{p}");
    }
}

#[test]
fn stochastic_purchase_covers_every_scenario() {
    let mut rng = common::rng(3);
    let a = common::known_case(&mut rng, 1, 12);
    let mut b = common::known_case(&mut common::rng(4), 1, 12);
    b.fleet = a.fleet.clone();
    let mut sa = a.scenario();
    let mut sb = b.scenario();
    sa.probability = 0.25;
    sb.probability = 0.75;
    let sol = solve_stochastic(&a.fleet, &a.horizon, &a.prices, &[sa, sb], &a.params).unwrap();
    let scen = sol.scenarios.as_ref().unwrap();
    assert_eq!(scen.len(), 2);
    for s in scen {
        for t in 0..12 {
            let net = s.schedule.c[0][t] - s.schedule.d[0][t];
            assert!(net <= sol.p[t] + TOL);
        }
    }
    // The summary schedule is the probability-weighted mean.
    for t in 0..12 {
        let mean = 0.25 * scen[0].schedule.c[0][t] + 0.75 * scen[1].schedule.c[0][t];
        assert!((mean - sol.schedule.c[0][t]).abs() < 1e-9);
    }
}

#[test]
fn robust_decomposition_matches_the_full_model() {
    let mut rng = common::rng(17);
    for _ in 0..4 {
        let case = common::robust_case(&mut rng, 3, 8);
        let inputs = RobustInputs { uncertainty: &case.uncertainty, demand: &case.demand };
        let split = solve_robust(&case.fleet, &case.horizon, &case.prices, inputs, &case.params, &Default::default()).unwrap();
        let full = solve_robust(&case.fleet, &case.horizon, &case.prices, inputs, &case.params, &whole()).unwrap();
        assert_eq!(split.status, "optimal");
        assert!((split.objective - full.objective).abs() < TOL, "{} vs {}", split.objective, full.objective);
        let art = build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &case.params).unwrap();
        assert!(audit_robust(&art, &split, &case.demand).unwrap().passes(TOL));
    }
}

#[test]
fn robust_plan_under_a_binding_feeder_stays_within_it() {
    let mut rng = common::rng(29);
    let case = common::robust_case(&mut rng, 3, 8);
    let params = AggregatorParams { feeder_cap: 0.4 * case.fleet.aggregate_rating(), ..case.params };
    let inputs = RobustInputs { uncertainty: &case.uncertainty, demand: &case.demand };
    let sol = match solve_robust(&case.fleet, &case.horizon, &case.prices, inputs, &params, &Default::default()) {
        Ok(s) => s,
        Err(CoreError::NotSolved { .. }) => return,
        Err(e) => panic!("{e}"),
    };
    assert!(sol.status == "optimal" || sol.status == "feasible", "{}", sol.status);
    assert!(sol.p.iter().all(|p| p.abs() <= params.feeder_cap + TOL));
    let art = build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &params).unwrap();
    assert!(audit_robust(&art, &sol, &case.demand).unwrap().passes(TOL));
    assert!(sol.objective >= solve_milp_bound(&art) - TOL);
}

fn solve_milp_bound(art: &ModelArtifacts) -> f64 {
    let relaxed = evagg_solver::solve_lp(&art.model).unwrap();
    relaxed.objective
}

#[test]
fn robust_model_size_and_tags() {
    let mut rng = common::rng(2);
    let case = common::robust_case(&mut rng, 2, 6);
    let (nv, nt) = (case.fleet.len(), 6);
    let art = build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &case.params).unwrap();
    assert_eq!(art.kind(), Some(ModelKind::Robust));
    assert_eq!(art.row_tags.len(), art.model.num_constraints());
    assert_eq!(art.count_tagged(RowTag::PowerBalance), nt);
    assert_eq!(art.count_tagged(RowTag::EnergyBalance), nv * nt);
    assert_eq!(art.count_tagged(RowTag::DrainingBound), nv);
    assert_eq!(art.count_tagged(RowTag::InteractionOptimality), nv);
    assert_eq!(art.count_tagged(RowTag::ChargeProduct), nv * nt);
    let binaries = art.model.variables().iter().filter(|v| v.integer).count();
    assert_eq!(binaries, nv * nt);
    let covered: usize = art.tag_ranges().iter().map(|(_, r)| r.len()).sum();
    assert_eq!(covered, art.row_tags.len());
}

#[test]
fn certain_robust_plan_equals_the_deterministic_one() {
    let mut rng = common::rng(33);
    let case = common::known_case(&mut rng, 2, 10);
    let inputs_unc = case.certain();
    let demand = case.demand();
    let inputs = RobustInputs { uncertainty: &inputs_unc, demand: &demand };
    let hf = solve_robust(&case.fleet, &case.horizon, &case.prices, inputs, &case.params, &Default::default()).unwrap();
    let df = solve_deterministic(&case.fleet, &case.horizon, &case.prices, &case.expected(), &case.params, &Default::default()).unwrap();
    assert!((hf.objective - df.objective).abs() < TOL, "{} vs {}", hf.objective, df.objective);
}

#[test]
fn perfect_plan_needs_no_recourse() {
    let mut rng = common::rng(41);
    let case = common::known_case(&mut rng, 3, 24);
    let plan = solve_deterministic(&case.fleet, &case.horizon, &case.prices, &case.expected(), &case.params, &Default::default()).unwrap();
    let realized: Vec<DayRecord> =
        case.alpha.iter().zip(&case.tau).map(|(a, c)| DayRecord { avail: a.clone(), cons: c.clone() }).collect();
    let out = evaluate_feasibility(&case.fleet, &case.horizon, &realized, &plan.p, &case.params).unwrap();
    assert!(out.objective.abs() < TOL && out.slack_total < TOL && out.shortfall_total < TOL);
}

#[test]
fn selling_from_an_absent_fleet_is_short() {
    let mut rng = common::rng(42);
    let case = common::known_case(&mut rng, 1, 6);
    let realized = vec![DayRecord { avail: vec![0; 6], cons: vec![0.0; 6] }];
    let committed = vec![0.0, -3.0, 0.0, 0.0, 0.0, 0.0];
    let out = evaluate_feasibility(&case.fleet, &case.horizon, &realized, &committed, &case.params).unwrap();
    assert!((out.shortfall_total - 3.0).abs() < TOL);
    assert!((out.objective - 3.0 * case.params.pen_sale).abs() < 1e-6);
    assert_eq!(out.shortfall.len(), 6);
}

#[test]
fn infeasible_robust_model_names_the_rows_in_conflict() {
    let mut rng = common::rng(12);
    let mut case = common::robust_case(&mut rng, 1, 6);
    // Demand that cannot be met with a tiny feeder.
    case.demand = vec![8.0];
    case.uncertainty[0].a_lo = vec![1, 1, 1, 0, 0, 0];
    case.uncertainty[0].a_hi = vec![1, 1, 1, 0, 0, 0];
    case.uncertainty[0].k_min = 3;
    let params = AggregatorParams { feeder_cap: 0.01, ..case.params };
    let inputs = RobustInputs { uncertainty: &case.uncertainty, demand: &case.demand };
    match solve_robust(&case.fleet, &case.horizon, &case.prices, inputs, &params, &whole()) {
        Err(CoreError::NotSolved { diagnosis: Some(d), .. }) => assert!(d.contains("draining_bound"), "{d}"),
        other => panic!("expected an infeasible model, got {other:?}"),
    }
}

#[test]
fn builders_reject_bad_inputs() {
    let mut rng = common::rng(1);
    let case = common::robust_case(&mut rng, 1, 6);
    let too_much = vec![1e6];
    assert!(build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &too_much, &case.params).is_err());
    let bad = AggregatorParams { pen_balance: 1.0, pen_sale: 2.0, ..case.params };
    assert!(build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &bad).is_err());
}
