mod common;

use evagg_core::domain::{AggregatorParams, EvParams, EvUncertainty, FleetSpec, Horizon};
use evagg_core::models::{build_robust_milp, decode};
use evagg_core::oracles::*;
use evagg_solver::{solve_lp, solve_milp, BnbConfig, LpStatus, MilpStatus};

fn inst(weights: &[f64], k_min: u32, a_lo: &[u8], a_hi: &[u8]) -> LowerLevelInstance {
    LowerLevelInstance { weights: weights.to_vec(), k_min, a_lo: a_lo.to_vec(), a_hi: a_hi.to_vec() }
}

#[test]
fn greedy_takes_negative_hours_then_cheapest() {
    let i = inst(&[3.0, -1.0, 2.0, 0.5, -2.0, 1.0], 4, &[1, 0, 0, 0, 0, 0], &[1, 1, 1, 1, 0, 1]);
    let s = solve_lower_level(&i).unwrap();
    // Hour 4 is forced off despite its weight; hours 3 and 5 fill the count.
    assert_eq!(s.alpha, vec![1, 1, 0, 1, 0, 1]);
    assert_eq!(s.objective, 3.5);
}

#[test]
fn ties_go_to_the_earliest_hour() {
    let i = inst(&[1.0, 1.0, 1.0], 1, &[0, 0, 0], &[1, 1, 1]);
    assert_eq!(solve_lower_level(&i).unwrap().alpha, vec![1, 0, 0]);
    // Enumeration keeps the lexicographically first minimiser instead.
    assert_eq!(exhaustive_lower_level(&i).unwrap().alpha, vec![0, 0, 1]);
}

#[test]
fn interaction_rejects_negative_weights() {
    let i = inst(&[1.0, -0.5], 1, &[0, 0], &[1, 1]);
    assert!(solve_interaction(&i).is_err());
    assert!(solve_draining(&i).is_ok());
}

#[test]
fn count_beyond_upper_bounds_is_invalid() {
    let i = inst(&[0.0; 3], 3, &[0, 0, 0], &[1, 0, 1]);
    assert!(i.validate().is_err());
    assert!(solve_lower_level(&i).is_err());
}

#[test]
fn feasible_profiles_count_matches_binomials() {
    // Three free hours, one forced on, at least three on in total.
    let i = inst(&[0.0; 5], 3, &[1, 0, 0, 0, 0], &[1, 1, 1, 1, 0]);
    let all = feasible_profiles(&i);
    // Choose 2 or 3 of the 3 free hours.
    assert_eq!(all.len(), 3 + 1);
    assert!(all.windows(2).all(|w| w[0] < w[1]));
    assert!(all.iter().all(|a| i.is_feasible(a)));
}

#[test]
fn weights_follow_the_schedule() {
    let ev = EvParams::reference("x");
    let h = Horizon::new(2).unwrap();
    let unc = EvUncertainty { k_min: 1, a_lo: vec![0, 0], a_hi: vec![1, 1] };
    let drain = LowerLevelInstance::draining(&ev, &h, &[2.0, 0.0], &[0.0, 1.9], &unc);
    assert!((drain.weights[0] - 1.9).abs() < 1e-12);
    assert!((drain.weights[1] + 2.0).abs() < 1e-12);
    let contact = LowerLevelInstance::interaction(&ev, &h, &[2.0, -1e-15], &[0.0, 1.9], &unc);
    assert!(contact.weights.iter().all(|&w| w >= 0.0));
    assert!((contact.weights[1] - 2.0).abs() < 1e-12);
}

#[test]
fn relaxation_vertex_is_integral_and_matches_greedy() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let i = common::lower_level(&mut rng, 16);
        let lp = solve_lp(&relaxed_lower_level(&i).unwrap()).unwrap();
        assert_eq!(lp.status, LpStatus::Optimal);
        assert!(lp.x.iter().all(|x| (x - x.round()).abs() < 1e-9), "{:?}", lp.x);
        assert!((lp.objective - solve_lower_level(&i).unwrap().objective).abs() < 1e-9);
    }
}

#[test]
fn enumeration_rejects_large_instances() {
    let fleet = FleetSpec { evs: vec![EvParams::reference("a")] };
    let h = Horizon::new(ENUMERATION_MAX_PERIODS + 1).unwrap();
    let n = h.n_periods;
    let prices = evagg_core::domain::PriceSeries::new(vec![0.1; n]).unwrap();
    let unc = vec![EvUncertainty { k_min: 0, a_lo: vec![0; n], a_hi: vec![1; n] }];
    let r = enumerate_bilevel(&fleet, &h, &prices, &unc, &[0.0], &AggregatorParams::default());
    assert!(r.is_err());
}

#[test]
fn enumeration_agrees_with_the_single_level_model() {
    let mut rng = common::rng(5);
    let mut solved = 0;
    for _ in 0..12 {
        let case = common::robust_case(&mut rng, 2, 4);
        let exact = enumerate_bilevel(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &case.params)
            .unwrap();
        let art =
            build_robust_milp(&case.fleet, &case.horizon, &case.prices, &case.uncertainty, &case.demand, &case.params)
                .unwrap();
        let sol = solve_milp(&art.model, &BnbConfig::default()).unwrap();
        let Some(exact) = exact else {
            assert_eq!(sol.status, MilpStatus::Infeasible);
            continue;
        };
        solved += 1;
        assert!(exact.feasible_profiles >= 1);
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective - exact.objective).abs() <= 1e-6, "{} vs {}", sol.objective, exact.objective);
        let x = sol.x;
        let plan = decode(&art, &x, "optimal", sol.objective).unwrap();
        assert_eq!(plan.p.len(), 4);
    }
    assert!(solved >= 4, "only {solved} feasible cases");
}
