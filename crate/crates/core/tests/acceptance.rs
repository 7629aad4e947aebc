//! Acceptance report: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the report is always printed. Failing lines make the
//! exit status 1 only with `ACCEPTANCE_STRICT=1`, so a red line does not
//! stop `cargo test` before the remaining targets run.

mod common;

use std::time::{Duration, Instant};

use evagg_core::domain::{EvParams, FleetSpec, Horizon, MetricsReport, ModelKind};
use evagg_core::estimation::ExpectedProfiles;
use evagg_core::harness::{run_campaign, synthetic_campaign_data, write_outputs, CampaignConfig, CampaignReport};
use evagg_core::models::{
    audit_robust, build_deterministic, build_feasibility, build_robust_milp, build_stochastic, decode, decode_feasibility,
    RobustAudit,
};
use evagg_core::oracles::{enumerate_bilevel, exhaustive_lower_level, relaxed_lower_level, solve_lower_level};
use evagg_solver::{
    check_duality, parse_lp_str, solve_lp, solve_milp, write_lp_string, BnbConfig, ConstraintSense, LinearModel, LpSolution,
    LpStatus, MilpStatus, COMPLEMENTARITY_TOL, DUALITY_GAP_TOL, DUAL_TOL, PRIMAL_TOL,
};
use rand::Rng;

const AUDIT_TOL: f64 = 1e-6;
const OBJECTIVE_TOL: f64 = 1e-6;
const EXACT_TOL: f64 = 1e-9;
const CAMPAIGN_SEED: u64 = 2024;
const CAMPAIGN_EVS: usize = 100;
const CAMPAIGN_DAYS: usize = 28;

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn line(id: u32, pass: bool, detail: impl Into<String>) -> Line {
    Line { id, pass, detail: detail.into() }
}

/// Duality certificates of every optimal LP met along the way.
#[derive(Default)]
struct Certificates {
    checked: usize,
    failed: usize,
    worst_primal: f64,
    worst_dual: f64,
    worst_comp: f64,
    worst_gap: f64,
}

impl Certificates {
    fn record(&mut self, model: &LinearModel, sol: &LpSolution) {
        if sol.status != LpStatus::Optimal {
            return;
        }
        let r = check_duality(model, sol).expect("optimal solutions carry duals");
        self.checked += 1;
        let rel_gap = r.gap() / r.primal_objective.abs().max(1.0);
        self.worst_primal = self.worst_primal.max(r.max_primal_residual);
        self.worst_dual = self.worst_dual.max(r.max_dual_residual);
        self.worst_comp = self.worst_comp.max(r.max_complementarity);
        self.worst_gap = self.worst_gap.max(rel_gap);
        if !(r.max_primal_residual <= 1e-7 && r.max_dual_residual <= 1e-7 && r.max_complementarity <= 1e-6 && rel_gap <= 1e-6) {
            self.failed += 1;
        }
    }

    fn solve(&mut self, model: &LinearModel) -> LpSolution {
        let sol = solve_lp(model).expect("valid model");
        self.record(model, &sol);
        sol
    }
}

/// Robust-plan audits collected from every suite.
#[derive(Default)]
struct Audits {
    count: usize,
    failed: Vec<String>,
    worst: Option<RobustAudit>,
}

impl Audits {
    fn record(&mut self, label: String, a: RobustAudit) {
        self.count += 1;
        if !a.passes(AUDIT_TOL) {
            self.failed.push(format!("{label}: {a:?}"));
        }
        let w = self.worst.get_or_insert(a);
        w.drain_margin = w.drain_margin.min(a.drain_margin);
        w.strong_duality_residual = w.strong_duality_residual.max(a.strong_duality_residual);
        w.response_gap = w.response_gap.max(a.response_gap);
        w.linearization_residual = w.linearization_residual.max(a.linearization_residual);
        w.simultaneous = w.simultaneous.max(a.simultaneous);
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn criterion_1(certs: &mut Certificates) -> Line {
    let start = Instant::now();
    let mut rng = common::rng(1);
    let (mut fractional, mut mismatched) = (0, 0);
    for _ in 0..1000 {
        let inst = common::lower_level(&mut rng, 24);
        let greedy = solve_lower_level(&inst).unwrap();
        let model = relaxed_lower_level(&inst).unwrap();
        let sol = certs.solve(&model);
        assert_eq!(sol.status, LpStatus::Optimal);
        if sol.x.iter().any(|x| (x - x.round()).abs() > EXACT_TOL) {
            fractional += 1;
            continue;
        }
        let alpha: Vec<u8> = sol.x.iter().map(|x| x.round() as u8).collect();
        if inst.objective_of(&alpha) != greedy.objective || (sol.objective - greedy.objective).abs() > EXACT_TOL {
            mismatched += 1;
        }
    }
    let t = start.elapsed();
    line(
        1,
        fractional == 0 && mismatched == 0 && within(t, 30),
        format!(
            "1000 instances T=24: {fractional} fractional, {mismatched} objective mismatches (exact, LP within {EXACT_TOL:e}); {:.1}s < 30s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Line {
    let start = Instant::now();
    let mut rng = common::rng(2);
    let (mut cases, mut mismatched) = (0, 0);
    for n in 1..=12 {
        for _ in 0..40 {
            let inst = common::lower_level(&mut rng, n);
            let greedy = solve_lower_level(&inst).unwrap();
            let brute = exhaustive_lower_level(&inst).unwrap();
            cases += 1;
            if greedy.objective != brute.objective {
                mismatched += 1;
            }
        }
    }
    let t = start.elapsed();
    line(
        2,
        mismatched == 0 && within(t, 60),
        format!("{cases} instances T=1..12: {mismatched} mismatches against 2^T enumeration (exact); {:.1}s < 60s", t.as_secs_f64()),
    )
}

fn criterion_3(audits: &mut Audits) -> Line {
    let start = Instant::now();
    let mut rng = common::rng(3);
    let (mut both_feasible, mut both_infeasible, mut worst, mut disagree) = (0, 0, 0.0f64, Vec::new());
    for case in 0..50 {
        let n = rng.gen_range(3..=6);
        let c = common::robust_case(&mut rng, 2, n);
        let art = build_robust_milp(&c.fleet, &c.horizon, &c.prices, &c.uncertainty, &c.demand, &c.params).unwrap();
        let milp = solve_milp(&art.model, &BnbConfig::default()).unwrap();
        let brute = enumerate_bilevel(&c.fleet, &c.horizon, &c.prices, &c.uncertainty, &c.demand, &c.params).unwrap();
        match (milp.status, brute) {
            (MilpStatus::Optimal, Some(b)) => {
                both_feasible += 1;
                let diff = (milp.objective - b.objective).abs();
                worst = worst.max(diff);
                if diff > OBJECTIVE_TOL {
                    disagree.push(format!("case {case}: milp {} enumeration {}", milp.objective, b.objective));
                }
                let sol = decode(&art, &milp.x, "optimal", milp.objective).unwrap();
                audits.record(format!("bilevel case {case}"), audit_robust(&art, &sol, &c.demand).unwrap());
            }
            (MilpStatus::Infeasible, None) => both_infeasible += 1,
            (s, b) => disagree.push(format!("case {case}: milp {s}, enumeration {}", if b.is_some() { "feasible" } else { "infeasible" })),
        }
    }
    let t = start.elapsed();
    line(
        3,
        disagree.is_empty() && both_feasible > 0 && within(t, 300),
        format!(
            "50 fleets (<=2 EVs, T<=6): {both_feasible} solved, {both_infeasible} infeasible in both, worst gap {worst:.1e} <= {OBJECTIVE_TOL:e}; {:.1}s < 300s{}",
            t.as_secs_f64(),
            if disagree.is_empty() { String::new() } else { format!("; disagreements: {}", disagree.join("; ")) }
        ),
    )
}

fn criterion_4(certs: &mut Certificates, audits: &mut Audits) -> Line {
    let start = Instant::now();
    let mut rng = common::rng(4);
    let (mut worst_r, mut worst_s, mut bad) = (0.0f64, 0.0f64, Vec::new());
    for case in 0..50 {
        let c = common::known_case(&mut rng, 3, 6);
        let df = build_deterministic(&c.fleet, &c.horizon, &c.prices, &c.expected(), &c.params).unwrap();
        let df_sol = certs.solve(&df.model);
        let sf = build_stochastic(&c.fleet, &c.horizon, &c.prices, &[c.scenario()], &c.params).unwrap();
        let sf_sol = certs.solve(&sf.model);
        let (unc, demand) = (c.certain(), c.demand());
        let hf = build_robust_milp(&c.fleet, &c.horizon, &c.prices, &unc, &demand, &c.params).unwrap();
        let hf_sol = solve_milp(&hf.model, &BnbConfig::default()).unwrap();
        if df_sol.status != LpStatus::Optimal || sf_sol.status != LpStatus::Optimal || hf_sol.status != MilpStatus::Optimal {
            bad.push(format!("case {case}: statuses {} {} {}", df_sol.status, sf_sol.status, hf_sol.status));
            continue;
        }
        let dr = (hf_sol.objective - df_sol.objective).abs();
        let ds = (sf_sol.objective - df_sol.objective).abs();
        worst_r = worst_r.max(dr);
        worst_s = worst_s.max(ds);
        if dr > OBJECTIVE_TOL || ds > OBJECTIVE_TOL {
            bad.push(format!(
                "case {case}: DF {} SF {} HF {}",
                df_sol.objective, sf_sol.objective, hf_sol.objective
            ));
        }
        let sol = decode(&hf, &hf_sol.x, "optimal", hf_sol.objective).unwrap();
        audits.record(format!("collapse case {case}"), audit_robust(&hf, &sol, &demand).unwrap());
    }
    let t = start.elapsed();
    line(
        4,
        bad.is_empty() && within(t, 120),
        format!(
            "50 fleets: worst |HF-DF| {worst_r:.1e}, worst |SF-DF| {worst_s:.1e} (<= {OBJECTIVE_TOL:e}); {:.1}s < 120s{}",
            t.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!("; failures: {}", bad.join("; ")) }
        ),
    )
}

fn criterion_5(audits: &Audits) -> Line {
    let w = audits.worst.unwrap_or(RobustAudit {
        drain_margin: 0.0,
        strong_duality_residual: 0.0,
        response_gap: 0.0,
        linearization_residual: 0.0,
        simultaneous: 0.0,
    });
    line(
        5,
        audits.failed.is_empty() && audits.count > 0,
        format!(
            "{} robust plans audited (tol {AUDIT_TOL:e}): min drain margin {:.2e} kWh, strong duality {:.1e}, response gap {:.1e}, linearization {:.1e}, simultaneous {:.1e} kW{}",
            audits.count,
            w.drain_margin,
            w.strong_duality_residual,
            w.response_gap,
            w.linearization_residual,
            w.simultaneous,
            if audits.failed.is_empty() { String::new() } else { format!("; failed: {}", audits.failed.join("; ")) }
        ),
    )
}

fn criterion_6(certs: &Certificates) -> Line {
    assert_eq!((PRIMAL_TOL, DUAL_TOL, COMPLEMENTARITY_TOL, DUALITY_GAP_TOL), (1e-7, 1e-7, 1e-6, 1e-6));
    line(
        6,
        certs.failed == 0 && certs.checked > 0,
        format!(
            "{} optimal LPs certified, {} failed; worst primal {:.1e}, dual {:.1e}, complementarity {:.1e}, relative gap {:.1e} (bounds 1e-7/1e-7/1e-6/1e-6)",
            certs.checked, certs.failed, certs.worst_primal, certs.worst_dual, certs.worst_comp, certs.worst_gap
        ),
    )
}

fn criterion_7(certs: &mut Certificates) -> Line {
    let horizon = Horizon::default();
    let n = horizon.n_periods;
    let ev = EvParams::reference("ev0");
    let fleet = FleetSpec { evs: vec![ev.clone()] };
    let params = Default::default();
    let mut checks = Vec::new();

    // Perfect foresight: the commitment comes from planning on the very
    // day that is then realised.
    let mut avail = vec![1u8; n];
    let mut cons = vec![0.0; n];
    for t in 8..11 {
        avail[t] = 0;
        cons[t] = 3.0;
    }
    let expected = ExpectedProfiles {
        alpha: vec![avail.iter().map(|&a| a as f64).collect()],
        tau: vec![cons.clone()],
    };
    let prices = common::prices(&mut common::rng(7), n);
    let plan = build_deterministic(&fleet, &horizon, &prices, &expected, &params).unwrap();
    let plan_sol = certs.solve(&plan.model);
    let committed: Vec<f64> = plan.vars.p.iter().map(|v| plan_sol.x[v.0]).collect();
    checks.push(("perfect foresight", feasibility_objective(certs, &fleet, &horizon, &[avail], &[cons], &committed), 0.0));

    // Away all day using 10 kWh: only slack can balance the battery.
    let away = vec![0u8; n];
    let mut used = vec![0.0; n];
    used[12] = 10.0;
    let zero = vec![0.0; n];
    checks.push((
        "forced slack 10 kWh",
        feasibility_objective(certs, &fleet, &horizon, &[away.clone()], &[used], &zero),
        10.0 * params_pen_balance(),
    ));

    // A 5 kW sale the absent fleet cannot deliver.
    let mut sale = vec![0.0; n];
    sale[18] = -5.0;
    checks.push((
        "forced shortfall 5 kW",
        feasibility_objective(certs, &fleet, &horizon, &[away], &[vec![0.0; n]], &sale),
        5.0 * horizon.period_hours * params_pen_sale(),
    ));

    let pass = checks.iter().all(|(_, got, want)| (got - want).abs() <= EXACT_TOL * want.abs().max(1.0));
    let detail = checks.iter().map(|(name, got, want)| format!("{name}: {got} (hand {want})")).collect::<Vec<_>>().join("; ");
    line(7, pass, format!("{detail}; tolerance {EXACT_TOL:e} relative"))
}

fn params_pen_balance() -> f64 {
    evagg_core::domain::AggregatorParams::default().pen_balance
}

fn params_pen_sale() -> f64 {
    evagg_core::domain::AggregatorParams::default().pen_sale
}

fn feasibility_objective(
    certs: &mut Certificates,
    fleet: &FleetSpec,
    horizon: &Horizon,
    alpha: &[Vec<u8>],
    tau: &[Vec<f64>],
    committed: &[f64],
) -> f64 {
    let art = build_feasibility(fleet, horizon, alpha, tau, committed, &Default::default()).unwrap();
    let sol = certs.solve(&art.model);
    assert_eq!(sol.status, LpStatus::Optimal);
    decode_feasibility(&art, &sol.x, sol.objective).unwrap().objective
}

fn criterion_8(reports: &[&MetricsReport]) -> Line {
    let table = MetricsReport::from_parts(5875.2, 1686.0, 5278.8);
    let fixed = (table.tc_da - 2282.4).abs();
    let worst = reports.iter().map(|r| r.identity_residual()).fold(0.0, f64::max);
    line(
        8,
        fixed <= OBJECTIVE_TOL && worst <= OBJECTIVE_TOL && !reports.is_empty(),
        format!(
            "5875.2 + 1686.0 - 5278.8 = {:.1} (residual {fixed:.1e}); {} campaign reports, worst identity residual {worst:.1e} EUR (<= {OBJECTIVE_TOL:e})",
            table.tc_da,
            reports.len()
        ),
    )
}

struct CampaignRuns {
    base: CampaignReport,
    fewer_hours: CampaignReport,
    reduced_feeder: CampaignReport,
    /// The DF/SF/HF campaign alone.
    elapsed: Duration,
    /// The two HF sensitivity campaigns.
    sensitivity: Duration,
}

fn run_campaigns() -> CampaignRuns {
    let start = Instant::now();
    let history = evagg_core::estimation::DEFAULT_WINDOW * evagg_core::estimation::DAYS_PER_WEEK;
    let n_days = history + CAMPAIGN_DAYS;
    let data = synthetic_campaign_data(CAMPAIGN_EVS, n_days, CAMPAIGN_SEED).unwrap();
    let first = n_days - CAMPAIGN_DAYS;
    use ModelKind::*;
    let base = run_campaign(&CampaignConfig::new(first, CAMPAIGN_DAYS, vec![Deterministic, Stochastic, Robust]), &data).unwrap();
    let elapsed = start.elapsed();
    let start = Instant::now();
    let mut cfg = CampaignConfig::new(first, CAMPAIGN_DAYS, vec![Robust]);
    cfg.k_offset = -5;
    let fewer_hours = run_campaign(&cfg, &data).unwrap();
    let mut cfg = CampaignConfig::new(first, CAMPAIGN_DAYS, vec![Robust]);
    cfg.feeder_reduction = 0.75;
    let reduced_feeder = run_campaign(&cfg, &data).unwrap();
    let sensitivity = start.elapsed();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    for (name, r) in [("base", &base), ("k_minus_5", &fewer_hours), ("feeder_25pct", &reduced_feeder)] {
        write_outputs(r, &dir.join(name), "").unwrap();
    }
    CampaignRuns { base, fewer_hours, reduced_feeder, elapsed, sensitivity }
}

fn criterion_9(runs: &CampaignRuns) -> Line {
    let get = |r: &CampaignReport, k| *r.total(k).expect("model in campaign");
    let (df, sf, hf) = (
        get(&runs.base, ModelKind::Deterministic),
        get(&runs.base, ModelKind::Stochastic),
        get(&runs.base, ModelKind::Robust),
    );
    let k5 = get(&runs.fewer_hours, ModelKind::Robust);
    let fr = get(&runs.reduced_feeder, ModelKind::Robust);
    let a = within(runs.elapsed, 30 * 60);
    let b_slack = hf.s_fp < sf.s_fp && sf.s_fp < df.s_fp;
    let b_cost = hf.tc_da > sf.tc_da && sf.tc_da > df.tc_da;
    let c = k5.c_da > hf.c_da && k5.s_fp < hf.s_fp;
    let d = fr.e_bought < hf.e_bought && fr.e_sold < hf.e_sold && fr.r_da < hf.r_da;
    let flag = |ok: bool| if ok { "pass" } else { "FAIL" };
    line(
        9,
        a && b_slack && b_cost && c && d,
        format!(
            "{CAMPAIGN_EVS} EVs x {CAMPAIGN_DAYS} days, seed {CAMPAIGN_SEED}. \
             (a) {} DF+SF+HF campaign {:.0}s < 1800s (K-5 and feeder runs another {:.0}s); \
             (b) {} s_FP HF {:.3} < SF {:.3} < DF {:.3} MWh, {} TC HF {:.2} > SF {:.2} > DF {:.2} EUR; \
             (c) {} K-5: C_DA {:.2} > {:.2} EUR, s_FP {:.3} < {:.3} MWh; \
             (d) {} feeder -75%: E_B {:.3} < {:.3}, E_S {:.3} < {:.3} MWh, R_DA {:.2} < {:.2} EUR",
            flag(a),
            runs.elapsed.as_secs_f64(),
            runs.sensitivity.as_secs_f64(),
            flag(b_slack),
            hf.s_fp,
            sf.s_fp,
            df.s_fp,
            flag(b_cost),
            hf.tc_da,
            sf.tc_da,
            df.tc_da,
            flag(c),
            k5.c_da,
            hf.c_da,
            k5.s_fp,
            hf.s_fp,
            flag(d),
            fr.e_bought,
            hf.e_bought,
            fr.e_sold,
            hf.e_sold,
            fr.r_da,
            hf.r_da,
        ),
    )
}

/// Random knapsack-style model over eight binaries.
fn random_binary_model(rng: &mut impl Rng) -> LinearModel {
    let mut m = LinearModel::new();
    let xs: Vec<_> = (0..8).map(|i| m.add_binary(format!("x{i}")).unwrap()).collect();
    for &x in &xs {
        m.set_objective(x, rng.gen_range(-10i32..=10) as f64);
    }
    for r in 0..rng.gen_range(1..=3) {
        let terms = xs.iter().map(|&x| (x, rng.gen_range(0i32..=9) as f64)).collect();
        m.add_constraint(format!("cap{r}"), terms, ConstraintSense::Le, rng.gen_range(5i32..=25) as f64).unwrap();
    }
    if rng.gen_bool(0.5) {
        let terms = xs.iter().map(|&x| (x, 1.0)).collect();
        m.add_constraint("pick", terms, ConstraintSense::Ge, rng.gen_range(1i32..=3) as f64).unwrap();
    }
    m
}

fn enumerate_binaries(m: &LinearModel) -> Option<f64> {
    let n = m.num_vars();
    (0u32..1 << n)
        .filter_map(|mask| {
            let x: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
            (m.max_violation(&x) <= 1e-9).then(|| m.objective_value(&x))
        })
        .min_by(f64::total_cmp)
}

fn criterion_10() -> Line {
    let mut rng = common::rng(10);
    let (mut feasible, mut bad) = (0, Vec::new());
    for case in 0..200 {
        let m = random_binary_model(&mut rng);
        let sol = solve_milp(&m, &BnbConfig::default()).unwrap();
        match (enumerate_binaries(&m), sol.status) {
            (Some(best), MilpStatus::Optimal) => {
                feasible += 1;
                if (best - sol.objective).abs() > OBJECTIVE_TOL {
                    bad.push(format!("case {case}: {} vs {best}", sol.objective));
                }
            }
            (None, MilpStatus::Infeasible) => {}
            (best, status) => bad.push(format!("case {case}: {status} vs {best:?}")),
        }
    }
    let mut branched = 0;
    for _ in 0..100 {
        let inst = common::lower_level(&mut rng, 24);
        let mut m = relaxed_lower_level(&inst).unwrap();
        let ids: Vec<_> = (0..m.num_vars()).map(evagg_solver::VarId).collect();
        for id in ids {
            m.set_integer(id, true);
        }
        let sol = solve_milp(&m, &BnbConfig::default()).unwrap();
        if sol.nodes != 1 {
            branched += 1;
        }
    }
    line(
        10,
        bad.is_empty() && branched == 0,
        format!(
            "200 random 8-binary models ({feasible} feasible): {} mismatches against enumeration (tol {OBJECTIVE_TOL:e}); 100 unimodular models, {branched} needed branching{}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn criterion_11() -> Line {
    let mut rng = common::rng(11);
    let c = loop {
        let c = common::robust_case(&mut rng, 2, 24);
        if c.fleet.len() == 2 {
            break c;
        }
    };
    let art = build_robust_milp(&c.fleet, &c.horizon, &c.prices, &c.uncertainty, &c.demand, &c.params).unwrap();
    let first = write_lp_string(&art.model).unwrap();
    let second = write_lp_string(&parse_lp_str(&first).unwrap()).unwrap();
    line(
        11,
        first == second,
        format!(
            "2-EV robust model ({} rows, {} columns, {} bytes): export -> parse -> export {}",
            art.model.num_constraints(),
            art.model.num_vars(),
            first.len(),
            if first == second { "byte-identical" } else { "differs" }
        ),
    )
}

fn main() {
    let mut certs = Certificates::default();
    let mut audits = Audits::default();
    let mut lines = vec![
        criterion_1(&mut certs),
        criterion_2(),
        criterion_3(&mut audits),
        criterion_4(&mut certs, &mut audits),
    ];
    let seven = criterion_7(&mut certs);
    let ten = criterion_10();
    let eleven = criterion_11();

    let runs = run_campaigns();
    for (r, label) in [(&runs.base, "base"), (&runs.fewer_hours, "K-5"), (&runs.reduced_feeder, "feeder")] {
        for day in &r.days {
            for m in &day.models {
                if let Some(a) = m.audit {
                    audits.record(format!("{label} day {} {}", day.day, m.kind.short()), a);
                }
            }
        }
    }
    let reports: Vec<&MetricsReport> = [&runs.base, &runs.fewer_hours, &runs.reduced_feeder]
        .iter()
        .flat_map(|r| r.days.iter().flat_map(|d| d.models.iter().map(|m| &m.metrics)).chain(r.totals.iter().map(|(_, m)| m)))
        .collect();

    lines.push(criterion_5(&audits));
    lines.push(criterion_6(&certs));
    lines.push(seven);
    lines.push(criterion_8(&reports));
    lines.push(criterion_9(&runs));
    lines.push(ten);
    lines.push(eleven);
    lines.sort_by_key(|l| l.id);

    println!("acceptance report");
    for l in &lines {
        println!("criterion {:>2}: {} {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("{} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
