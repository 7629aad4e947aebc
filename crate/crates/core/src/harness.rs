//! Rolling backtest: estimate from the trailing window, plan with each
//! model, check the plan against the realised day, and total the metrics.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{
    AggregatorParams, AvailabilityHistory, DayRecord, DispatchSolution, EvParams, FleetSpec, Horizon, MetricsReport,
    ModelKind, PriceSeries,
};
use crate::error::{CoreError, CoreResult};
use crate::estimation::{
    build_scenarios, estimate_uncertainty, expected_daily_demand, expected_profiles, offset_k, HistoryWindow,
    DEFAULT_WINDOW,
};
pub use crate::models::evaluate_feasibility;
use crate::models::{
    audit_robust, build_robust_milp, solve_deterministic, solve_robust, solve_stochastic, DispatchOptions, FeasibilityOutcome,
    RobustAudit, RobustInputs,
};

/// Days averaged into the price forecast.
pub const PRICE_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignData {
    pub horizon: Horizon,
    pub fleet: FleetSpec,
    pub history: AvailabilityHistory,
    /// Day-ahead prices of every day in the history.
    pub prices: Vec<PriceSeries>,
}

impl CampaignData {
    pub fn validate(&self) -> CoreResult<()> {
        self.horizon.validate()?;
        if self.history.n_evs() != self.fleet.len() {
            return Err(CoreError::Validation(format!(
                "history covers {} EVs, fleet has {}",
                self.history.n_evs(),
                self.fleet.len()
            )));
        }
        self.history.validate(self.horizon.n_periods)?;
        if self.prices.len() < self.history.n_days() {
            return Err(CoreError::Validation(format!(
                "{} price days for {} history days",
                self.prices.len(),
                self.history.n_days()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub first_day: usize,
    pub n_days: usize,
    pub models: Vec<ModelKind>,
    /// Added to every EV's minimum available-hour count, clamped to what
    /// its upper bounds allow.
    pub k_offset: i64,
    /// Fraction in [0, 1) by which the feeder limit is cut, applied to the
    /// smaller of the configured limit and the fleet's aggregate rating.
    pub feeder_reduction: f64,
    pub window: usize,
    pub params: AggregatorParams,
    pub dispatch: DispatchOptions,
}

impl CampaignConfig {
    pub fn new(first_day: usize, n_days: usize, models: Vec<ModelKind>) -> Self {
        CampaignConfig {
            first_day,
            n_days,
            models,
            k_offset: 0,
            feeder_reduction: 0.0,
            window: DEFAULT_WINDOW,
            params: AggregatorParams::default(),
            dispatch: DispatchOptions::default(),
        }
    }

    pub fn validate(&self, data: &CampaignData) -> CoreResult<()> {
        if self.models.is_empty() {
            return Err(CoreError::Validation("no models selected".into()));
        }
        if !(0.0..1.0).contains(&self.feeder_reduction) {
            return Err(CoreError::Validation(format!("feeder reduction {} outside [0, 1)", self.feeder_reduction)));
        }
        let need = (self.window * crate::estimation::DAYS_PER_WEEK).max(PRICE_WINDOW);
        if self.first_day < need {
            return Err(CoreError::Validation(format!(
                "first simulated day {} leaves less than {need} days of history",
                self.first_day
            )));
        }
        if self.first_day + self.n_days > data.history.n_days() {
            return Err(CoreError::Validation(format!(
                "campaign runs to day {} but history ends at day {}",
                self.first_day + self.n_days,
                data.history.n_days()
            )));
        }
        self.params.validate()
    }

    pub fn effective_params(&self, fleet: &FleetSpec) -> AggregatorParams {
        let mut p = self.params;
        if self.feeder_reduction > 0.0 {
            p.feeder_cap = (1.0 - self.feeder_reduction) * p.feeder_cap.min(fleet.aggregate_rating());
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDayResult {
    pub kind: ModelKind,
    pub solution: DispatchSolution,
    pub feasibility: FeasibilityOutcome,
    pub metrics: MetricsReport,
    /// Oracle re-check of a robust plan.
    pub audit: Option<RobustAudit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayResult {
    pub day: usize,
    pub models: Vec<ModelDayResult>,
}

/// Metrics of a plan priced at `prices`.
pub fn plan_metrics(
    solution: &DispatchSolution,
    prices: &PriceSeries,
    horizon: &Horizon,
    feasibility: &FeasibilityOutcome,
    solve_time: f64,
) -> MetricsReport {
    let (mut c_da, mut r_da, mut bought, mut sold) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &l) in solution.p.iter().zip(&prices.lambda) {
        let buy = horizon.energy(p.max(0.0));
        let sell = horizon.energy((-p).max(0.0));
        c_da += l * buy;
        r_da += l * sell;
        bought += buy;
        sold += sell;
    }
    MetricsReport {
        e_bought: bought / 1000.0,
        e_sold: sold / 1000.0,
        s_fp: feasibility.slack_total / 1000.0,
        e_minus_fp: feasibility.shortfall_total / 1000.0,
        solve_time,
        ..MetricsReport::from_parts(c_da, solution.degradation_total(), r_da)
    }
}

/// Mean of the `PRICE_WINDOW` days before `day`.
pub fn price_forecast(prices: &[PriceSeries], day: usize) -> CoreResult<PriceSeries> {
    if day < PRICE_WINDOW {
        return Err(CoreError::Validation(format!("day {day} lacks {PRICE_WINDOW} prior price days")));
    }
    let days: Vec<&PriceSeries> = (1..=PRICE_WINDOW).map(|k| &prices[day - k]).collect();
    PriceSeries::average(&days)
}

pub fn run_day(day: usize, cfg: &CampaignConfig, data: &CampaignData) -> CoreResult<DayResult> {
    let horizon = &data.horizon;
    let fleet = &data.fleet;
    let params = cfg.effective_params(fleet);
    let window = HistoryWindow::preceding(&data.history, day, cfg.window)?;
    let prices = price_forecast(&data.prices, day)?;
    let realized: Vec<DayRecord> = data.history.records.iter().map(|r| r[day].clone()).collect();
    let mut models = Vec::new();
    for &kind in &cfg.models {
        let start = Instant::now();
        let mut robust_inputs = None;
        let solution = match kind {
            ModelKind::Deterministic => {
                solve_deterministic(fleet, horizon, &prices, &expected_profiles(&window), &params, &cfg.dispatch)
            }
            ModelKind::Stochastic => solve_stochastic(fleet, horizon, &prices, &build_scenarios(&window), &params),
            ModelKind::Robust => {
                let unc = offset_k(&estimate_uncertainty(&window)?, cfg.k_offset);
                let demand = expected_daily_demand(&window);
                let inputs = RobustInputs { uncertainty: &unc, demand: &demand };
                let sol = solve_robust(fleet, horizon, &prices, inputs, &params, &cfg.dispatch);
                robust_inputs = Some((unc, demand));
                sol
            }
        }
        .map_err(|e| match e {
            CoreError::NotSolved { model, status, diagnosis } => CoreError::NotSolved {
                model: format!("day {day} {model}"),
                status,
                diagnosis,
            },
            other => other,
        })?;
        let solve_time = start.elapsed().as_secs_f64();
        let audit = match robust_inputs {
            Some((unc, demand)) => {
                let art = build_robust_milp(fleet, horizon, &prices, &unc, &demand, &params)?;
                Some(audit_robust(&art, &solution, &demand)?)
            }
            None => None,
        };
        let feasibility = evaluate_feasibility(fleet, horizon, &realized, &solution.p, &params)?;
        let metrics = plan_metrics(&solution, &prices, horizon, &feasibility, solve_time);
        models.push(ModelDayResult { kind, solution, feasibility, metrics, audit });
    }
    Ok(DayResult { day, models })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub days: Vec<DayResult>,
    /// Per-model sums over all days, in the configured model order.
    pub totals: Vec<(ModelKind, MetricsReport)>,
}

impl CampaignReport {
    pub fn total(&self, kind: ModelKind) -> Option<&MetricsReport> {
        self.totals.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }
}

pub fn run_campaign(cfg: &CampaignConfig, data: &CampaignData) -> CoreResult<CampaignReport> {
    data.validate()?;
    cfg.validate(data)?;
    let mut days = Vec::with_capacity(cfg.n_days);
    for day in cfg.first_day..cfg.first_day + cfg.n_days {
        days.push(run_day(day, cfg, data)?);
    }
    let totals = cfg
        .models
        .iter()
        .map(|&k| {
            let mut total = MetricsReport::default();
            for d in &days {
                for r in d.models.iter().filter(|r| r.kind == k) {
                    total.accumulate(&r.metrics);
                }
            }
            (k, total)
        })
        .collect();
    Ok(CampaignReport { days, totals })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    day: usize,
    model: &'a str,
    status: &'a str,
    tc_da: f64,
    c_da: f64,
    d_da: f64,
    r_da: f64,
    e_bought: f64,
    e_sold: f64,
    s_fp: f64,
    e_minus_fp: f64,
    solve_time: f64,
}

pub fn write_summary_csv(report: &CampaignReport, path: &Path) -> CoreResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for day in &report.days {
        for r in &day.models {
            let m = &r.metrics;
            w.serialize(SummaryRow {
                day: day.day,
                model: r.kind.short(),
                status: &r.solution.status,
                tc_da: m.tc_da,
                c_da: m.c_da,
                d_da: m.d_da,
                r_da: m.r_da,
                e_bought: m.e_bought,
                e_sold: m.e_sold,
                s_fp: m.s_fp,
                e_minus_fp: m.e_minus_fp,
                solve_time: m.solve_time,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Metric-by-model table of campaign totals.
pub fn comparison_table(report: &CampaignReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "metric");
    for (k, _) in &report.totals {
        let _ = write!(out, "{:>12}", k.short());
    }
    out.push('\n');
    let rows: [(&str, fn(&MetricsReport) -> f64, usize); 9] = [
        ("TC_DA (EUR)", |m| m.tc_da, 1),
        ("  C_DA (EUR)", |m| m.c_da, 1),
        ("  D_DA (EUR)", |m| m.d_da, 1),
        ("  R_DA (EUR)", |m| m.r_da, 1),
        ("E_B (MWh)", |m| m.e_bought, 3),
        ("E_S (MWh)", |m| m.e_sold, 3),
        ("s_FP (MWh)", |m| m.s_fp, 3),
        ("E-_FP (MWh)", |m| m.e_minus_fp, 3),
        ("solve time (s)", |m| m.solve_time, 1),
    ];
    for (label, f, prec) in rows {
        let _ = write!(out, "{label:<16}");
        for (_, m) in &report.totals {
            let _ = write!(out, "{:>12.prec$}", f(m));
        }
        out.push('\n');
    }
    out
}

/// Writes `campaign_summary.csv` and `comparison.txt` into `dir`.
pub fn write_outputs(report: &CampaignReport, dir: &Path, extra: &str) -> CoreResult<()> {
    std::fs::create_dir_all(dir)?;
    write_summary_csv(report, &dir.join("campaign_summary.csv"))?;
    let mut text = comparison_table(report);
    if !extra.is_empty() {
        text.push('\n');
        text.push_str(extra);
    }
    std::fs::write(dir.join("comparison.txt"), text)?;
    Ok(())
}

/// Availability, consumption and the reference fleet for `n_evs` EVs over
/// `n_days` days.
///
/// Each EV gets a habit: a departure hour around 07:00, a time away, a
/// number of driving hours split between the outward and return legs, and
/// a chance of an evening trip. Days jitter the habit by up to an hour and
/// are sometimes spent at home; weekends more often.
pub fn generate_synthetic_fleet(n_evs: usize, n_days: usize, seed: u64) -> CoreResult<(AvailabilityHistory, FleetSpec)> {
    if n_evs == 0 {
        return Err(CoreError::Validation("fleet needs at least one EV".into()));
    }
    const N: usize = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_evs);
    let mut evs = Vec::with_capacity(n_evs);
    for v in 0..n_evs {
        let mut ev = EvParams::reference(format!("ev{v:03}"));
        let depart: i32 = rng.gen_range(5..=9);
        let away: i32 = rng.gen_range(6..=10);
        let driving: i32 = rng.gen_range(1..=4);
        let evening_p: f64 = rng.gen_range(0.1..0.5);
        let evening_start: i32 = rng.gen_range(18..=21);
        let mut days = Vec::with_capacity(n_days);
        for day in 0..n_days {
            let weekend = day % 7 >= 5;
            let mut avail = [1u8; N];
            let mut drive = [false; N];
            let home_p = if weekend { 0.4 } else { 0.1 };
            if !rng.gen_bool(home_p) {
                let dep = (depart + rng.gen_range(-1..=1) + if weekend { 2 } else { 0 }).clamp(0, N as i32 - 1);
                let len = (away + rng.gen_range(-1..=1)).max(driving);
                let end = (dep + len).min(N as i32);
                for t in dep..end {
                    avail[t as usize] = 0;
                }
                let out_leg = (driving + 1) / 2;
                let back_leg = driving - out_leg;
                for t in dep..(dep + out_leg).min(end) {
                    drive[t as usize] = true;
                }
                for t in (end - back_leg).max(dep)..end {
                    drive[t as usize] = true;
                }
            }
            if rng.gen_bool(evening_p) {
                let start = evening_start + rng.gen_range(-1..=1);
                let len = rng.gen_range(1..=2);
                for t in start..(start + len).min(N as i32) {
                    avail[t as usize] = 0;
                    drive[t as usize] = true;
                }
            }
            let mut cons = vec![0.0; N];
            for t in 0..N {
                if drive[t] {
                    cons[t] = rng.gen_range(1.0..6.0);
                }
            }
            let total: f64 = cons.iter().sum();
            if total > ev.usable() {
                let k = ev.usable() / total;
                cons.iter_mut().for_each(|c| *c *= k);
            }
            days.push(DayRecord { avail: avail.to_vec(), cons });
        }
        ev.daily_demand = days.iter().map(|d| d.total_consumption()).sum::<f64>() / n_days.max(1) as f64;
        records.push(days);
        evs.push(ev);
    }
    Ok((AvailabilityHistory { records }, FleetSpec { evs }))
}

/// Positive day-ahead prices, EUR/kWh, with a morning and an evening peak,
/// a night trough, day-to-day level changes and cheaper weekends.
pub fn generate_synthetic_prices(n_days: usize, n_periods: usize, seed: u64) -> Vec<PriceSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PRICE_STREAM);
    (0..n_days)
        .map(|day| {
            let level = rng.gen_range(0.85..1.15) * if day % 7 >= 5 { 0.85 } else { 1.0 };
            let lambda = (0..n_periods)
                .map(|t| {
                    let h = t as f64 * 24.0 / n_periods as f64;
                    let bump = |mu: f64, var: f64| (-(h - mu).powi(2) / var).exp();
                    let shape = 0.040 + 0.025 * bump(8.0, 4.0) + 0.035 * bump(19.0, 5.0) - 0.008 * bump(3.5, 6.0);
                    (level * shape + rng.gen_range(-0.003..0.003)).max(0.005)
                })
                .collect();
            PriceSeries { lambda }
        })
        .collect()
}

// Keeps price noise independent of the fleet draws for the same seed.
const PRICE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn synthetic_campaign_data(n_evs: usize, n_days: usize, seed: u64) -> CoreResult<CampaignData> {
    let (history, fleet) = generate_synthetic_fleet(n_evs, n_days, seed)?;
    let horizon = Horizon::default();
    let prices = generate_synthetic_prices(n_days, horizon.n_periods, seed);
    Ok(CampaignData { horizon, fleet, history, prices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let a = generate_synthetic_fleet(5, 14, 7).unwrap();
        let b = generate_synthetic_fleet(5, 14, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_fleet(5, 14, 8).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn generated_days_drive_only_when_away() {
        let (hist, fleet) = generate_synthetic_fleet(20, 21, 3).unwrap();
        hist.validate(24).unwrap();
        assert!(crate::domain::validate_fleet(&fleet, &Horizon::default()).is_empty());
    }

    #[test]
    fn prices_are_positive() {
        for p in generate_synthetic_prices(30, 24, 1) {
            assert!(PriceSeries::new(p.lambda).is_ok());
        }
    }

    #[test]
    fn forecast_is_four_day_mean() {
        let prices: Vec<PriceSeries> = (1..=5).map(|k| PriceSeries { lambda: vec![k as f64; 2] }).collect();
        assert_eq!(price_forecast(&prices, 4).unwrap().lambda, vec![2.5, 2.5]);
        assert!(price_forecast(&prices, 3).is_err());
    }
}
