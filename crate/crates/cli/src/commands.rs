use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use evagg_core::domain::{DispatchSolution, FleetSpec, Horizon, MetricsReport, ModelKind, PriceSeries};
use evagg_core::estimation::{
    build_scenarios, estimate_uncertainty, expected_daily_demand, expected_profiles, offset_k, HistoryWindow,
    DAYS_PER_WEEK,
};
use evagg_core::harness::{
    comparison_table, evaluate_feasibility, plan_metrics, run_campaign, synthetic_campaign_data, write_outputs,
    CampaignConfig, CampaignData, CampaignReport, PRICE_WINDOW,
};
use evagg_core::models::{
    audit_robust, build_deterministic, build_robust_milp, build_stochastic, solve_deterministic, solve_robust,
    solve_stochastic, ModelArtifacts, RobustAudit, RobustInputs,
};
use serde::{Deserialize, Serialize};

use crate::config::{required, Inputs, Tuning};
use crate::data::{campaign_data, fleet_for, read_history, read_prices, write_dataset, FleetHistory};
use crate::error::{CliError, CliResult};

/// Audit residuals above this are reported as failures.
const AUDIT_TOL: f64 = 1e-6;

pub fn gen_data(evs: usize, days: usize, seed: u64, start: NaiveDate, out: &Path) -> CliResult<()> {
    let data = synthetic_campaign_data(evs, days, seed)?;
    write_dataset(&data, start, out)?;
    println!("wrote {evs} EVs over {days} days from {start} to {}", out.display());
    Ok(())
}

fn load(inputs: &Inputs) -> CliResult<(FleetHistory, FleetSpec)> {
    let history = read_history(required(&inputs.availability, "availability")?, inputs.consumption.as_deref())?;
    let fleet = fleet_for(&history, inputs.fleet.as_deref())?;
    Ok((history, fleet))
}

/// Estimation window for `date`, which may be the day after the record.
fn window_for(history: &FleetHistory, date: NaiveDate, len: usize) -> CliResult<HistoryWindow> {
    let d = history.day_index(date)?;
    if d > history.dates.len() {
        return Err(CliError::Validation(format!(
            "{date} is more than one day past the last recorded day {}",
            history.dates.last().unwrap()
        )));
    }
    if d < len * DAYS_PER_WEEK {
        return Err(CliError::Validation(format!(
            "{date} needs {} days of history before it, the record starts {}",
            len * DAYS_PER_WEEK,
            history.first_date()
        )));
    }
    Ok(HistoryWindow::preceding(&history.history, d, len)?)
}

#[derive(Debug, Serialize)]
struct EvEstimate<'a> {
    ev_id: &'a str,
    k_min: u32,
    a_lo: &'a [u8],
    a_hi: &'a [u8],
    /// kWh.
    expected_demand: f64,
}

pub fn estimate(inputs: &Inputs, tuning: &Tuning, date: NaiveDate, out: Option<&Path>) -> CliResult<()> {
    let (history, _) = load(inputs)?;
    let window = window_for(&history, date, tuning.window())?;
    let unc = offset_k(&estimate_uncertainty(&window)?, tuning.k_offset.unwrap_or(0));
    let demand = expected_daily_demand(&window);
    let rows: Vec<EvEstimate> = history
        .ids
        .iter()
        .zip(&unc)
        .zip(&demand)
        .map(|((id, u), &d)| EvEstimate { ev_id: id, k_min: u.k_min, a_lo: &u.a_lo, a_hi: &u.a_hi, expected_demand: d })
        .collect();
    emit(&serde_json::json!({ "day": date.to_string(), "window": tuning.window(), "evs": rows }), out)
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        // A closed pipe downstream is not an error of ours.
        None => {
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}

/// Mean of the prices on the days before `date`.
fn forecast(prices: &BTreeMap<NaiveDate, PriceSeries>, date: NaiveDate) -> CliResult<PriceSeries> {
    let days = (1..=PRICE_WINDOW as i64)
        .map(|k| {
            let d = date - Duration::days(k);
            prices.get(&d).ok_or_else(|| CliError::Validation(format!("no prices for {d}, needed to forecast {date}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(PriceSeries::average(&days)?)
}

/// A plan for one day as written by `solve` and read by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub day: String,
    pub model: ModelKind,
    /// Forecast prices the plan was made with, EUR/kWh.
    pub prices: Vec<f64>,
    pub feeder_cap: f64,
    pub solve_time: f64,
    pub solution: DispatchSolution,
}

pub fn file_name(kind: ModelKind) -> String {
    format!("solution_{}.json", kind.short().to_lowercase())
}

struct DayInputs {
    fleet: FleetSpec,
    window: HistoryWindow,
    prices: PriceSeries,
    cfg: CampaignConfig,
}

impl DayInputs {
    fn new(inputs: &Inputs, tuning: &Tuning, kind: ModelKind, date: NaiveDate) -> CliResult<Self> {
        let (history, fleet) = load(inputs)?;
        let prices = read_prices(required(&inputs.prices, "prices")?)?;
        let window = window_for(&history, date, tuning.window())?;
        let mut cfg = CampaignConfig::new(0, 0, vec![kind]);
        cfg.params = tuning.params()?;
        cfg.dispatch = tuning.dispatch()?;
        cfg.k_offset = tuning.k_offset.unwrap_or(0);
        cfg.feeder_reduction = reduction(tuning)?;
        Ok(DayInputs { prices: forecast(&prices, date)?, fleet, window, cfg })
    }

    fn robust(&self) -> CliResult<(Vec<evagg_core::domain::EvUncertainty>, Vec<f64>)> {
        Ok((offset_k(&estimate_uncertainty(&self.window)?, self.cfg.k_offset), expected_daily_demand(&self.window)))
    }

    fn build(&self, kind: ModelKind) -> CliResult<ModelArtifacts> {
        let h = Horizon::default();
        let params = self.cfg.effective_params(&self.fleet);
        Ok(match kind {
            ModelKind::Deterministic => {
                build_deterministic(&self.fleet, &h, &self.prices, &expected_profiles(&self.window), &params)?
            }
            ModelKind::Stochastic => build_stochastic(&self.fleet, &h, &self.prices, &build_scenarios(&self.window), &params)?,
            ModelKind::Robust => {
                let (unc, demand) = self.robust()?;
                build_robust_milp(&self.fleet, &h, &self.prices, &unc, &demand, &params)?
            }
        })
    }

    fn solve(&self, kind: ModelKind) -> CliResult<(DispatchSolution, Option<RobustAudit>)> {
        let h = Horizon::default();
        let params = self.cfg.effective_params(&self.fleet);
        let opts = &self.cfg.dispatch;
        Ok(match kind {
            ModelKind::Deterministic => {
                (solve_deterministic(&self.fleet, &h, &self.prices, &expected_profiles(&self.window), &params, opts)?, None)
            }
            ModelKind::Stochastic => {
                (solve_stochastic(&self.fleet, &h, &self.prices, &build_scenarios(&self.window), &params)?, None)
            }
            ModelKind::Robust => {
                let (unc, demand) = self.robust()?;
                let inputs = RobustInputs { uncertainty: &unc, demand: &demand };
                let sol = solve_robust(&self.fleet, &h, &self.prices, inputs, &params, opts)?;
                let art = build_robust_milp(&self.fleet, &h, &self.prices, &unc, &demand, &params)?;
                let audit = audit_robust(&art, &sol, &demand)?;
                (sol, Some(audit))
            }
        })
    }
}

fn reduction(tuning: &Tuning) -> CliResult<f64> {
    let r = tuning.feeder_reduction.unwrap_or(0.0);
    if !(0.0..1.0).contains(&r) {
        return Err(CliError::Validation(format!("feeder reduction {r} outside [0, 1)")));
    }
    Ok(r)
}

pub fn solve(
    inputs: &Inputs,
    tuning: &Tuning,
    kind: ModelKind,
    date: NaiveDate,
    out: &Path,
    export_lp: Option<&Path>,
) -> CliResult<()> {
    let day = DayInputs::new(inputs, tuning, kind, date)?;
    if let Some(path) = export_lp {
        let art = day.build(kind)?;
        evagg_solver::export_lp_file(&art.model, path).map_err(|e| CliError::Validation(e.to_string()))?;
        println!(
            "wrote {} model for {date} to {} ({} rows, {} columns)",
            kind.short(),
            path.display(),
            art.model.num_constraints(),
            art.model.num_vars()
        );
        return Ok(());
    }
    let start = Instant::now();
    let (solution, audit) = day.solve(kind)?;
    let solve_time = start.elapsed().as_secs_f64();
    let file = SolutionFile {
        day: date.to_string(),
        model: kind,
        prices: day.prices.lambda.clone(),
        feeder_cap: day.cfg.effective_params(&day.fleet).feeder_cap,
        solve_time,
        solution,
    };
    std::fs::create_dir_all(out)?;
    let path = out.join(file_name(kind));
    emit(&file, Some(&path))?;
    let bought: f64 = file.solution.p.iter().map(|p| p.max(0.0)).sum();
    let sold: f64 = file.solution.p.iter().map(|p| (-p).max(0.0)).sum();
    println!(
        "{} {date}: {} objective {:.4} EUR, buy {bought:.1} kWh, sell {sold:.1} kWh, {solve_time:.1} s -> {}",
        kind.short(),
        file.solution.status,
        file.solution.objective,
        path.display()
    );
    if let Some(a) = audit {
        println!(
            "audit {}: drain margin {:.3e}, duality {:.3e}, response gap {:.3e}",
            if a.passes(AUDIT_TOL) { "passed" } else { "FAILED" },
            a.drain_margin,
            a.strong_duality_residual,
            a.response_gap
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Evaluation<'a> {
    day: String,
    model: ModelKind,
    objective: f64,
    /// kWh.
    slack_total: f64,
    shortfall_total: f64,
    shortfall: &'a [f64],
    metrics: MetricsReport,
}

pub fn evaluate(
    inputs: &Inputs,
    tuning: &Tuning,
    solution: &Path,
    date: Option<NaiveDate>,
    out: Option<&Path>,
) -> CliResult<()> {
    let text = std::fs::read_to_string(solution)
        .map_err(|e| CliError::Validation(format!("{}: {e}", solution.display())))?;
    let file: SolutionFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", solution.display())))?;
    let date = match date {
        Some(d) => d,
        None => crate::data::parse_date(&file.day)?,
    };
    let (history, fleet) = load(inputs)?;
    let realized = history.day(date)?;
    let mut params = tuning.params()?;
    if tuning.feeder_cap.is_none() {
        params.feeder_cap = file.feeder_cap;
    }
    let h = Horizon::default();
    let feas = evaluate_feasibility(&fleet, &h, &realized, &file.solution.p, &params)?;
    let prices = PriceSeries::new(file.prices.clone())?;
    let metrics = plan_metrics(&file.solution, &prices, &h, &feas, file.solve_time);
    emit(
        &Evaluation {
            day: date.to_string(),
            model: file.model,
            objective: feas.objective,
            slack_total: feas.slack_total,
            shortfall_total: feas.shortfall_total,
            shortfall: &feas.shortfall,
            metrics,
        },
        out,
    )
}

pub struct Synthetic {
    pub evs: usize,
    pub days: usize,
    pub seed: u64,
    pub start: NaiveDate,
}

pub struct SimulateArgs<'a> {
    pub synthetic: Option<Synthetic>,
    pub first_day: Option<NaiveDate>,
    pub n_days: Option<usize>,
    pub models: &'a [ModelKind],
    pub out: &'a Path,
}

pub fn simulate(inputs: &Inputs, tuning: &Tuning, args: SimulateArgs<'_>) -> CliResult<CampaignReport> {
    let (data, start): (CampaignData, NaiveDate) = match &args.synthetic {
        Some(s) => {
            if inputs.any() {
                return Err(CliError::Validation("give either --synthetic or input files, not both".into()));
            }
            (synthetic_campaign_data(s.evs, s.days, s.seed)?, s.start)
        }
        None => {
            if inputs.availability.is_none() {
                return Err(CliError::Validation("no data: give --synthetic or --availability and --prices".into()));
            }
            let (history, fleet) = load(inputs)?;
            let prices = read_prices(required(&inputs.prices, "prices")?)?;
            (campaign_data(&history, fleet, &prices)?, history.first_date())
        }
    };
    let window = tuning.window();
    let first = match args.first_day {
        Some(d) => {
            let i = (d - start).num_days();
            if i < 0 {
                return Err(CliError::Validation(format!("first day {d} precedes the data, which starts {start}")));
            }
            i as usize
        }
        None => (window * DAYS_PER_WEEK).max(PRICE_WINDOW),
    };
    let n_days = args.n_days.unwrap_or(data.history.n_days().saturating_sub(first));
    let mut cfg = CampaignConfig::new(first, n_days, args.models.to_vec());
    cfg.window = window;
    cfg.params = tuning.params()?;
    cfg.dispatch = tuning.dispatch()?;
    cfg.k_offset = tuning.k_offset.unwrap_or(0);
    cfg.feeder_reduction = reduction(tuning)?;
    let report = run_campaign(&cfg, &data)?;
    let mut extra = String::new();
    let audits: Vec<&RobustAudit> = report.days.iter().flat_map(|d| d.models.iter().filter_map(|m| m.audit.as_ref())).collect();
    if !audits.is_empty() {
        let passed = audits.iter().filter(|a| a.passes(AUDIT_TOL)).count();
        extra = format!("robust audit: {passed} of {} days passed\n", audits.len());
    }
    write_outputs(&report, args.out, &extra)?;
    let last = start + Duration::days((first + n_days) as i64 - 1);
    println!("{} to {last}, {} EVs", start + Duration::days(first as i64), data.fleet.len());
    print!("{}", comparison_table(&report));
    print!("{extra}");
    println!("outputs in {}", args.out.display());
    Ok(report)
}

pub fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or(file).unwrap_or_else(|| PathBuf::from("."))
}
