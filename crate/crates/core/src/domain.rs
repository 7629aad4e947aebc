//! Fleet, market and solution types shared across the crate.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Usable-energy fraction that places the default initial charge mid-range.
const DEFAULT_INITIAL_FILL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub n_periods: usize,
    pub period_hours: f64,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon { n_periods: 24, period_hours: 1.0 }
    }
}

impl Horizon {
    pub fn new(n_periods: usize) -> CoreResult<Self> {
        let h = Horizon { n_periods, period_hours: 1.0 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.n_periods == 0 {
            return Err(CoreError::Validation("horizon needs at least one period".into()));
        }
        if !(self.period_hours > 0.0) || self.period_hours.fract() != 0.0 {
            return Err(CoreError::Validation(format!(
                "period length must be a positive whole number of hours, got {}",
                self.period_hours
            )));
        }
        Ok(())
    }

    /// kWh moved by holding `kw` for one period.
    pub fn energy(&self, kw: f64) -> f64 {
        kw * self.period_hours
    }

    /// Average kW that moves `kwh` within one period.
    pub fn power(&self, kwh: f64) -> f64 {
        kwh / self.period_hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvParams {
    pub id: String,
    /// Charging power limit, kW.
    pub c_max: f64,
    /// Discharging power limit, kW.
    pub d_max: f64,
    /// Battery energy bounds, kWh.
    pub e_max: f64,
    pub e_min: f64,
    /// Stored energy at the start and, by the terminal condition, the end of
    /// the day, kWh.
    pub e_init: f64,
    pub eta: f64,
    /// Battery purchase cost per kWh of useful capacity, EUR/kWh.
    pub batt_cost: f64,
    /// Slope of the cycle-life approximation (dimensionless, usually negative).
    pub slope: f64,
    /// Expected daily transport energy, kWh.
    pub daily_demand: f64,
}

impl EvParams {
    /// The reference vehicle: 41.1 kWh usable between 10 and 51.1 kWh,
    /// 7.4 kW both ways, 95 % efficiency, 70 EUR/kWh battery.
    pub fn reference(id: impl Into<String>) -> Self {
        let (e_min, e_max) = (10.0, 51.1);
        EvParams {
            id: id.into(),
            c_max: 7.4,
            d_max: 7.4,
            e_max,
            e_min,
            e_init: e_min + DEFAULT_INITIAL_FILL * (e_max - e_min),
            eta: 0.95,
            batt_cost: 70.0,
            slope: -0.015625,
            daily_demand: 0.0,
        }
    }

    pub fn usable(&self) -> f64 {
        self.e_max - self.e_min
    }

    /// EUR per kWh of chemical energy cycled through the battery.
    pub fn cycle_cost_rate(&self) -> f64 {
        (self.slope / 100.0).abs() * self.batt_cost
    }
}

/// Cost of the cycle implied by discharging `d_kw` for one period while
/// `tau_kwh` is spent on driving.
pub fn degradation_cost(ev: &EvParams, horizon: &Horizon, d_kw: f64, tau_kwh: f64) -> CoreResult<f64> {
    if !(d_kw >= 0.0) || !(tau_kwh >= 0.0) {
        return Err(CoreError::Validation(format!(
            "degradation inputs must be nonnegative (d = {d_kw} kW, tau = {tau_kwh} kWh)"
        )));
    }
    Ok(ev.cycle_cost_rate() * (horizon.energy(d_kw) / ev.eta + tau_kwh))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub evs: Vec<EvParams>,
}

impl FleetSpec {
    pub fn len(&self) -> usize {
        self.evs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evs.is_empty()
    }

    /// Largest net power the whole fleet could draw or inject.
    pub fn aggregate_rating(&self) -> f64 {
        self.evs.iter().map(|e| e.c_max.max(e.d_max)).sum()
    }
}

/// Every broken admissibility rule, one message per breach.
pub fn validate_fleet(fleet: &FleetSpec, horizon: &Horizon) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = horizon.validate() {
        out.push(e.to_string());
    }
    let mut seen = std::collections::HashSet::new();
    for ev in &fleet.evs {
        let id = &ev.id;
        if !seen.insert(id.as_str()) {
            out.push(format!("EV {id}: duplicate id"));
        }
        let finite = [ev.c_max, ev.d_max, ev.e_max, ev.e_min, ev.e_init, ev.eta, ev.batt_cost, ev.slope, ev.daily_demand]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            out.push(format!("EV {id}: non-finite parameter"));
            continue;
        }
        if !(ev.e_min > 0.0) {
            out.push(format!("EV {id}: e_min must be positive"));
        }
        if !(ev.e_min < ev.e_max) {
            out.push(format!("EV {id}: e_min must be below e_max"));
        }
        if ev.e_init < ev.e_min {
            out.push(format!("EV {id}: e_init below e_min"));
        }
        if ev.e_init > ev.e_max {
            out.push(format!("EV {id}: e_init above e_max"));
        }
        if !(ev.eta > 0.0 && ev.eta <= 1.0) {
            out.push(format!("EV {id}: efficiency must lie in (0, 1]"));
        }
        if ev.c_max < 0.0 || ev.d_max < 0.0 {
            out.push(format!("EV {id}: power limits must be nonnegative"));
        }
        if ev.batt_cost < 0.0 {
            out.push(format!("EV {id}: battery cost must be nonnegative"));
        }
        if ev.daily_demand < 0.0 {
            out.push(format!("EV {id}: daily demand must be nonnegative"));
        }
        let ceiling = ev.usable() * horizon.n_periods as f64;
        if ev.daily_demand > ceiling {
            out.push(format!("EV {id}: demand exceeds {} kWh ceiling", round_display(ceiling)));
        }
    }
    out
}

fn round_display(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatorParams {
    /// Feeder capacity, kW, applied to purchases and sales alike.
    pub feeder_cap: f64,
    /// Penalty on battery-balance slack, EUR/kWh.
    pub pen_balance: f64,
    /// Penalty on undelivered sales, EUR/kWh.
    pub pen_sale: f64,
}

impl Default for AggregatorParams {
    fn default() -> Self {
        AggregatorParams { feeder_cap: 8000.0, pen_balance: 2000.0, pen_sale: 1000.0 }
    }
}

impl AggregatorParams {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.feeder_cap > 0.0) {
            return Err(CoreError::Validation("feeder capacity must be positive".into()));
        }
        if !(self.pen_sale > 0.0) || !(self.pen_balance > self.pen_sale) {
            return Err(CoreError::Validation(
                "penalties must satisfy pen_balance > pen_sale > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    /// EUR/kWh per period.
    pub lambda: Vec<f64>,
}

impl PriceSeries {
    /// Rejects non-positive prices: with a zero or negative price the
    /// models may charge and discharge at once.
    pub fn new(lambda: Vec<f64>) -> CoreResult<Self> {
        for (t, &l) in lambda.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(CoreError::Validation(format!(
                    "price at period {t} is {l}; prices must be strictly positive"
                )));
            }
        }
        Ok(PriceSeries { lambda })
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Period-wise mean of several days.
    pub fn average(days: &[&PriceSeries]) -> CoreResult<Self> {
        let Some(first) = days.first() else {
            return Err(CoreError::Validation("no price days to average".into()));
        };
        let n = first.len();
        if days.iter().any(|d| d.len() != n) {
            return Err(CoreError::Validation("price days differ in length".into()));
        }
        let k = days.len() as f64;
        let lambda = (0..n).map(|t| days.iter().map(|d| d.lambda[t]).sum::<f64>() / k).collect();
        PriceSeries::new(lambda)
    }
}

/// One EV on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub avail: Vec<u8>,
    /// Transport consumption per period, kWh.
    pub cons: Vec<f64>,
}

impl DayRecord {
    pub fn available_hours(&self) -> u32 {
        self.avail.iter().map(|&a| a as u32).sum()
    }

    pub fn total_consumption(&self) -> f64 {
        self.cons.iter().sum()
    }

    pub fn validate(&self, n_periods: usize) -> CoreResult<()> {
        if self.avail.len() != n_periods || self.cons.len() != n_periods {
            return Err(CoreError::Validation(format!(
                "day record has {} availability and {} consumption entries, expected {n_periods}",
                self.avail.len(),
                self.cons.len()
            )));
        }
        for t in 0..n_periods {
            if self.avail[t] > 1 {
                return Err(CoreError::Validation(format!("availability at period {t} is not 0/1")));
            }
            let c = self.cons[t];
            if !c.is_finite() || c < 0.0 {
                return Err(CoreError::Validation(format!("consumption at period {t} is {c}")));
            }
            if c > 0.0 && self.avail[t] == 1 {
                return Err(CoreError::Validation(format!(
                    "consumption {c} kWh at period {t} while plugged in"
                )));
            }
        }
        Ok(())
    }
}

/// Availability and consumption records, indexed `[ev][day]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityHistory {
    pub records: Vec<Vec<DayRecord>>,
}

impl AvailabilityHistory {
    pub fn n_evs(&self) -> usize {
        self.records.len()
    }

    pub fn n_days(&self) -> usize {
        self.records.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self, n_periods: usize) -> CoreResult<()> {
        let n_days = self.n_days();
        for (v, days) in self.records.iter().enumerate() {
            if days.len() != n_days {
                return Err(CoreError::Validation(format!("EV {v} has {} days, expected {n_days}", days.len())));
            }
            for (d, rec) in days.iter().enumerate() {
                rec.validate(n_periods)
                    .map_err(|e| CoreError::Validation(format!("EV {v}, day {d}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Number of EVs plugged in at each period of `day`.
    pub fn available_count(&self, day: usize) -> Vec<u32> {
        let n = self.records.first().map_or(0, |r| r[day].avail.len());
        (0..n)
            .map(|t| self.records.iter().map(|r| r[day].avail[t] as u32).sum())
            .collect()
    }
}

/// Availability uncertainty of one EV: at least `k_min` plugged-in periods,
/// each period's status within `[a_lo, a_hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvUncertainty {
    pub k_min: u32,
    pub a_lo: Vec<u8>,
    pub a_hi: Vec<u8>,
}

impl EvUncertainty {
    pub fn validate(&self, n_periods: usize) -> CoreResult<()> {
        if self.a_lo.len() != n_periods || self.a_hi.len() != n_periods {
            return Err(CoreError::Validation("uncertainty bounds have the wrong length".into()));
        }
        if self.a_lo.iter().chain(&self.a_hi).any(|&a| a > 1) {
            return Err(CoreError::Validation("availability bounds must be 0/1".into()));
        }
        if self.a_lo.iter().zip(&self.a_hi).any(|(l, h)| l > h) {
            return Err(CoreError::Validation("lower availability bound above upper".into()));
        }
        if self.k_min as usize > n_periods {
            return Err(CoreError::Validation(format!("k_min {} exceeds horizon", self.k_min)));
        }
        let cap: u32 = self.a_hi.iter().map(|&a| a as u32).sum();
        if cap < self.k_min {
            return Err(CoreError::Validation(format!(
                "k_min {} exceeds the {cap} periods that can be available",
                self.k_min
            )));
        }
        Ok(())
    }

    pub fn max_available(&self) -> u32 {
        self.a_hi.iter().map(|&a| a as u32).sum()
    }

    pub fn is_fixed(&self, t: usize) -> bool {
        self.a_lo[t] == self.a_hi[t]
    }
}

pub type UncertaintySet = Vec<EvUncertainty>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Deterministic,
    Stochastic,
    Robust,
}

impl ModelKind {
    pub fn short(&self) -> &'static str {
        match self {
            ModelKind::Deterministic => "DF",
            ModelKind::Stochastic => "SF",
            ModelKind::Robust => "HF",
        }
    }
}

/// Per-EV, per-period schedule blocks, indexed `[ev][period]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub cdeg: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustDetail {
    pub tau: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<u8>>,
    pub zc: Vec<Vec<f64>>,
    pub zd: Vec<Vec<f64>>,
    /// Duals of the worst-case draining problem.
    pub drain_count_dual: Vec<f64>,
    pub drain_lo_dual: Vec<Vec<f64>>,
    pub drain_hi_dual: Vec<Vec<f64>>,
    /// Duals of the minimum-interaction problem.
    pub contact_count_dual: Vec<f64>,
    pub contact_lo_dual: Vec<Vec<f64>>,
    pub contact_hi_dual: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub probability: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub model_kind: ModelKind,
    pub status: String,
    pub objective: f64,
    /// Net purchase per period, kW (negative = sale).
    pub p: Vec<f64>,
    /// For the stochastic model these are the probability-weighted means
    /// of the scenario copies.
    pub schedule: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust: Option<RobustDetail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<ScenarioSchedule>>,
}

impl DispatchSolution {
    /// Expected degradation cost, EUR.
    pub fn degradation_total(&self) -> f64 {
        match &self.scenarios {
            Some(sc) => sc
                .iter()
                .map(|s| s.probability * s.schedule.cdeg.iter().flatten().sum::<f64>())
                .sum(),
            None => self.schedule.cdeg.iter().flatten().sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Total day-ahead cost, EUR.
    pub tc_da: f64,
    /// Purchase cost, EUR.
    pub c_da: f64,
    /// Degradation cost, EUR.
    pub d_da: f64,
    /// Sale revenue, EUR.
    pub r_da: f64,
    /// Energy bought and sold, MWh.
    pub e_bought: f64,
    pub e_sold: f64,
    /// Battery-balance slack and undelivered sales after realisation, MWh.
    pub s_fp: f64,
    pub e_minus_fp: f64,
    pub solve_time: f64,
}

impl MetricsReport {
    /// Builds a report whose total is the sum of its parts.
    pub fn from_parts(c_da: f64, d_da: f64, r_da: f64) -> Self {
        MetricsReport { tc_da: c_da + d_da - r_da, c_da, d_da, r_da, ..Default::default() }
    }

    pub fn identity_residual(&self) -> f64 {
        (self.tc_da - (self.c_da + self.d_da - self.r_da)).abs()
    }

    pub fn accumulate(&mut self, other: &MetricsReport) {
        self.tc_da += other.tc_da;
        self.c_da += other.c_da;
        self.d_da += other.d_da;
        self.r_da += other.r_da;
        self.e_bought += other.e_bought;
        self.e_sold += other.e_sold;
        self.s_fp += other.s_fp;
        self.e_minus_fp += other.e_minus_fp;
        self.solve_time += other.solve_time;
    }
}
