//! CSV ingestion and emission. Timestamps are ISO-8601 and hourly, and
//! every day must be complete.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use evagg_core::domain::{AvailabilityHistory, DayRecord, EvParams, FleetSpec, Horizon, PriceSeries};
use evagg_core::harness::CampaignData;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const HOURS: usize = 24;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    for fmt in [TIMESTAMP_FORMAT, "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    chrono::DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_local())
}

pub fn parse_date(s: &str) -> CliResult<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| CliError::Validation(format!("'{s}' is not a date of the form YYYY-MM-DD")))
}

fn at_line(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{} line {line}: {msg}", path.display()))
}

/// Date and hour of an on-the-hour timestamp.
fn slot(path: &Path, line: u64, ts: &str) -> CliResult<(NaiveDate, usize)> {
    let t = parse_timestamp(ts).ok_or_else(|| at_line(path, line, format!("bad timestamp '{ts}'")))?;
    if t.minute() != 0 || t.second() != 0 {
        return Err(at_line(path, line, format!("timestamp '{ts}' is not on the hour")));
    }
    Ok((t.date(), t.hour() as usize))
}

/// Deserialises every row of `path`, passing each with its line number.
fn read_rows<T: DeserializeOwned>(path: &Path, mut f: impl FnMut(T, u64) -> CliResult<()>) -> CliResult<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| at_line(path, 1, e))?.clone();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| at_line(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec.deserialize(Some(&headers)).map_err(|e| at_line(path, line, e))?;
        f(row, line)?;
    }
    Ok(())
}

/// Hourly values keyed by date, with the line that set each hour.
type Days<T> = BTreeMap<NaiveDate, [Option<(T, u64)>; HOURS]>;

fn put<T: Copy>(days: &mut Days<T>, path: &Path, line: u64, (date, hour): (NaiveDate, usize), value: T) -> CliResult<()> {
    let day = days.entry(date).or_insert([None; HOURS]);
    if let Some((_, first)) = day[hour] {
        return Err(at_line(path, line, format!("duplicate timestamp, first given on line {first}")));
    }
    day[hour] = Some((value, line));
    Ok(())
}

fn complete<T: Copy>(path: &Path, what: &str, date: NaiveDate, day: &[Option<(T, u64)>; HOURS]) -> CliResult<[T; HOURS]> {
    let missing: Vec<usize> = (0..HOURS).filter(|&h| day[h].is_none()).collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: {what}{date} is missing hours {missing:?}",
            path.display()
        )));
    }
    Ok(std::array::from_fn(|h| day[h].unwrap().0))
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    timestamp: String,
    eur_per_kwh: f64,
}

/// Day-ahead prices, one series per date.
pub fn read_prices(path: &Path) -> CliResult<BTreeMap<NaiveDate, PriceSeries>> {
    let mut days: Days<f64> = BTreeMap::new();
    read_rows(path, |r: PriceRow, line| {
        if !r.eur_per_kwh.is_finite() || r.eur_per_kwh <= 0.0 {
            return Err(at_line(path, line, format!("price {} must be strictly positive", r.eur_per_kwh)));
        }
        put(&mut days, path, line, slot(path, line, &r.timestamp)?, r.eur_per_kwh)
    })?;
    days.iter()
        .map(|(&date, day)| {
            let lambda = complete(path, "", date, day)?.to_vec();
            Ok((date, PriceSeries::new(lambda)?))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct AvailabilityRow {
    ev_id: String,
    timestamp: String,
    avail: u8,
}

#[derive(Debug, Deserialize)]
struct ConsumptionRow {
    ev_id: String,
    timestamp: String,
    kwh: f64,
}

/// Availability and consumption of every EV, on consecutive dates.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetHistory {
    /// EV ids in order of first appearance in the availability file.
    pub ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub history: AvailabilityHistory,
}

impl FleetHistory {
    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    /// Index of `date` counted from the first recorded day; may point past
    /// the last one.
    pub fn day_index(&self, date: NaiveDate) -> CliResult<usize> {
        let d = (date - self.first_date()).num_days();
        if d < 0 {
            return Err(CliError::Validation(format!("{date} precedes the first recorded day {}", self.first_date())));
        }
        Ok(d as usize)
    }

    /// Records of every EV on `date`.
    pub fn day(&self, date: NaiveDate) -> CliResult<Vec<DayRecord>> {
        let d = self.day_index(date)?;
        if d >= self.dates.len() {
            return Err(CliError::Validation(format!("no availability recorded for {date}")));
        }
        Ok(self.history.records.iter().map(|r| r[d].clone()).collect())
    }
}

/// Reads availability and, if given, consumption. Hours without a
/// consumption row count as zero.
pub fn read_history(avail_path: &Path, cons_path: Option<&Path>) -> CliResult<FleetHistory> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut avail: Vec<Days<u8>> = Vec::new();
    read_rows(avail_path, |r: AvailabilityRow, line| {
        if r.avail > 1 {
            return Err(at_line(avail_path, line, format!("avail must be 0 or 1, got {}", r.avail)));
        }
        let v = *index.entry(r.ev_id.clone()).or_insert_with(|| {
            ids.push(r.ev_id.clone());
            avail.push(BTreeMap::new());
            ids.len() - 1
        });
        put(&mut avail[v], avail_path, line, slot(avail_path, line, &r.timestamp)?, r.avail)
    })?;
    if ids.is_empty() {
        return Err(CliError::Validation(format!("{}: no availability rows", avail_path.display())));
    }
    let mut cons: Vec<Days<f64>> = vec![BTreeMap::new(); ids.len()];
    if let Some(path) = cons_path {
        read_rows(path, |r: ConsumptionRow, line| {
            let Some(&v) = index.get(&r.ev_id) else {
                return Err(at_line(path, line, format!("EV '{}' has no availability rows", r.ev_id)));
            };
            if !r.kwh.is_finite() || r.kwh < 0.0 {
                return Err(at_line(path, line, format!("consumption {} kWh must be nonnegative", r.kwh)));
            }
            let at = slot(path, line, &r.timestamp)?;
            if avail[v].get(&at.0).and_then(|d| d[at.1]).is_some_and(|(a, _)| a == 1) {
                return Err(at_line(path, line, format!("EV '{}' consumes {} kWh while plugged in", r.ev_id, r.kwh)));
            }
            put(&mut cons[v], path, line, at, r.kwh)
        })?;
    }

    let first = *avail.iter().filter_map(|d| d.keys().next()).min().unwrap();
    let last = *avail.iter().filter_map(|d| d.keys().next_back()).max().unwrap();
    let dates: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();
    let mut records = Vec::with_capacity(ids.len());
    for (v, id) in ids.iter().enumerate() {
        let mut days = Vec::with_capacity(dates.len());
        for &date in &dates {
            let Some(day) = avail[v].get(&date) else {
                return Err(CliError::Validation(format!(
                    "{}: EV '{id}' has no rows for {date}",
                    avail_path.display()
                )));
            };
            let a = complete(avail_path, &format!("EV '{id}' on "), date, day)?;
            let mut c = [0.0; HOURS];
            if let Some(day) = cons[v].get(&date) {
                for h in 0..HOURS {
                    if let Some((x, _)) = day[h] {
                        c[h] = x;
                    }
                }
            }
            days.push(DayRecord { avail: a.to_vec(), cons: c.to_vec() });
        }
        records.push(days);
    }
    if let Some(path) = cons_path {
        for (v, id) in ids.iter().enumerate() {
            if let Some(date) = cons[v].keys().find(|d| **d < first || **d > last) {
                return Err(CliError::Validation(format!(
                    "{}: EV '{id}' has consumption on {date}, outside the availability record",
                    path.display()
                )));
            }
        }
    }
    Ok(FleetHistory { ids, dates, history: AvailabilityHistory { records } })
}

#[derive(Debug, Deserialize, Serialize)]
struct FleetRow {
    id: String,
    c_max: f64,
    d_max: f64,
    e_max: f64,
    e_min: f64,
    e_init: f64,
    eta: f64,
    batt_cost: f64,
    slope: f64,
    #[serde(default)]
    daily_demand: Option<f64>,
}

/// Fleet parameters for the EVs in `history`. Without a fleet file every
/// EV is the reference vehicle. A missing daily demand is the EV's mean
/// recorded consumption.
pub fn fleet_for(history: &FleetHistory, path: Option<&Path>) -> CliResult<FleetSpec> {
    let mean_demand = |v: usize| {
        let days = &history.history.records[v];
        days.iter().map(|d| d.total_consumption()).sum::<f64>() / days.len() as f64
    };
    let Some(path) = path else {
        let evs = history
            .ids
            .iter()
            .enumerate()
            .map(|(v, id)| EvParams { daily_demand: mean_demand(v), ..EvParams::reference(id.clone()) })
            .collect();
        return Ok(FleetSpec { evs });
    };
    let mut rows: HashMap<String, EvParams> = HashMap::new();
    read_rows(path, |r: FleetRow, line| {
        let ev = EvParams {
            id: r.id.clone(),
            c_max: r.c_max,
            d_max: r.d_max,
            e_max: r.e_max,
            e_min: r.e_min,
            e_init: r.e_init,
            eta: r.eta,
            batt_cost: r.batt_cost,
            slope: r.slope,
            daily_demand: r.daily_demand.unwrap_or(f64::NAN),
        };
        if rows.insert(r.id.clone(), ev).is_some() {
            return Err(at_line(path, line, format!("EV '{}' listed twice", r.id)));
        }
        Ok(())
    })?;
    let mut evs = Vec::with_capacity(history.ids.len());
    for (v, id) in history.ids.iter().enumerate() {
        let mut ev = rows
            .remove(id)
            .ok_or_else(|| CliError::Validation(format!("{}: no parameters for EV '{id}'", path.display())))?;
        if ev.daily_demand.is_nan() {
            ev.daily_demand = mean_demand(v);
        }
        evs.push(ev);
    }
    Ok(FleetSpec { evs })
}

/// Campaign data over the recorded dates; every one needs prices.
pub fn campaign_data(
    history: &FleetHistory,
    fleet: FleetSpec,
    prices: &BTreeMap<NaiveDate, PriceSeries>,
) -> CliResult<CampaignData> {
    let prices = history
        .dates
        .iter()
        .map(|d| {
            prices.get(d).cloned().ok_or_else(|| CliError::Validation(format!("no prices for {d}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let data = CampaignData { horizon: Horizon::default(), fleet, history: history.history.clone(), prices };
    data.validate()?;
    Ok(data)
}

fn stamp(date: NaiveDate, hour: usize) -> String {
    (date.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(hour as i64)).format(TIMESTAMP_FORMAT).to_string()
}

/// Writes the campaign as prices, availability, consumption and fleet CSVs
/// in `dir`, with day 0 on `start`.
pub fn write_dataset(data: &CampaignData, start: NaiveDate, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let dates: Vec<NaiveDate> = start.iter_days().take(data.history.n_days()).collect();
    let mut w = csv::Writer::from_path(dir.join("prices.csv"))?;
    w.write_record(["timestamp", "eur_per_kwh"])?;
    for (date, p) in dates.iter().zip(&data.prices) {
        for (h, l) in p.lambda.iter().enumerate() {
            w.write_record([stamp(*date, h), l.to_string()])?;
        }
    }
    w.flush()?;
    let mut wa = csv::Writer::from_path(dir.join("availability.csv"))?;
    let mut wc = csv::Writer::from_path(dir.join("consumption.csv"))?;
    wa.write_record(["ev_id", "timestamp", "avail"])?;
    wc.write_record(["ev_id", "timestamp", "kwh"])?;
    for (ev, days) in data.fleet.evs.iter().zip(&data.history.records) {
        for (date, rec) in dates.iter().zip(days) {
            for h in 0..rec.avail.len() {
                wa.write_record([ev.id.clone(), stamp(*date, h), rec.avail[h].to_string()])?;
                if rec.cons[h] > 0.0 {
                    wc.write_record([ev.id.clone(), stamp(*date, h), rec.cons[h].to_string()])?;
                }
            }
        }
    }
    wa.flush()?;
    wc.flush()?;
    let mut wf = csv::Writer::from_path(dir.join("fleet.csv"))?;
    for ev in &data.fleet.evs {
        wf.serialize(FleetRow {
            id: ev.id.clone(),
            c_max: ev.c_max,
            d_max: ev.d_max,
            e_max: ev.e_max,
            e_min: ev.e_min,
            e_init: ev.e_init,
            eta: ev.eta,
            batt_cost: ev.batt_cost,
            slope: ev.slope,
            daily_demand: Some(ev.daily_demand),
        })?;
    }
    wf.flush()?;
    Ok(())
}
