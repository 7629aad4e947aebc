//! Turning past availability and consumption into model inputs.

use crate::domain::{AvailabilityHistory, DayRecord, EvUncertainty, UncertaintySet};
use crate::error::{CoreError, CoreResult};

pub const DEFAULT_WINDOW: usize = 4;
pub const DAYS_PER_WEEK: usize = 7;

/// The most recent same-weekday records of every EV, `[ev][day]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    records: Vec<Vec<DayRecord>>,
    n_periods: usize,
}

impl HistoryWindow {
    pub fn new(records: Vec<Vec<DayRecord>>) -> CoreResult<Self> {
        let Some(first) = records.first() else {
            return Err(CoreError::Validation("history window has no EVs".into()));
        };
        let n_days = first.len();
        if n_days == 0 {
            return Err(CoreError::Validation("history window has no days".into()));
        }
        let n_periods = first[0].avail.len();
        for (v, days) in records.iter().enumerate() {
            if days.len() != n_days {
                return Err(CoreError::Validation(format!("EV {v}: {} window days, expected {n_days}", days.len())));
            }
            for (d, rec) in days.iter().enumerate() {
                rec.validate(n_periods)
                    .map_err(|e| CoreError::Validation(format!("EV {v}, window day {d}: {e}")))?;
            }
        }
        Ok(HistoryWindow { records, n_periods })
    }

    /// Window for `target_day` built from the `len` previous same weekdays.
    pub fn preceding(history: &AvailabilityHistory, target_day: usize, len: usize) -> CoreResult<Self> {
        if len == 0 {
            return Err(CoreError::Validation("window length must be at least 1".into()));
        }
        if target_day < len * DAYS_PER_WEEK {
            return Err(CoreError::Validation(format!(
                "day {target_day} lacks {len} prior same-weekday records"
            )));
        }
        let records = history
            .records
            .iter()
            .map(|days| (1..=len).map(|k| days[target_day - k * DAYS_PER_WEEK].clone()).collect())
            .collect();
        HistoryWindow::new(records)
    }

    pub fn n_evs(&self) -> usize {
        self.records.len()
    }

    pub fn n_days(&self) -> usize {
        self.records[0].len()
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn records(&self, ev: usize) -> &[DayRecord] {
        &self.records[ev]
    }
}

/// Minimum available-hour count: floor of the mean over the window.
pub fn estimate_k(window: &HistoryWindow) -> Vec<u32> {
    let n = window.n_days() as u32;
    window
        .records
        .iter()
        .map(|days| days.iter().map(|r| r.available_hours()).sum::<u32>() / n)
        .collect()
}

/// Per-period availability bounds: one if every day was plugged in (lower)
/// or if any day was (upper).
pub fn estimate_bounds(window: &HistoryWindow) -> Vec<(Vec<u8>, Vec<u8>)> {
    window
        .records
        .iter()
        .map(|days| {
            let mut lo = vec![1u8; window.n_periods];
            let mut hi = vec![0u8; window.n_periods];
            for rec in days {
                for t in 0..window.n_periods {
                    lo[t] *= rec.avail[t];
                    hi[t] = 1 - (1 - hi[t]) * (1 - rec.avail[t]);
                }
            }
            (lo, hi)
        })
        .collect()
}

pub fn estimate_uncertainty(window: &HistoryWindow) -> CoreResult<UncertaintySet> {
    let set: UncertaintySet = estimate_k(window)
        .into_iter()
        .zip(estimate_bounds(window))
        .map(|(k_min, (a_lo, a_hi))| EvUncertainty { k_min, a_lo, a_hi })
        .collect();
    for (v, u) in set.iter().enumerate() {
        u.validate(window.n_periods)
            .map_err(|e| CoreError::Validation(format!("EV {v}: {e}")))?;
    }
    Ok(set)
}

/// Shifts every `k_min` by `delta`, clamped to what each EV's upper bounds
/// can deliver.
pub fn offset_k(set: &UncertaintySet, delta: i64) -> UncertaintySet {
    set.iter()
        .map(|u| {
            let k = (u.k_min as i64 + delta).clamp(0, u.max_available() as i64) as u32;
            EvUncertainty { k_min: k, ..u.clone() }
        })
        .collect()
}

/// Mean availability and consumption per EV and period.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedProfiles {
    pub alpha: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
}

pub fn expected_profiles(window: &HistoryWindow) -> ExpectedProfiles {
    let n = window.n_days() as f64;
    let mut alpha = Vec::with_capacity(window.n_evs());
    let mut tau = Vec::with_capacity(window.n_evs());
    for days in &window.records {
        let a = (0..window.n_periods)
            .map(|t| days.iter().map(|r| r.avail[t] as f64).sum::<f64>() / n)
            .collect();
        let c = (0..window.n_periods)
            .map(|t| days.iter().map(|r| r.cons[t]).sum::<f64>() / n)
            .collect();
        alpha.push(a);
        tau.push(c);
    }
    ExpectedProfiles { alpha, tau }
}

/// One equiprobable scenario per window day, `[ev][period]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub probability: f64,
    pub alpha: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
}

pub fn build_scenarios(window: &HistoryWindow) -> Vec<Scenario> {
    let n = window.n_days();
    (0..n)
        .map(|d| Scenario {
            probability: 1.0 / n as f64,
            alpha: window
                .records
                .iter()
                .map(|days| days[d].avail.iter().map(|&a| a as f64).collect())
                .collect(),
            tau: window.records.iter().map(|days| days[d].cons.clone()).collect(),
        })
        .collect()
}

pub fn expected_daily_demand(window: &HistoryWindow) -> Vec<f64> {
    let n = window.n_days() as f64;
    window
        .records
        .iter()
        .map(|days| days.iter().map(|r| r.total_consumption()).sum::<f64>() / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(avail: &[u8], cons: &[f64]) -> DayRecord {
        DayRecord { avail: avail.to_vec(), cons: cons.to_vec() }
    }

    fn window_with_counts(counts: &[usize]) -> HistoryWindow {
        let days = counts
            .iter()
            .map(|&k| {
                let avail: Vec<u8> = (0..24).map(|t| u8::from(t < k)).collect();
                day(&avail, &[0.0; 24])
            })
            .collect();
        HistoryWindow::new(vec![days]).unwrap()
    }

    #[test]
    fn k_is_floor_of_mean() {
        assert_eq!(estimate_k(&window_with_counts(&[18, 13, 14, 11])), vec![14]);
        assert_eq!(estimate_k(&window_with_counts(&[12, 12, 12, 12])), vec![12]);
        assert_eq!(estimate_k(&window_with_counts(&[5, 6])), vec![5]);
    }

    #[test]
    fn bounds_and_means_at_one_hour() {
        let w = HistoryWindow::new(vec![vec![
            day(&[1, 1, 1], &[0.0, 0.0, 0.0]),
            day(&[1, 0, 0], &[0.0, 4.0, 0.0]),
            day(&[1, 1, 0], &[0.0, 0.0, 2.0]),
            day(&[1, 0, 0], &[0.0, 2.0, 2.0]),
        ]])
        .unwrap();
        let (lo, hi) = &estimate_bounds(&w)[0];
        assert_eq!(lo, &vec![1, 0, 0]);
        assert_eq!(hi, &vec![1, 1, 1]);
        let prof = expected_profiles(&w);
        assert_eq!(prof.alpha[0], vec![1.0, 0.5, 0.25]);
        assert_eq!(prof.tau[0][1], 1.5);
        assert_eq!(expected_daily_demand(&w), vec![2.5]);
    }

    #[test]
    fn consumption_mean() {
        let w = HistoryWindow::new(vec![vec![
            day(&[0], &[4.0]),
            day(&[0], &[0.0]),
            day(&[0], &[2.0]),
            day(&[0], &[2.0]),
        ]])
        .unwrap();
        assert_eq!(expected_profiles(&w).tau[0][0], 2.0);
        let (lo, hi) = &estimate_bounds(&w)[0];
        assert_eq!((lo[0], hi[0]), (0, 0));
    }

    #[test]
    fn scenarios_are_equiprobable_copies() {
        let w = window_with_counts(&[3, 5, 7, 9]);
        let sc = build_scenarios(&w);
        assert_eq!(sc.len(), 4);
        assert!(sc.iter().all(|s| s.probability == 0.25));
        assert_eq!(sc[1].alpha[0].iter().sum::<f64>(), 5.0);
        let single = build_scenarios(&window_with_counts(&[4]));
        assert_eq!(single[0].probability, 1.0);
    }

    #[test]
    fn offset_is_clamped() {
        let set = vec![EvUncertainty { k_min: 3, a_lo: vec![0; 6], a_hi: vec![1, 1, 1, 1, 0, 0] }];
        assert_eq!(offset_k(&set, -5)[0].k_min, 0);
        assert_eq!(offset_k(&set, 5)[0].k_min, 4);
        assert_eq!(offset_k(&set, 1)[0].k_min, 4);
    }

    #[test]
    fn empty_window_is_rejected() {
        assert!(HistoryWindow::new(vec![]).is_err());
        assert!(HistoryWindow::new(vec![vec![]]).is_err());
    }
}
