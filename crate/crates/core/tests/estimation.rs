use evagg_core::domain::{AvailabilityHistory, DayRecord, EvUncertainty};
use evagg_core::estimation::*;

/// Hours 0-5 and 21-23 always home, 9-14 always away, the rest home on
/// the first `on` of the nine uncertain hours.
fn profile(on: usize) -> DayRecord {
    let uncertain: Vec<usize> = (6..9).chain(15..21).collect();
    let mut avail = vec![0u8; 24];
    for t in (0..6).chain(21..24) {
        avail[t] = 1;
    }
    for &t in uncertain.iter().take(on) {
        avail[t] = 1;
    }
    let mut cons = vec![0.0; 24];
    cons[10] = 2.5;
    DayRecord { avail, cons }
}

fn four_weeks() -> HistoryWindow {
    // 18, 13, 14 and 11 available hours.
    HistoryWindow::new(vec![vec![profile(9), profile(4), profile(5), profile(2)]]).unwrap()
}

#[test]
fn count_is_the_floored_mean() {
    let w = four_weeks();
    let counts: Vec<u32> = w.records(0).iter().map(|r| r.available_hours()).collect();
    assert_eq!(counts, vec![18, 13, 14, 11]);
    assert_eq!(estimate_k(&w), vec![14]);
}

#[test]
fn bounds_pin_the_hours_that_never_change() {
    let (lo, hi) = estimate_bounds(&four_weeks()).remove(0);
    for t in 0..24 {
        let (l, h) = match t {
            // every week has at least two uncertain hours on
            0..=7 | 21..=23 => (1, 1),
            9..=14 => (0, 0),
            _ => (0, 1),
        };
        assert_eq!((lo[t], hi[t]), (l, h), "hour {t}");
    }
}

#[test]
fn uncertainty_set_is_valid() {
    let set = estimate_uncertainty(&four_weeks()).unwrap();
    set[0].validate(24).unwrap();
    assert_eq!(set[0].max_available(), 18);
}

#[test]
fn offset_clamps_to_the_possible_range() {
    let set = vec![EvUncertainty { k_min: 3, a_lo: vec![0; 6], a_hi: vec![1, 1, 1, 1, 0, 0] }];
    assert_eq!(offset_k(&set, -5)[0].k_min, 0);
    assert_eq!(offset_k(&set, 5)[0].k_min, 4);
    assert_eq!(offset_k(&set, 1)[0].k_min, 4);
    assert_eq!(offset_k(&set, 0), set);
}

#[test]
fn expectations_and_scenarios_agree() {
    let w = four_weeks();
    let e = expected_profiles(&w);
    let sc = build_scenarios(&w);
    assert_eq!(sc.len(), 4);
    for t in 0..24 {
        let mean: f64 = sc.iter().map(|s| s.probability * s.alpha[0][t]).sum();
        assert!((mean - e.alpha[0][t]).abs() < 1e-12);
    }
    assert_eq!(expected_daily_demand(&w), vec![2.5]);
    assert_eq!(e.tau[0][10], 2.5);
}

#[test]
fn window_takes_the_same_weekday() {
    // Day d is home exactly at hour d % 24, so each record names its day.
    let days: Vec<DayRecord> = (0..40)
        .map(|d| {
            let mut avail = vec![0u8; 24];
            avail[d % 24] = 1;
            DayRecord { avail, cons: vec![0.0; 24] }
        })
        .collect();
    let hist = AvailabilityHistory { records: vec![days] };
    let w = HistoryWindow::preceding(&hist, 30, 4).unwrap();
    let picked: Vec<usize> = w.records(0).iter().map(|r| r.avail.iter().position(|&a| a == 1).unwrap()).collect();
    assert_eq!(picked, vec![23, 16, 9, 2]);
    assert!(HistoryWindow::preceding(&hist, 27, 4).is_err());
}

#[test]
fn window_rejects_consumption_while_home() {
    let mut r = profile(2);
    r.cons[0] = 1.0;
    assert!(HistoryWindow::new(vec![vec![r]]).is_err());
}
