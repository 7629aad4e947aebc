//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use evagg_core::domain::{AggregatorParams, EvParams, EvUncertainty, FleetSpec, Horizon, PriceSeries};
use evagg_core::estimation::{ExpectedProfiles, Scenario};
use evagg_core::models::transport_ceiling;
use evagg_core::oracles::LowerLevelInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights are multiples of 1/16, so every objective is an exact sum.
pub fn lower_level(rng: &mut ChaCha8Rng, n: usize) -> LowerLevelInstance {
    let weights = (0..n).map(|_| rng.gen_range(-64i32..=64) as f64 / 16.0).collect();
    let mut a_lo = vec![0u8; n];
    let mut a_hi = vec![1u8; n];
    for t in 0..n {
        match rng.gen_range(0..4) {
            0 => a_lo[t] = 1,
            1 => a_hi[t] = 0,
            _ => {}
        }
    }
    let cap: u32 = a_hi.iter().map(|&a| a as u32).sum();
    let k_min = rng.gen_range(0..=cap);
    LowerLevelInstance { weights, k_min, a_lo, a_hi }
}

pub fn prices(rng: &mut ChaCha8Rng, n: usize) -> PriceSeries {
    PriceSeries::new((0..n).map(|_| rng.gen_range(0.02..0.30)).collect()).unwrap()
}

pub struct RobustCase {
    pub fleet: FleetSpec,
    pub horizon: Horizon,
    pub prices: PriceSeries,
    pub uncertainty: Vec<EvUncertainty>,
    pub demand: Vec<f64>,
    pub params: AggregatorParams,
}

/// Up to `max_evs` reference EVs over `n` hours with a random uncertainty
/// set and a daily demand the set can accommodate.
pub fn robust_case(rng: &mut ChaCha8Rng, max_evs: usize, n: usize) -> RobustCase {
    let nv = rng.gen_range(1..=max_evs);
    let horizon = Horizon::new(n).unwrap();
    let mut evs = Vec::new();
    let mut uncertainty = Vec::new();
    let mut demand = Vec::new();
    for v in 0..nv {
        let mut ev = EvParams::reference(format!("ev{v}"));
        ev.e_init = rng.gen_range(20.0..40.0);
        let mut a_lo = vec![0u8; n];
        let mut a_hi = vec![1u8; n];
        for t in 0..n {
            match rng.gen_range(0..3) {
                0 => a_lo[t] = 1,
                1 if t > 0 => a_hi[t] = 0,
                _ => {}
            }
        }
        let lo: u32 = a_lo.iter().map(|&a| a as u32).sum();
        let hi: u32 = a_hi.iter().map(|&a| a as u32).sum();
        let unc = EvUncertainty { k_min: rng.gen_range(lo..=hi), a_lo, a_hi };
        let ceiling = transport_ceiling(&ev, &unc).min(12.0);
        let xi = if ceiling > 0.0 { (rng.gen_range(0.0..ceiling) * 8.0).round() / 8.0 } else { 0.0 };
        ev.daily_demand = xi;
        demand.push(xi);
        uncertainty.push(unc);
        evs.push(ev);
    }
    let prices = prices(rng, n);
    RobustCase { fleet: FleetSpec { evs }, horizon, prices, uncertainty, demand, params: AggregatorParams::default() }
}

pub struct KnownCase {
    pub fleet: FleetSpec,
    pub horizon: Horizon,
    pub prices: PriceSeries,
    pub alpha: Vec<Vec<u8>>,
    pub tau: Vec<Vec<f64>>,
    pub params: AggregatorParams,
}

impl KnownCase {
    pub fn expected(&self) -> ExpectedProfiles {
        ExpectedProfiles {
            alpha: self.alpha.iter().map(|r| r.iter().map(|&a| a as f64).collect()).collect(),
            tau: self.tau.clone(),
        }
    }

    pub fn scenario(&self) -> Scenario {
        let e = self.expected();
        Scenario { probability: 1.0, alpha: e.alpha, tau: e.tau }
    }

    /// Uncertainty set containing only the known profile.
    pub fn certain(&self) -> Vec<EvUncertainty> {
        self.alpha
            .iter()
            .map(|a| EvUncertainty { k_min: a.iter().map(|&x| x as u32).sum(), a_lo: a.clone(), a_hi: a.clone() })
            .collect()
    }

    pub fn demand(&self) -> Vec<f64> {
        self.tau.iter().map(|r| r.iter().sum()).collect()
    }
}

/// EVs with one trip: a single block of hours away, with the consumption
/// spread over it.
pub fn known_case(rng: &mut ChaCha8Rng, max_evs: usize, n: usize) -> KnownCase {
    let nv = rng.gen_range(1..=max_evs);
    let horizon = Horizon::new(n).unwrap();
    let mut evs = Vec::new();
    let mut alpha = Vec::new();
    let mut tau = Vec::new();
    for v in 0..nv {
        let mut ev = EvParams::reference(format!("ev{v}"));
        // Enough charge to cover the trip without slack.
        ev.e_init = rng.gen_range(25.0..40.0);
        let len = rng.gen_range(0..=n / 2);
        let start = rng.gen_range(0..=n - len);
        let mut a = vec![1u8; n];
        let mut c = vec![0.0; n];
        for t in start..start + len {
            a[t] = 0;
            c[t] = (rng.gen_range(0.0..4.0) * 8.0f64).round() / 8.0;
        }
        ev.daily_demand = c.iter().sum();
        alpha.push(a);
        tau.push(c);
        evs.push(ev);
    }
    let prices = prices(rng, n);
    KnownCase { fleet: FleetSpec { evs }, horizon, prices, alpha, tau, params: AggregatorParams::default() }
}
