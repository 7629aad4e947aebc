//! Settings shared by the subcommands. Each can come from a flag or from
//! the TOML file passed with `--config`; flags win.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use evagg_core::domain::AggregatorParams;
use evagg_core::estimation::DEFAULT_WINDOW;
use evagg_core::models::DispatchOptions;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Inputs {
    /// Prices CSV: timestamp, eur_per_kwh.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Availability CSV: ev_id, timestamp, avail.
    #[arg(long)]
    pub availability: Option<PathBuf>,
    /// Consumption CSV: ev_id, timestamp, kwh. Missing hours are zero.
    #[arg(long)]
    pub consumption: Option<PathBuf>,
    /// Fleet CSV; defaults to the reference vehicle for every EV.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Tuning {
    /// Past same-weekday records used for estimation.
    #[arg(long)]
    pub window: Option<usize>,
    /// Feeder limit, kW.
    #[arg(long)]
    pub feeder_cap: Option<f64>,
    /// Penalty on battery slack, EUR/kWh.
    #[arg(long)]
    pub pen_balance: Option<f64>,
    /// Penalty on undelivered sales, EUR/kWh.
    #[arg(long)]
    pub pen_sale: Option<f64>,
    /// Added to every EV's minimum available-hour count.
    #[arg(long, allow_hyphen_values = true)]
    pub k_offset: Option<i64>,
    /// Fraction by which to cut the feeder limit.
    #[arg(long)]
    pub feeder_reduction: Option<f64>,
    /// Seconds allowed for branch-and-bound when the feeder binds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prices: Option<PathBuf>,
    pub availability: Option<PathBuf>,
    pub consumption: Option<PathBuf>,
    pub fleet: Option<PathBuf>,
    pub window: Option<usize>,
    pub feeder_cap: Option<f64>,
    pub pen_balance: Option<f64>,
    pub pen_sale: Option<f64>,
    pub k_offset: Option<i64>,
    pub feeder_reduction: Option<f64>,
    pub time_limit: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn inputs(&self) -> Inputs {
        Inputs {
            prices: self.prices.clone(),
            availability: self.availability.clone(),
            consumption: self.consumption.clone(),
            fleet: self.fleet.clone(),
        }
    }

    pub fn tuning(&self) -> Tuning {
        Tuning {
            window: self.window,
            feeder_cap: self.feeder_cap,
            pen_balance: self.pen_balance,
            pen_sale: self.pen_sale,
            k_offset: self.k_offset,
            feeder_reduction: self.feeder_reduction,
            time_limit: self.time_limit,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

macro_rules! fill {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Inputs {
    pub fn merge(mut self, file: &Inputs) -> Self {
        fill!(self, file, prices, availability, consumption, fleet);
        self
    }

    pub fn any(&self) -> bool {
        self.prices.is_some() || self.availability.is_some() || self.consumption.is_some() || self.fleet.is_some()
    }
}

pub fn required<'a>(field: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    field.as_deref().ok_or_else(|| CliError::Validation(format!("--{flag} is required")))
}

impl Tuning {
    pub fn merge(mut self, file: &Tuning) -> Self {
        fill!(self, file, window, feeder_cap, pen_balance, pen_sale, k_offset, feeder_reduction, time_limit);
        self
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or(DEFAULT_WINDOW)
    }

    pub fn params(&self) -> CliResult<AggregatorParams> {
        let d = AggregatorParams::default();
        let p = AggregatorParams {
            feeder_cap: self.feeder_cap.unwrap_or(d.feeder_cap),
            pen_balance: self.pen_balance.unwrap_or(d.pen_balance),
            pen_sale: self.pen_sale.unwrap_or(d.pen_sale),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dispatch(&self) -> CliResult<DispatchOptions> {
        let mut o = DispatchOptions::default();
        if let Some(s) = self.time_limit {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CliError::Validation(format!("time limit {s} must be a positive number of seconds")));
            }
            o.coupled_time_limit = Some(Duration::from_secs_f64(s));
        }
        Ok(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_fill_gaps_only() {
        let file: FileConfig = toml::from_str("window = 3\nfeeder_cap = 50.0\nprices = \"p.csv\"\nout = \"o\"").unwrap();
        let flags = Tuning { feeder_cap: Some(10.0), ..Default::default() };
        let t = flags.merge(&file.tuning());
        assert_eq!(t.window, Some(3));
        assert_eq!(t.feeder_cap, Some(10.0));
        assert_eq!(Inputs::default().merge(&file.inputs()).prices, Some(PathBuf::from("p.csv")));
        assert_eq!(file.out, Some(PathBuf::from("o")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("windw = 3").is_err());
    }
}
