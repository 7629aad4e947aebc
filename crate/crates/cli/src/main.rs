//! `evagg`: day-ahead purchase plans for an EV fleet from CSV data.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evagg_core::domain::ModelKind;

use commands::{SimulateArgs, Synthetic};
use config::{FileConfig, Inputs, Tuning};
use data::parse_date;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "evagg", version, about = "Day-ahead market plans for an electric-vehicle fleet")]
struct Cli {
    /// TOML file with default values for any long option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Df,
    Sf,
    Hf,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Df => ModelKind::Deterministic,
            Model::Sf => ModelKind::Stochastic,
            Model::Hf => ModelKind::Robust,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic fleet, its history and prices as CSV files.
    GenData {
        /// Number of EVs.
        #[arg(long, default_value_t = 100)]
        evs: usize,
        /// Number of consecutive days of history.
        #[arg(long, default_value_t = 56)]
        days: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Date of the first generated day.
        #[arg(long, default_value = "2018-01-01")]
        start: String,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate each EV's availability bounds and demand for a day.
    Estimate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        tuning: Tuning,
        /// Planned date, YYYY-MM-DD.
        #[arg(long)]
        day: String,
        /// JSON output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan one day with one model.
    Solve {
        #[arg(long, value_enum)]
        model: Model,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        tuning: Tuning,
        /// Planned date, YYYY-MM-DD.
        #[arg(long)]
        day: String,
        /// Directory for the solution file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the model in LP format to this file instead of solving.
        #[arg(long)]
        export_lp: Option<PathBuf>,
    },
    /// Check a saved plan against the realised day.
    Evaluate {
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        tuning: Tuning,
        /// Defaults to the day stored with the plan.
        #[arg(long)]
        day: Option<String>,
        /// JSON output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rolling backtest over consecutive days.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        tuning: Tuning,
        /// Generate the data instead of reading it.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 100, requires = "synthetic")]
        evs: usize,
        #[arg(long, default_value_t = 56, requires = "synthetic")]
        days: usize,
        #[arg(long, default_value_t = 42, requires = "synthetic")]
        seed: u64,
        #[arg(long, default_value = "2018-01-01", requires = "synthetic")]
        start: String,
        /// First planned day; defaults to the first with a full window.
        #[arg(long)]
        first_day: Option<String>,
        /// Days to plan; defaults to the rest of the record.
        #[arg(long)]
        n_days: Option<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "df,sf,hf")]
        models: Vec<Model>,
        /// Directory for the per-day and total reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let merge = |inputs: Inputs, tuning: Tuning| (inputs.merge(&file.inputs()), tuning.merge(&file.tuning()));
    match cli.command {
        Command::GenData { evs, days, seed, start, out } => {
            commands::gen_data(evs, days, seed, parse_date(&start)?, &commands::out_dir(out, file.out.clone()))
        }
        Command::Estimate { inputs, tuning, day, out } => {
            let (inputs, tuning) = merge(inputs, tuning);
            commands::estimate(&inputs, &tuning, parse_date(&day)?, out.as_deref())
        }
        Command::Solve { model, inputs, tuning, day, out, export_lp } => {
            let (inputs, tuning) = merge(inputs, tuning);
            let out = commands::out_dir(out, file.out.clone());
            commands::solve(&inputs, &tuning, model.into(), parse_date(&day)?, &out, export_lp.as_deref())
        }
        Command::Evaluate { solution, inputs, tuning, day, out } => {
            let (inputs, tuning) = merge(inputs, tuning);
            let day = day.as_deref().map(parse_date).transpose()?;
            commands::evaluate(&inputs, &tuning, &solution, day, out.as_deref())
        }
        Command::Simulate { inputs, tuning, synthetic, evs, days, seed, start, first_day, n_days, models, out } => {
            let (inputs, tuning) = merge(inputs, tuning);
            let synthetic = match synthetic {
                true => Some(Synthetic { evs, days, seed, start: parse_date(&start)? }),
                false => None,
            };
            let models: Vec<ModelKind> = models.into_iter().map(Into::into).collect();
            let out = commands::out_dir(out, file.out.clone());
            let args = SimulateArgs {
                synthetic,
                first_day: first_day.as_deref().map(parse_date).transpose()?,
                n_days,
                models: &models,
                out: &out,
            };
            commands::simulate(&inputs, &tuning, args).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
