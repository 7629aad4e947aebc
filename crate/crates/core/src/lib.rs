//! Day-ahead dispatch of an electric-vehicle fleet: deterministic,
//! scenario-based and availability-robust market plans, the verification
//! oracles behind the robust reformulation, and a rolling backtest.

pub mod domain;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod models;
pub mod oracles;

pub use error::{CoreError, CoreResult};
