//! Configuration, sweeps, rate fits and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod rate;
pub mod runner;

pub use config::{RunConfig, Tolerances};
pub use rate::{fit_rate, RateReport};
pub use runner::{run_grid, Check, GridResult, RunRow};
