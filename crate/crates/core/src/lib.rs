//! Hierarchical forecasting with clustered middle levels, ETS base forecasts,
//! trace-minimization reconciliation and rank-based evaluation.

pub mod backtest;
pub mod baseforecast;
pub mod cluster;
pub mod combine;
pub mod distance;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod optim;
pub mod panel;
pub mod permute;
pub mod reconcile;
pub mod represent;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
