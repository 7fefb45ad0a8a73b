//! Rolling 10-day expected shortfall and stressed expected shortfall
//! forecasting: data preparation, innovation laws, volatility models,
//! VaR/ES estimators, stressed windows, backtests and error scores.

pub mod backtests;
pub mod data;
pub mod distributions;
pub mod error;
pub mod numeric;
pub mod risk;
pub mod scores;
pub mod stressed;
pub mod volatility;

pub use error::{Result, RiskError};
