//! Amalgamated stressed windows: the `window_len` lowest daily returns
//! observed before the forecast date, kept in chronological order and then
//! treated as one consecutive series.

use chrono::NaiveDate;

use crate::data::{overlapping_h_returns, ReturnSeries};
use crate::error::{Result, RiskError};

#[derive(Debug, Clone, PartialEq)]
pub struct StressedWindow {
    pub forecast_date: NaiveDate,
    pub member_dates: Vec<NaiveDate>,
    pub member_returns: Vec<f64>,
}

impl StressedWindow {
    pub fn len(&self) -> usize {
        self.member_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_returns.is_empty()
    }

    /// Members as a daily series (member dates as labels).
    pub fn daily(&self) -> ReturnSeries {
        ReturnSeries {
            dates: self.member_dates.clone(),
            values: self.member_returns.clone(),
            horizon_days: 1,
        }
    }

    /// Overlapping h-day sums over the members taken as consecutive days.
    pub fn overlapping(&self, h: usize) -> Result<ReturnSeries> {
        overlapping_h_returns(&self.daily(), h)
    }
}

/// Selects the `window_len` most negative daily returns dated strictly before
/// `forecast_date`. Ties go to the more recent day.
pub fn build_stressed_window(
    history: &ReturnSeries,
    forecast_date: NaiveDate,
    window_len: usize,
) -> Result<StressedWindow> {
    if history.horizon_days != 1 {
        return Err(RiskError::InvalidArgument(
            "stressed windows are built from daily returns".into(),
        ));
    }
    let available = history.dates.partition_point(|d| *d < forecast_date);
    if available < window_len || window_len == 0 {
        return Err(RiskError::InsufficientData {
            needed: window_len.max(1),
            have: available,
        });
    }
    let values = &history.values[..available];
    let mut order: Vec<usize> = (0..available).collect();
    let rank = |a: &usize, b: &usize| values[*a].total_cmp(&values[*b]).then(b.cmp(a));
    if window_len < available {
        order.select_nth_unstable_by(window_len - 1, rank);
        order.truncate(window_len);
    }
    order.sort_unstable();
    Ok(StressedWindow {
        forecast_date,
        member_dates: order.iter().map(|&i| history.dates[i]).collect(),
        member_returns: order.iter().map(|&i| values[i]).collect(),
    })
}

/// Routes the stressed window's overlapping h-day series through `estimator`,
/// the same estimator used for the ordinary window.
pub fn stressed_var_es<T, F>(window: &StressedWindow, horizon_days: usize, estimator: F) -> Result<T>
where
    F: FnOnce(&ReturnSeries) -> Result<T>,
{
    let series = window.overlapping(horizon_days)?;
    estimator(&series)
}
