//! Bounded, instrumented access to market history. Every forecast reads its
//! inputs through a [`PastView`] capped at the forecast date, and the highest
//! row actually read can be logged for a look-ahead audit.

use std::cell::Cell;
use std::ops::Range;
use std::sync::Mutex;

use chrono::NaiveDate;
use serde::Serialize;
use tailrisk_core::data::{log_returns, AlignedPanel, ReturnSeries};

use crate::error::{EngineError, Result};

/// Gap-filled panel with the target's prices and daily log returns.
#[derive(Debug, Clone)]
pub struct Market {
    pub panel: AlignedPanel,
    pub prices: Vec<f64>,
    /// `returns.values[k]` is the return into panel row `k + 1`.
    pub returns: ReturnSeries,
}

impl Market {
    pub fn new(panel: AlignedPanel) -> Result<Self> {
        let prices = panel.target_prices()?;
        let returns = log_returns(&panel.dates, &prices)?;
        Ok(Self { panel, prices, returns })
    }

    pub fn len(&self) -> usize {
        self.panel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panel.is_empty()
    }

    /// Realized h-day log return from the close before row `i` through row
    /// `i + h - 1`. This is the outcome being forecast, so it sits outside
    /// any view.
    pub fn realized(&self, i: usize, h: usize) -> Option<f64> {
        (i >= 1 && i + h <= self.len()).then(|| self.returns.values[i - 1..i - 1 + h].iter().sum())
    }

    /// A view of rows strictly before `bound`.
    pub fn view(&self, bound: usize) -> PastView<'_> {
        PastView {
            market: self,
            bound,
            max_row: Cell::new(None),
        }
    }
}

#[derive(Debug)]
pub struct PastView<'a> {
    market: &'a Market,
    bound: usize,
    max_row: Cell<Option<usize>>,
}

impl PastView<'_> {
    fn touch(&self, rows: Range<usize>) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let last = rows.end - 1;
        if last >= self.bound {
            return Err(EngineError::LookAhead {
                row: last,
                bound: self.bound,
            });
        }
        self.max_row.set(Some(self.max_row.get().map_or(last, |m| m.max(last))));
        Ok(())
    }

    /// Number of visible rows.
    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn n_columns(&self) -> usize {
        self.market.panel.columns.len()
    }

    pub fn column_name(&self, col: usize) -> &str {
        &self.market.panel.columns[col].name
    }

    /// The last `n` daily returns before the bound.
    pub fn daily_returns(&self, n: usize) -> Result<ReturnSeries> {
        if n + 1 > self.bound {
            return Err(tailrisk_core::RiskError::InsufficientData {
                needed: n,
                have: self.bound.saturating_sub(1),
            }
            .into());
        }
        self.touch(self.bound - n..self.bound)?;
        Ok(self.market.returns.slice(self.bound - 1 - n, self.bound - 1))
    }

    /// Every daily return before the bound.
    pub fn all_daily_returns(&self) -> Result<ReturnSeries> {
        self.daily_returns(self.bound.saturating_sub(1))
    }

    pub fn price(&self, row: usize) -> Result<f64> {
        self.touch(row..row + 1)?;
        Ok(self.market.prices[row])
    }

    pub fn column(&self, col: usize, rows: Range<usize>) -> Result<&[Option<f64>]> {
        self.touch(rows.clone())?;
        Ok(&self.market.panel.columns[col].values[rows])
    }

    pub fn max_row_read(&self) -> Option<usize> {
        self.max_row.get()
    }

    pub fn latest_date_read(&self) -> Option<NaiveDate> {
        self.max_row.get().map(|r| self.market.panel.dates[r])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub model: String,
    pub forecast_date: NaiveDate,
    pub latest_date_read: Option<NaiveDate>,
}

impl AuditEntry {
    pub fn is_clean(&self) -> bool {
        self.latest_date_read.is_none_or(|d| d < self.forecast_date)
    }
}

/// Collects one entry per (model, forecast date).
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
}

impl AuditLog {
    pub fn record(&self, entry: AuditEntry) {
        self.entries.lock().expect("audit lock").push(entry);
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        let mut v = self.entries.lock().expect("audit lock").clone();
        v.sort_by(|a, b| (&a.model, a.forecast_date).cmp(&(&b.model, b.forecast_date)));
        v
    }
}
