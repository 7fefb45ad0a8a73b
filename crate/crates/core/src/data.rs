//! Daily panel loading, gap filling and return transforms.
//!
//! The trading calendar is the set of dates on which the target column is
//! observed. Explanatory observations that fall on non-target dates are
//! carried onto the next target date (as-of alignment) when that date has no
//! observation of its own.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError};

/// Default bound on a column's leading-missing prefix, as a fraction of the
/// initial training window.
pub const DEFAULT_MAX_LEADING_FRACTION: f64 = 0.10;

/// Which columns of a CSV panel to load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSchema {
    /// Price series the risk forecasts are made for.
    pub target_column: String,
    /// Explanatory columns. `None` loads every non-date column.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

impl PanelSchema {
    pub fn target_only(target: impl Into<String>) -> Self {
        Self {
            target_column: target.into(),
            columns: Some(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Date-indexed panel of the target price series plus explanatory variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub dates: Vec<NaiveDate>,
    /// Column 0 is always the target.
    pub columns: Vec<Column>,
    pub target_column: String,
}

impl AlignedPanel {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<Column>, target_column: &str) -> Result<Self> {
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RiskError::InvalidArgument(
                "panel dates must be strictly increasing".into(),
            ));
        }
        if let Some(c) = columns.iter().find(|c| c.values.len() != dates.len()) {
            return Err(RiskError::InvalidArgument(format!(
                "column `{}` has {} values for {} dates",
                c.name,
                c.values.len(),
                dates.len()
            )));
        }
        let pos = columns
            .iter()
            .position(|c| c.name == target_column)
            .ok_or_else(|| RiskError::MissingColumn(target_column.to_string()))?;
        let mut columns = columns;
        let target = columns.remove(pos);
        columns.insert(0, target);
        Ok(Self {
            dates,
            columns,
            target_column: target_column.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target(&self) -> &Column {
        &self.columns[0]
    }

    /// Target prices; errors if any target value is missing.
    pub fn target_prices(&self) -> Result<Vec<f64>> {
        self.target()
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    RiskError::Degenerate(format!("target `{}` missing on {}", self.target_column, self.dates[i]))
                })
            })
            .collect()
    }

    /// Index of the first row dated on or after `date`.
    pub fn index_on_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Loads a CSV panel: header row, ISO-8601 dates in the first column, numeric
/// cells (empty for gaps) elsewhere. Rows are sorted by date; duplicates are
/// rejected. The calendar is restricted to dates where the target is observed.
pub fn load_panel(csv_path: impl AsRef<Path>, schema: &PanelSchema) -> Result<AlignedPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path.as_ref())?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(RiskError::MissingColumn(schema.target_column.clone()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .filter(|&i| i > 0)
            .ok_or_else(|| RiskError::MissingColumn(name.to_string()))
    };
    let target_idx = find(&schema.target_column)?;
    let mut selected = vec![target_idx];
    match &schema.columns {
        Some(names) => {
            for n in names.iter().filter(|n| **n != schema.target_column) {
                selected.push(find(n)?);
            }
        }
        None => selected.extend((1..headers.len()).filter(|&i| i != target_idx)),
    }

    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let raw_date = record.get(0).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| RiskError::Unparseable {
            row: row_no + 1,
            column: headers[0].to_string(),
            value: raw_date.to_string(),
        })?;
        let mut values = Vec::with_capacity(selected.len());
        for &ci in &selected {
            let cell = record.get(ci).unwrap_or("").trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                values.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(Some(v)),
                _ => {
                    return Err(RiskError::Unparseable {
                        row: row_no + 1,
                        column: headers[ci].to_string(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if rows.insert(date, values).is_some() {
            return Err(RiskError::DuplicateDate(date.to_string()));
        }
    }

    // As-of alignment onto the target calendar.
    let mut dates = Vec::with_capacity(rows.len());
    let mut data: Vec<Vec<Option<f64>>> = vec![Vec::new(); selected.len()];
    let mut pending: Vec<Option<f64>> = vec![None; selected.len()];
    for (date, values) in rows {
        if values[0].is_none() {
            for (p, v) in pending.iter_mut().zip(&values).skip(1) {
                if v.is_some() {
                    *p = *v;
                }
            }
            continue;
        }
        dates.push(date);
        for (j, v) in values.into_iter().enumerate() {
            data[j].push(v.or_else(|| pending[j].take()));
            pending[j] = None;
        }
    }

    let columns = selected
        .iter()
        .zip(data)
        .map(|(&ci, values)| Column {
            name: headers[ci].to_string(),
            values,
        })
        .collect();
    AlignedPanel::new(dates, columns, &schema.target_column)
}

/// Per-column leading-gap counts left after forward filling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillReport {
    pub leading_gaps: Vec<(String, usize)>,
}

impl FillReport {
    pub fn leading_gap(&self, column: &str) -> Option<usize> {
        self.leading_gaps.iter().find(|(n, _)| n == column).map(|(_, g)| *g)
    }

    /// Columns whose leading-missing prefix exceeds `max_fraction` of the
    /// initial training window.
    pub fn warnings(&self, training_window: usize, max_fraction: f64) -> Vec<LeadingGapWarning> {
        let limit = max_fraction * training_window as f64;
        self.leading_gaps
            .iter()
            .filter(|(_, g)| *g as f64 > limit)
            .map(|(name, g)| LeadingGapWarning {
                column: name.clone(),
                leading_missing: *g,
                fraction: *g as f64 / training_window as f64,
                max_fraction,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadingGapWarning {
    pub column: String,
    pub leading_missing: usize,
    pub fraction: f64,
    pub max_fraction: f64,
}

/// Fills every gap after a column's first observation with the most recent
/// prior value. Leading gaps are preserved and reported.
pub fn carry_forward_fill(panel: &AlignedPanel) -> Result<(AlignedPanel, FillReport)> {
    let mut columns = Vec::with_capacity(panel.columns.len());
    let mut leading_gaps = Vec::with_capacity(panel.columns.len());
    for col in &panel.columns {
        let first = col
            .values
            .iter()
            .position(Option::is_some)
            .ok_or_else(|| RiskError::EmptyColumn(col.name.clone()))?;
        let mut last = None;
        let values = col
            .values
            .iter()
            .map(|v| {
                if v.is_some() {
                    last = *v;
                }
                last
            })
            .collect();
        leading_gaps.push((col.name.clone(), first));
        columns.push(Column {
            name: col.name.clone(),
            values,
        });
    }
    let filled = AlignedPanel {
        dates: panel.dates.clone(),
        columns,
        target_column: panel.target_column.clone(),
    };
    Ok((filled, FillReport { leading_gaps }))
}

/// Ordered log returns (daily, or overlapping h-day sums) with date labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub horizon_days: usize,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, horizon_days: usize) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(RiskError::InvalidArgument(format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        if horizon_days == 0 {
            return Err(RiskError::InvalidArgument("horizon must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RiskError::InvalidArgument("non-finite return".into()));
        }
        Ok(Self {
            dates,
            values,
            horizon_days,
        })
    }

    /// Daily series with synthetic consecutive labels starting at 2000-01-01.
    /// Handy when only the values matter.
    pub fn undated(values: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..values.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
        Self::new(dates, values, 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> ReturnSeries {
        ReturnSeries {
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
            horizon_days: self.horizon_days,
        }
    }
}

/// `r_t = ln(P_t / P_{t-1})`; the return is dated by `P_t`'s date.
pub fn log_returns(dates: &[NaiveDate], prices: &[f64]) -> Result<ReturnSeries> {
    if dates.len() != prices.len() {
        return Err(RiskError::InvalidArgument(format!(
            "{} dates for {} prices",
            dates.len(),
            prices.len()
        )));
    }
    if prices.len() < 2 {
        return Err(RiskError::InsufficientData {
            needed: 2,
            have: prices.len(),
        });
    }
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
        return Err(RiskError::NonPositivePrice { index, value });
    }
    let values = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    ReturnSeries::new(dates[1..].to_vec(), values, 1)
}

/// Rolling sums of `h` consecutive daily returns, each dated by the window's
/// last day. Output length is `n - h + 1`.
pub fn overlapping_h_returns(daily: &ReturnSeries, h: usize) -> Result<ReturnSeries> {
    if h == 0 {
        return Err(RiskError::InvalidArgument("h must be >= 1".into()));
    }
    if daily.horizon_days != 1 {
        return Err(RiskError::InvalidArgument(format!(
            "expected daily returns, got horizon {}",
            daily.horizon_days
        )));
    }
    if daily.len() < h {
        return Err(RiskError::InsufficientData {
            needed: h,
            have: daily.len(),
        });
    }
    let values = overlapping_sums(&daily.values, h);
    Ok(ReturnSeries {
        dates: daily.dates[h - 1..].to_vec(),
        values,
        horizon_days: h,
    })
}

/// Value-only rolling sums; each window summed left to right.
pub fn overlapping_sums(values: &[f64], h: usize) -> Vec<f64> {
    values.windows(h).map(|w| w.iter().sum()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: f64,
    /// Raw (Pearson) kurtosis; 3 for a normal sample.
    pub kurtosis: f64,
}

/// Sample moments of a return series. `std_dev` uses the `n - 1` divisor;
/// skewness and kurtosis are the moment ratios `m3 / m2^1.5` and `m4 / m2^2`.
pub fn descriptive_stats(returns: &[f64]) -> Result<DescriptiveStats> {
    let n = returns.len();
    if n < 4 {
        return Err(RiskError::InsufficientData { needed: 4, have: n });
    }
    let nf = n as f64;
    let mean = returns.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &r in returns {
        let d = r - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        min = min.min(r);
        max = max.max(r);
    }
    if m2 <= 0.0 {
        return Err(RiskError::Degenerate(
            "zero variance: skewness and kurtosis undefined".into(),
        ));
    }
    let std_dev = (m2 / (nf - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    Ok(DescriptiveStats {
        mean,
        std_dev,
        min,
        max,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}
