//! Monthly time-series primitives and catalog ingestion.
//!
//! Every series is keyed by calendar month. Alignment between two series is
//! always done through [`MonthKey`], never through array position, so series
//! with different start months cannot silently drift against each other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid month `{0}` (expected YYYY-MM with month 01..12)")]
    InvalidMonth(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: date {date} does not follow {previous} by exactly one month")]
    NonMonotoneDates {
        line: usize,
        previous: MonthKey,
        date: MonthKey,
    },
    #[error("column `{code}` has an empty cell at {month} inside its data span")]
    InteriorGap { code: String, month: MonthKey },
    #[error("duplicate series code `{0}`")]
    DuplicateCode(String),
    #[error("header must start with `date` followed by at least one non-empty code")]
    BadHeader,
    #[error("line {line}: cannot parse `{value}` as a finite number")]
    BadNumber { line: usize, value: String },
    #[error("column `{0}` has no values")]
    EmptyColumn(String),
    #[error("input has no data rows")]
    NoRows,
    #[error("catalog needs at least two series, got {0}")]
    CatalogTooSmall(usize),
    #[error("series must be non-empty")]
    EmptySeries,
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("series has {len} values, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("window {from}..{to} does not intersect the series span")]
    EmptyIntersection { from: MonthKey, to: MonthKey },
    #[error("maximum over the window is {0}, must be positive")]
    NonPositivePeak(f64),
    #[error("csv: {0}")]
    Csv(String),
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthKey {
    year: i32,
    month: u8,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self, DataError> {
        if !(1..=12).contains(&month) {
            return Err(DataError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn add_months(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: MonthKey) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::InvalidMonth(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthKey::new(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for MonthKey {
    type Error = DataError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MonthKey> for String {
    fn from(m: MonthKey) -> String {
        m.to_string()
    }
}

/// Inclusive iterator over `from..=to`.
pub fn month_range(from: MonthKey, to: MonthKey) -> impl Iterator<Item = MonthKey> {
    (from.ordinal()..=to.ordinal()).map(MonthKey::from_ordinal)
}

/// Trend regressor in fractional years since January 2000.
pub fn trend_time(m: MonthKey) -> f64 {
    (m.year as f64 - 2000.0) + (m.month as f64 - 1.0) / 12.0
}

/// Contiguous monthly series; `values[k]` belongs to `start + k` months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    start: MonthKey,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: MonthKey, values: Vec<f64>) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite(i));
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> MonthKey {
        self.start
    }

    pub fn end(&self) -> MonthKey {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: MonthKey) -> Option<f64> {
        let k = self.start.months_until(m);
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }

    pub fn covers(&self, from: MonthKey, to: MonthKey) -> bool {
        from <= to && self.start <= from && to <= self.end()
    }

    /// Values for `from..=to`, or `None` when the span is not fully covered.
    pub fn window(&self, from: MonthKey, to: MonthKey) -> Option<&[f64]> {
        if !self.covers(from, to) {
            return None;
        }
        let a = self.start.months_until(from) as usize;
        let b = self.start.months_until(to) as usize;
        Some(&self.values[a..=b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthKey, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.start.add_months(k as i64), v))
    }

    /// Calendar-aligned overlap of two series, as paired value slices.
    pub fn overlap<'a>(&'a self, other: &'a MonthlySeries) -> Option<(MonthKey, &'a [f64], &'a [f64])> {
        let from = self.start.max(other.start);
        let to = self.end().min(other.end());
        if from > to {
            return None;
        }
        Some((from, self.window(from, to)?, other.window(from, to)?))
    }
}

/// Anything that can hand out index series by code: a historical catalog or
/// a scenario path.
pub trait IndexSource {
    fn series(&self, code: &str) -> Option<&MonthlySeries>;
}

/// Named pool of CPI series, ordered by code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpiCatalog {
    entries: BTreeMap<String, MonthlySeries>,
}

impl CpiCatalog {
    pub fn new(entries: BTreeMap<String, MonthlySeries>) -> Result<Self, DataError> {
        if entries.len() < 2 {
            return Err(DataError::CatalogTooSmall(entries.len()));
        }
        if entries.keys().any(|k| k.is_empty()) {
            return Err(DataError::BadHeader);
        }
        Ok(Self { entries })
    }

    pub fn from_columns(columns: Vec<(String, MonthlySeries)>) -> Result<Self, DataError> {
        let mut entries = BTreeMap::new();
        for (code, s) in columns {
            if entries.insert(code.clone(), s).is_some() {
                return Err(DataError::DuplicateCode(code));
            }
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, code: &str) -> Option<&MonthlySeries> {
        self.entries.get(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &MonthlySeries)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Latest month for which any series has data.
    pub fn latest_month(&self) -> MonthKey {
        self.entries
            .values()
            .map(MonthlySeries::end)
            .max()
            .expect("catalog holds at least two series")
    }

    pub fn to_csv(&self) -> String {
        write_series_csv(self.iter())
    }
}

impl IndexSource for CpiCatalog {
    fn series(&self, code: &str) -> Option<&MonthlySeries> {
        self.entries.get(code)
    }
}

/// Parse a wide `date,CODE,...` CSV into its columns, in header order.
///
/// Columns may start and end at different months (leading and trailing
/// empty cells); an empty cell inside a column's span is an error.
pub fn parse_series_csv(text: &str) -> Result<Vec<(String, MonthlySeries)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = records
        .next()
        .ok_or(DataError::BadHeader)?
        .map_err(|e| DataError::Csv(e.to_string()))?;
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(DataError::BadHeader);
    }
    let codes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if codes.iter().any(String::is_empty) {
        return Err(DataError::BadHeader);
    }
    for (i, c) in codes.iter().enumerate() {
        if codes[..i].contains(c) {
            return Err(DataError::DuplicateCode(c.clone()));
        }
    }

    let mut first: Option<MonthKey> = None;
    let mut prev: Option<MonthKey> = None;
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); codes.len()];
    for rec in records {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(DataError::MalformedRow {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let date: MonthKey = rec[0].parse()?;
        if let Some(p) = prev {
            if date != p.add_months(1) {
                return Err(DataError::NonMonotoneDates {
                    line,
                    previous: p,
                    date,
                });
            }
        }
        first.get_or_insert(date);
        prev = Some(date);
        for (col, field) in cells.iter_mut().zip(rec.iter().skip(1)) {
            if field.is_empty() {
                col.push(None);
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => col.push(Some(v)),
                _ => {
                    return Err(DataError::BadNumber {
                        line,
                        value: field.to_string(),
                    })
                }
            }
        }
    }
    let first = first.ok_or(DataError::NoRows)?;

    codes
        .into_iter()
        .zip(cells)
        .map(|(code, col)| {
            let lo = col.iter().position(Option::is_some);
            let hi = col.iter().rposition(Option::is_some);
            let (lo, hi) = match (lo, hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(DataError::EmptyColumn(code)),
            };
            let mut values = Vec::with_capacity(hi - lo + 1);
            for (k, cell) in col[lo..=hi].iter().enumerate() {
                match cell {
                    Some(v) => values.push(*v),
                    None => {
                        return Err(DataError::InteriorGap {
                            code,
                            month: first.add_months((lo + k) as i64),
                        })
                    }
                }
            }
            let series = MonthlySeries::new(first.add_months(lo as i64), values)?;
            Ok((code, series))
        })
        .collect()
}

pub fn parse_catalog_csv(text: &str) -> Result<CpiCatalog, DataError> {
    CpiCatalog::from_columns(parse_series_csv(text)?)
}

/// Parse a single-column price file (`date,TICKER`).
pub fn parse_price_csv(text: &str) -> Result<(String, MonthlySeries), DataError> {
    let mut cols = parse_series_csv(text)?;
    if cols.len() != 1 {
        return Err(DataError::MalformedRow {
            line: 1,
            expected: 2,
            found: cols.len() + 1,
        });
    }
    Ok(cols.remove(0))
}

/// Write columns in the wide CSV format, padding with empty cells outside
/// each column's span.
pub fn write_series_csv<'a, I>(columns: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a MonthlySeries)>,
{
    let columns: Vec<_> = columns.into_iter().collect();
    let mut out = String::from("date");
    for (code, _) in &columns {
        out.push(',');
        out.push_str(code);
    }
    out.push('\n');
    let (Some(from), Some(to)) = (
        columns.iter().map(|(_, s)| s.start()).min(),
        columns.iter().map(|(_, s)| s.end()).max(),
    ) else {
        return out;
    };
    for m in month_range(from, to) {
        out.push_str(&m.to_string());
        for (_, s) in &columns {
            out.push(',');
            if let Some(v) = s.get(m) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}

/// Shift a series so that its value at month `m` equals `s(m - tau)`.
/// Positive `tau` lags the series behind the price month, negative leads it.
pub fn lag_shift(s: &MonthlySeries, tau: i64) -> MonthlySeries {
    MonthlySeries {
        start: s.start.add_months(tau),
        values: s.values.clone(),
    }
}

pub fn first_difference(s: &MonthlySeries) -> Result<MonthlySeries, DataError> {
    if s.len() < 2 {
        return Err(DataError::TooShort {
            len: s.len(),
            min: 2,
        });
    }
    let values = s.values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(MonthlySeries {
        start: s.start.add_months(1),
        values,
    })
}

/// Divide the whole series by its maximum over `from..=to`.
pub fn normalize_to_peak(
    s: &MonthlySeries,
    from: MonthKey,
    to: MonthKey,
) -> Result<MonthlySeries, DataError> {
    let lo = from.max(s.start());
    let hi = to.min(s.end());
    let window = if lo <= hi { s.window(lo, hi) } else { None };
    let window = window.ok_or(DataError::EmptyIntersection { from, to })?;
    let peak = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return Err(DataError::NonPositivePeak(peak));
    }
    Ok(MonthlySeries {
        start: s.start,
        values: s.values.iter().map(|v| v / peak).collect(),
    })
}

/// Maximum usable lead in months for a sample ending at `anchor`.
pub fn lead_cap(max_lead: u32, latest_cpi: MonthKey, anchor: MonthKey) -> u32 {
    anchor.months_until(latest_cpi).clamp(0, max_lead as i64) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCheck {
    pub code: String,
    pub required_from: MonthKey,
    pub required_to: MonthKey,
    pub available_from: MonthKey,
    pub available_to: MonthKey,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub start: MonthKey,
    pub anchor: MonthKey,
    pub allowed_lead: u32,
    pub price_ok: bool,
    pub cpi: Vec<CoverageCheck>,
}

impl WindowReport {
    pub fn passes(&self) -> bool {
        self.price_ok && self.cpi.iter().all(|c| c.ok)
    }

    pub fn failing_codes(&self) -> impl Iterator<Item = &str> {
        self.cpi.iter().filter(|c| !c.ok).map(|c| c.code.as_str())
    }
}

/// Check that every CPI covers `[start - max_lag, anchor + allowed_lead]`
/// and the price covers `[start, anchor]`.
pub fn validate_window(
    catalog: &CpiCatalog,
    price: &MonthlySeries,
    start: MonthKey,
    anchor: MonthKey,
    max_lag: u32,
    max_lead: u32,
) -> WindowReport {
    let allowed_lead = lead_cap(max_lead, catalog.latest_month(), anchor);
    let required_from = start.add_months(-(max_lag as i64));
    let required_to = anchor.add_months(allowed_lead as i64);
    let cpi = catalog
        .iter()
        .map(|(code, s)| CoverageCheck {
            code: code.to_string(),
            required_from,
            required_to,
            available_from: s.start(),
            available_to: s.end(),
            ok: s.covers(required_from, required_to),
        })
        .collect();
    WindowReport {
        start,
        anchor,
        allowed_lead,
        price_ok: start <= anchor && price.covers(start, anchor),
        cpi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk(s: &str) -> MonthKey {
        s.parse().unwrap()
    }

    #[test]
    fn month_key_parse_and_order() {
        assert_eq!(mk("2003-07").to_string(), "2003-07");
        assert!(mk("2003-12") < mk("2004-01"));
        assert_eq!(mk("2003-12").add_months(1), mk("2004-01"));
        assert_eq!(mk("2000-01").add_months(-1), mk("1999-12"));
        assert_eq!(mk("2003-07").months_until(mk("2012-10")), 111);
        for bad in ["2003-13", "2003-00", "03-07", "2003/07", "2003-7"] {
            assert!(bad.parse::<MonthKey>().is_err(), "{bad}");
        }
    }

    #[test]
    fn trend_time_values() {
        assert_eq!(trend_time(mk("2000-01")), 0.0);
        assert_eq!(trend_time(mk("2012-10")), 12.75);
        assert_eq!(trend_time(mk("1999-07")), -0.5);
    }

    #[test]
    fn parse_two_columns() {
        let cat = parse_catalog_csv("date,F,FB\n2003-07,180.3,179.9\n2003-08,181.0,180.5\n").unwrap();
        assert_eq!(cat.len(), 2);
        let f = cat.get("F").unwrap();
        assert_eq!(f.start(), mk("2003-07"));
        assert_eq!(f.values(), &[180.3, 181.0]);
        assert_eq!(cat.get("FB").unwrap().values(), &[179.9, 180.5]);
    }

    #[test]
    fn parse_rejects_skipped_month() {
        let err = parse_catalog_csv("date,F,FB\n2003-07,1,2\n2003-09,1,2\n").unwrap_err();
        assert!(matches!(err, DataError::NonMonotoneDates { .. }), "{err:?}");
    }

    #[test]
    fn parse_rejects_duplicate_code() {
        let err = parse_catalog_csv("date,F,F\n2003-07,1,2\n").unwrap_err();
        assert_eq!(err, DataError::DuplicateCode("F".into()));
    }

    #[test]
    fn parse_rejects_wrong_column_count() {
        let err = parse_catalog_csv("date,F,FB\n2003-07,1,2\n2003-08,1\n").unwrap_err();
        assert!(matches!(err, DataError::MalformedRow { expected: 3, found: 2, .. }));
    }

    #[test]
    fn parse_trims_edges_but_rejects_interior_gap() {
        let cat = parse_catalog_csv("date,A,B\n2003-07,,1\n2003-08,2,2\n2003-09,3,\n").unwrap();
        assert_eq!(cat.get("A").unwrap().start(), mk("2003-08"));
        assert_eq!(cat.get("B").unwrap().end(), mk("2003-08"));

        let err = parse_catalog_csv("date,A,B\n2003-07,1,1\n2003-08,,2\n2003-09,3,3\n").unwrap_err();
        assert_eq!(
            err,
            DataError::InteriorGap {
                code: "A".into(),
                month: mk("2003-08")
            }
        );
    }

    #[test]
    fn csv_round_trip_with_ragged_spans() {
        let text = "date,A,B\n2003-07,,1.5\n2003-08,2.25,2\n2003-09,-3,\n";
        let cat = parse_catalog_csv(text).unwrap();
        assert_eq!(cat.to_csv(), text);
        assert_eq!(parse_catalog_csv(&cat.to_csv()).unwrap(), cat);
    }

    #[test]
    fn lag_shift_examples() {
        let s = MonthlySeries::new(mk("2003-07"), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(lag_shift(&s, 0), s);
        let l = lag_shift(&s, 3);
        assert_eq!(l.start(), mk("2003-10"));
        assert_eq!(l.get(mk("2003-10")), s.get(mk("2003-07")));
        assert_eq!(lag_shift(&s, -2).start(), mk("2003-05"));
    }

    #[test]
    fn first_difference_examples() {
        let s = MonthlySeries::new(mk("2003-07"), vec![1.0, 2.0, 4.0]).unwrap();
        let d = first_difference(&s).unwrap();
        assert_eq!(d.values(), &[1.0, 2.0]);
        assert_eq!(d.start(), mk("2003-08"));
        let c = MonthlySeries::new(mk("2003-07"), vec![5.0; 4]).unwrap();
        assert!(first_difference(&c).unwrap().values().iter().all(|&v| v == 0.0));
        let one = MonthlySeries::new(mk("2003-07"), vec![5.0]).unwrap();
        assert_eq!(first_difference(&one), Err(DataError::TooShort { len: 1, min: 2 }));
    }

    #[test]
    fn normalize_examples() {
        let s = MonthlySeries::new(mk("2003-07"), vec![2.0, 4.0, 3.0]).unwrap();
        let n = normalize_to_peak(&s, mk("2003-01"), mk("2009-12")).unwrap();
        assert_eq!(n.values(), &[0.5, 1.0, 0.75]);
        let neg = MonthlySeries::new(mk("2003-07"), vec![-2.0, -4.0]).unwrap();
        assert!(matches!(
            normalize_to_peak(&neg, mk("2003-01"), mk("2009-12")),
            Err(DataError::NonPositivePeak(_))
        ));
        assert!(matches!(
            normalize_to_peak(&s, mk("2010-01"), mk("2010-12")),
            Err(DataError::EmptyIntersection { .. })
        ));
    }

    fn flat(start: &str, end: &str) -> MonthlySeries {
        let (a, b) = (mk(start), mk(end));
        MonthlySeries::new(a, vec![100.0; a.months_until(b) as usize + 1]).unwrap()
    }

    #[test]
    fn validate_window_examples() {
        let cat = CpiCatalog::from_columns(vec![
            ("F".into(), flat("2002-08", "2012-10")),
            ("ORPR".into(), flat("2002-08", "2012-10")),
        ])
        .unwrap();
        let price = flat("2003-07", "2012-10");
        let r = validate_window(&cat, &price, mk("2003-07"), mk("2012-10"), 11, 8);
        assert!(r.passes());
        assert_eq!(r.allowed_lead, 0);

        let r = validate_window(&cat, &price, mk("2003-07"), mk("2012-03"), 11, 8);
        assert_eq!(r.allowed_lead, 7);
        assert!(r.passes());

        let cat = CpiCatalog::from_columns(vec![
            ("F".into(), flat("2002-08", "2012-10")),
            ("LATE".into(), flat("2003-01", "2012-10")),
        ])
        .unwrap();
        let r = validate_window(&cat, &price, mk("2003-07"), mk("2012-10"), 11, 8);
        assert!(!r.passes());
        assert_eq!(r.failing_codes().collect::<Vec<_>>(), vec!["LATE"]);
    }

    #[test]
    fn catalog_needs_two_series() {
        let err = CpiCatalog::from_columns(vec![("F".into(), flat("2002-08", "2002-09"))]);
        assert_eq!(err, Err(DataError::CatalogTooSmall(1)));
    }
}
