//! Least-squares fit of the two-index share price model
//!
//! ```text
//! p(m) = b1 * CPI1(m - lag1) + b2 * CPI2(m - lag2) + c * (t(m) - 2000) + d + e(m)
//! ```
//!
//! for one fixed pair of codes and one fixed pair of lags.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{month_range, trend_time, IndexSource, MonthKey, MonthlySeries};
use crate::linalg::{self, RCOND_THRESHOLD};

/// Number of estimated coefficients (b1, b2, c, d).
pub const N_COEF: usize = 4;

pub const DEFAULT_MIN_OBS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("unknown series code `{0}`")]
    UnknownCode(String),
    #[error("a model needs two different indices, got `{0}` twice")]
    SameCode(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("regressors are collinear (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },
    #[error("`{code}` has no value for {month}")]
    MissingMonth { code: String, month: MonthKey },
    #[error("actual series has zero variance over the overlap")]
    DegenerateVariance,
    #[error("overlap of {found} months, need at least {needed}")]
    InsufficientOverlap { found: usize, needed: usize },
}

/// Fitted (or hypothesised) model: two index codes with their lags, plus
/// coefficients. `b1`, `b2` are dollars per index unit, `c` dollars per year
/// and `d` dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub code1: String,
    pub lag1: i32,
    pub b1: f64,
    pub code2: String,
    pub lag2: i32,
    pub b2: f64,
    pub c: f64,
    pub d: f64,
}

impl ModelSpec {
    pub fn candidate(&self) -> Candidate {
        Candidate::new(&self.code1, self.lag1, &self.code2, self.lag2)
    }

    pub fn coefficients(&self) -> [f64; N_COEF] {
        [self.b1, self.b2, self.c, self.d]
    }

    /// The same model with `code1 < code2`.
    pub fn canonical(&self) -> ModelSpec {
        if self.code1 <= self.code2 {
            return self.clone();
        }
        ModelSpec {
            code1: self.code2.clone(),
            lag1: self.lag2,
            b1: self.b2,
            code2: self.code1.clone(),
            lag2: self.lag1,
            b2: self.b1,
            c: self.c,
            d: self.d,
        }
    }
}

/// A pair of codes and lags to fit, oriented so that `code1 < code2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub code1: String,
    pub lag1: i32,
    pub code2: String,
    pub lag2: i32,
}

impl Candidate {
    pub fn new(code_a: &str, lag_a: i32, code_b: &str, lag_b: i32) -> Self {
        let (code1, lag1, code2, lag2) = if code_a <= code_b {
            (code_a, lag_a, code_b, lag_b)
        } else {
            (code_b, lag_b, code_a, lag_a)
        };
        Candidate {
            code1: code1.to_string(),
            lag1,
            code2: code2.to_string(),
            lag2,
        }
    }

    pub fn same_pair(&self, other: &Candidate) -> bool {
        self.code1 == other.code1 && self.code2 == other.code2
    }
}

/// Months `start..=anchor` used as the regression sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub start: MonthKey,
    pub anchor: MonthKey,
    pub min_obs: usize,
}

impl SampleWindow {
    pub fn new(start: MonthKey, anchor: MonthKey) -> Self {
        Self {
            start,
            anchor,
            min_obs: DEFAULT_MIN_OBS,
        }
    }

    pub fn n_obs(&self) -> usize {
        (self.start.months_until(self.anchor) + 1).max(0) as usize
    }

    pub fn trend(&self) -> Vec<f64> {
        month_range(self.start, self.anchor).map(trend_time).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub residuals: MonthlySeries,
    pub ssr: f64,
    pub sterr: f64,
    pub r2: f64,
    pub n_obs: usize,
}

impl FitResult {
    /// Model prediction over the sample (actual minus residual).
    pub fn fitted(&self, price: &MonthlySeries) -> MonthlySeries {
        let values = self
            .residuals
            .iter()
            .map(|(m, e)| price.get(m).expect("price covers the fit sample") - e)
            .collect();
        MonthlySeries::new(self.residuals.start(), values).expect("finite fitted values")
    }
}

/// Regressor columns and coefficients for one candidate.
pub(crate) struct RawFit {
    pub coef: [f64; N_COEF],
    pub residuals: Vec<f64>,
    pub ssr: f64,
}

impl RawFit {
    pub fn sterr(&self) -> f64 {
        (self.ssr / (self.residuals.len() - N_COEF) as f64).sqrt()
    }
}

/// Residuals use the same expression order as [`evaluate_model`] so that
/// `actual == predicted + residual` holds to round-off.
pub(crate) fn fit_columns(y: &[f64], x1: &[f64], x2: &[f64], trend: &[f64]) -> Result<RawFit, FitError> {
    let ones = vec![1.0; y.len()];
    let ls = linalg::solve(&[x1, x2, trend, &ones], y, RCOND_THRESHOLD)
        .map_err(|s| FitError::RankDeficient { rcond: s.rcond })?;
    let coef = [ls.coef[0], ls.coef[1], ls.coef[2], ls.coef[3]];
    let [b1, b2, c, d] = coef;
    let residuals: Vec<f64> = (0..y.len())
        .map(|i| y[i] - (b1 * x1[i] + b2 * x2[i] + c * trend[i] + d))
        .collect();
    let ssr = residuals.iter().map(|e| e * e).sum();
    Ok(RawFit {
        coef,
        residuals,
        ssr,
    })
}

/// Values of `code` at `m - lag` for every sample month.
pub(crate) fn lagged_column<'a, S: IndexSource>(
    source: &'a S,
    code: &str,
    lag: i32,
    window: &SampleWindow,
) -> Result<&'a [f64], FitError> {
    let s = source
        .series(code)
        .ok_or_else(|| FitError::UnknownCode(code.to_string()))?;
    let from = window.start.add_months(-(lag as i64));
    let to = window.anchor.add_months(-(lag as i64));
    s.window(from, to).ok_or_else(|| {
        FitError::InsufficientData(format!(
            "`{code}` at lag {lag} needs {from}..{to}, has {}..{}",
            s.start(),
            s.end()
        ))
    })
}

pub(crate) fn price_window<'a>(price: &'a MonthlySeries, window: &SampleWindow) -> Result<&'a [f64], FitError> {
    if window.n_obs() < window.min_obs.max(N_COEF + 1) {
        return Err(FitError::InsufficientData(format!(
            "{} observations in {}..{}, need {}",
            window.n_obs(),
            window.start,
            window.anchor,
            window.min_obs.max(N_COEF + 1)
        )));
    }
    price.window(window.start, window.anchor).ok_or_else(|| {
        FitError::InsufficientData(format!(
            "price covers {}..{}, sample needs {}..{}",
            price.start(),
            price.end(),
            window.start,
            window.anchor
        ))
    })
}

pub(crate) fn r_squared(y: &[f64], ssr: f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return 0.0;
    }
    (1.0 - ssr / sst).clamp(0.0, 1.0)
}

/// Fit one candidate over `window` by least squares.
pub fn fit_candidate<S: IndexSource>(
    price: &MonthlySeries,
    catalog: &S,
    candidate: &Candidate,
    window: &SampleWindow,
) -> Result<FitResult, FitError> {
    if candidate.code1 == candidate.code2 {
        return Err(FitError::SameCode(candidate.code1.clone()));
    }
    let y = price_window(price, window)?;
    let x1 = lagged_column(catalog, &candidate.code1, candidate.lag1, window)?;
    let x2 = lagged_column(catalog, &candidate.code2, candidate.lag2, window)?;
    let trend = window.trend();
    let raw = fit_columns(y, x1, x2, &trend)?;
    Ok(assemble(candidate, raw, y, window))
}

pub(crate) fn assemble(candidate: &Candidate, raw: RawFit, y: &[f64], window: &SampleWindow) -> FitResult {
    let sterr = raw.sterr();
    let [b1, b2, c, d] = raw.coef;
    FitResult {
        spec: ModelSpec {
            code1: candidate.code1.clone(),
            lag1: candidate.lag1,
            b1,
            code2: candidate.code2.clone(),
            lag2: candidate.lag2,
            b2,
            c,
            d,
        },
        r2: r_squared(y, raw.ssr),
        ssr: raw.ssr,
        sterr,
        n_obs: raw.residuals.len(),
        residuals: MonthlySeries::new(window.start, raw.residuals).expect("finite residuals"),
    }
}

/// Model value at month `m`.
pub fn evaluate_model<S: IndexSource>(spec: &ModelSpec, source: &S, m: MonthKey) -> Result<f64, FitError> {
    let lookup = |code: &str, lag: i32| -> Result<f64, FitError> {
        let s = source
            .series(code)
            .ok_or_else(|| FitError::UnknownCode(code.to_string()))?;
        let at = m.add_months(-(lag as i64));
        s.get(at).ok_or_else(|| FitError::MissingMonth {
            code: code.to_string(),
            month: at,
        })
    };
    let x1 = lookup(&spec.code1, spec.lag1)?;
    let x2 = lookup(&spec.code2, spec.lag2)?;
    Ok(spec.b1 * x1 + spec.b2 * x2 + spec.c * trend_time(m) + spec.d)
}

/// Model values for every month in `from..=to`.
pub fn predict_series<S: IndexSource>(
    spec: &ModelSpec,
    source: &S,
    from: MonthKey,
    to: MonthKey,
) -> Result<MonthlySeries, FitError> {
    let values = month_range(from, to)
        .map(|m| evaluate_model(spec, source, m))
        .collect::<Result<Vec<_>, _>>()?;
    MonthlySeries::new(from, values)
        .map_err(|e| FitError::InsufficientData(e.to_string()))
}

/// Coefficient of determination of `actual` regressed on `predicted`.
pub fn actual_vs_predicted_r2(actual: &MonthlySeries, predicted: &MonthlySeries) -> Result<f64, FitError> {
    let (a, p) = match actual.overlap(predicted) {
        Some((_, a, p)) => (a, p),
        None => (&[][..], &[][..]),
    };
    if a.len() < 3 {
        return Err(FitError::InsufficientOverlap {
            found: a.len(),
            needed: 3,
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mp = p.iter().sum::<f64>() / n;
    let saa: f64 = a.iter().map(|v| (v - ma).powi(2)).sum();
    let spp: f64 = p.iter().map(|v| (v - mp).powi(2)).sum();
    let sap: f64 = a.iter().zip(p).map(|(x, y)| (x - ma) * (y - mp)).sum();
    if saa == 0.0 {
        return Err(FitError::DegenerateVariance);
    }
    if spp == 0.0 {
        return Ok(0.0);
    }
    Ok((sap * sap / (saa * spp)).clamp(0.0, 1.0))
}
