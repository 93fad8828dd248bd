//! Correlation tables, augmented Dickey-Fuller and residual-based
//! (Engle-Granger) cointegration tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{lag_shift, MonthlySeries};
use crate::linalg::{self, RCOND_THRESHOLD};

pub const MIN_CC_OVERLAP: usize = 24;
pub const MIN_ADF_OBS: usize = 30;
pub const MIN_COINT_OVERLAP: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("overlap of {found} months, need at least {needed}")]
    InsufficientOverlap { found: usize, needed: usize },
    #[error("series has zero variance on the overlap")]
    DegenerateVariance,
    #[error("{found} usable observations after lag construction, need at least {needed}")]
    TooShort { found: usize, needed: usize },
    #[error("series is constant or its test regression is singular")]
    DegenerateSeries,
}

fn pearson_slices(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation over the calendar-aligned overlap.
pub fn pearson_cc(a: &MonthlySeries, b: &MonthlySeries) -> Result<f64, StatsError> {
    let (x, y) = match a.overlap(b) {
        Some((_, x, y)) => (x, y),
        None => (&[][..], &[][..]),
    };
    if x.len() < MIN_CC_OVERLAP {
        return Err(StatsError::InsufficientOverlap {
            found: x.len(),
            needed: MIN_CC_OVERLAP,
        });
    }
    pearson_slices(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagMax {
    pub cc: f64,
    /// `b` shifted by this many months (see [`lag_shift`]).
    pub shift: i32,
}

/// Correlation of `a(m)` with `b(m - s)` for `|s| <= max_shift`, keeping the
/// signed value with the largest magnitude. Ties go to the smaller `|s|`,
/// then to the negative shift.
pub fn lag_scan_cc(a: &MonthlySeries, b: &MonthlySeries, max_shift: u32) -> Result<LagMax, StatsError> {
    let mut best = LagMax {
        cc: pearson_cc(a, b)?,
        shift: 0,
    };
    for k in 1..=max_shift as i32 {
        for s in [-k, k] {
            let cc = pearson_cc(a, &lag_shift(b, s as i64))?;
            if cc.abs() > best.cc.abs() {
                best = LagMax { cc, shift: s };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// `None` where the pair failed its preconditions.
    pub values: Vec<Vec<Option<f64>>>,
    pub lag_max: Option<Vec<Vec<Option<LagMax>>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }
}

/// Pairwise correlations in input order; with `scan = Some(max_shift)` also
/// the lag-maximised cells.
pub fn correlation_matrix(series: &[(String, MonthlySeries)], scan: Option<u32>) -> CorrelationMatrix {
    let n = series.len();
    let mut values = vec![vec![None; n]; n];
    let mut lag_max = scan.map(|_| vec![vec![None; n]; n]);
    for i in 0..n {
        values[i][i] = Some(1.0);
        if let Some(lm) = lag_max.as_mut() {
            lm[i][i] = Some(LagMax { cc: 1.0, shift: 0 });
        }
        for j in i + 1..n {
            let cc = pearson_cc(&series[i].1, &series[j].1).ok();
            values[i][j] = cc;
            values[j][i] = cc;
            if let (Some(lm), Some(max_shift)) = (lag_max.as_mut(), scan) {
                let cell = lag_scan_cc(&series[i].1, &series[j].1, max_shift).ok();
                lm[i][j] = cell;
                lm[j][i] = cell.map(|c| LagMax {
                    cc: c.cc,
                    shift: -c.shift,
                });
            }
        }
    }
    CorrelationMatrix {
        labels: series.iter().map(|(l, _)| l.clone()).collect(),
        values,
        lag_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "1%")]
    One,
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "10%")]
    Ten,
}

impl Level {
    pub fn from_percent(p: u32) -> Option<Level> {
        match p {
            1 => Some(Level::One),
            5 => Some(Level::Five),
            10 => Some(Level::Ten),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagOrder {
    /// `floor(12 * (T / 100)^(1/4))` with `T` the series length.
    Auto,
    /// Minimum AIC over `0..=Auto`, each candidate fitted on the common
    /// sample that the largest lag allows.
    Aic,
    Fixed(usize),
}

impl LagOrder {
    /// The `Auto` rule (also the upper bound searched by `Aic`).
    pub fn schwert(len: usize) -> usize {
        (12.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub one: f64,
    #[serde(rename = "5%")]
    pub five: f64,
    #[serde(rename = "10%")]
    pub ten: f64,
}

impl CriticalValues {
    pub fn at(&self, level: Level) -> f64 {
        match level {
            Level::One => self.one,
            Level::Five => self.five,
            Level::Ten => self.ten,
        }
    }
}

// MacKinnon (2010) response surfaces, constant-only case:
// cv(T) = b0 + b1/T + b2/T^2 + b3/T^3, rows are 1%, 5%, 10%.
const MACKINNON_C_N1: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
// Two-variable residual-based (cointegration) case.
const MACKINNON_C_N2: [[f64; 4]; 3] = [
    [-3.89644, -10.9519, -33.527, 0.0],
    [-3.33613, -6.1101, -6.823, 0.0],
    [-3.04445, -4.2412, -2.720, 0.0],
];

fn response_surface(table: &[[f64; 4]; 3], nobs: usize) -> CriticalValues {
    let x = 1.0 / nobs as f64;
    let cv = |r: &[f64; 4]| r[0] + x * (r[1] + x * (r[2] + x * r[3]));
    CriticalValues {
        one: cv(&table[0]),
        five: cv(&table[1]),
        ten: cv(&table[2]),
    }
}

/// Critical values for a single-series ADF test with constant.
pub fn adf_critical_values(nobs: usize) -> CriticalValues {
    response_surface(&MACKINNON_C_N1, nobs)
}

/// Critical values for the ADF test on two-variable cointegrating residuals.
pub fn coint_critical_values(nobs: usize) -> CriticalValues {
    response_surface(&MACKINNON_C_N2, nobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    /// Observations in the test regression.
    pub n_obs: usize,
    pub critical_values: CriticalValues,
    pub level: Level,
    pub reject_unit_root: bool,
}

struct AdfFit {
    statistic: f64,
    nobs: usize,
    aic: f64,
}

/// Pick the lag order, then compute the statistic with it.
fn adf_statistic(y: &[f64], lag: LagOrder) -> Result<(f64, usize, usize), StatsError> {
    let p = match lag {
        LagOrder::Fixed(p) => p,
        LagOrder::Auto => LagOrder::schwert(y.len()),
        LagOrder::Aic => {
            let max = LagOrder::schwert(y.len());
            let mut best: Option<(f64, usize)> = None;
            for p in 0..=max {
                let fit = adf_fit(y, p, max + 1)?;
                if best.is_none_or(|(aic, _)| fit.aic < aic) {
                    best = Some((fit.aic, p));
                }
            }
            best.map(|(_, p)| p).unwrap_or(0)
        }
    };
    let fit = adf_fit(y, p, p + 1)?;
    Ok((fit.statistic, fit.nobs, p))
}

/// Regression `dy_t = a + beta * y_{t-1} + sum_{i=1..p} g_i * dy_{t-i} + e_t`
/// over `t = first..T-1`.
fn adf_fit(y: &[f64], p: usize, first: usize) -> Result<AdfFit, StatsError> {
    let t_len = y.len();
    if t_len < first + 1 || t_len - first < MIN_ADF_OBS {
        return Err(StatsError::TooShort {
            found: t_len.saturating_sub(first),
            needed: MIN_ADF_OBS,
        });
    }
    let mean = y.iter().sum::<f64>() / t_len as f64;
    if y.iter().all(|v| *v == mean) || y.windows(2).all(|w| w[0] == w[1]) {
        return Err(StatsError::DegenerateSeries);
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect(); // dy[t-1] = y[t] - y[t-1]
    let rows = first..t_len;
    let nobs = rows.len();
    let response: Vec<f64> = rows.clone().map(|t| dy[t - 1]).collect();
    let level: Vec<f64> = rows.clone().map(|t| y[t - 1]).collect();
    let ones = vec![1.0; nobs];
    let lagged: Vec<Vec<f64>> = (1..=p).map(|i| rows.clone().map(|t| dy[t - 1 - i]).collect()).collect();

    let mut cols: Vec<&[f64]> = vec![&level, &ones];
    cols.extend(lagged.iter().map(Vec::as_slice));
    let k = cols.len();
    if nobs <= k {
        return Err(StatsError::TooShort { found: nobs, needed: MIN_ADF_OBS });
    }
    let ls = linalg::solve(&cols, &response, RCOND_THRESHOLD).map_err(|_| StatsError::DegenerateSeries)?;
    let ssr: f64 = (0..nobs)
        .map(|r| {
            let fit: f64 = cols.iter().zip(&ls.coef).map(|(c, b)| c[r] * b).sum();
            (response[r] - fit).powi(2)
        })
        .sum();
    let sigma2 = ssr / (nobs - k) as f64;
    let se = (sigma2 * ls.inv_gram_diag(0)).sqrt();
    if se == 0.0 || !se.is_finite() {
        return Err(StatsError::DegenerateSeries);
    }
    let n = nobs as f64;
    let llf = -n / 2.0 * ((2.0 * std::f64::consts::PI).ln() + (ssr / n).ln() + 1.0);
    Ok(AdfFit {
        statistic: ls.coef[0] / se,
        nobs,
        aic: -2.0 * llf + 2.0 * k as f64,
    })
}

/// Augmented Dickey-Fuller test with a constant and no trend.
pub fn adf_test(s: &MonthlySeries, level: Level, lag: LagOrder) -> Result<AdfResult, StatsError> {
    let (statistic, n_obs, p) = adf_statistic(s.values(), lag)?;
    let critical_values = adf_critical_values(n_obs);
    Ok(AdfResult {
        statistic,
        lag_order: p,
        n_obs,
        critical_values,
        level,
        reject_unit_root: statistic < critical_values.at(level),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CointegrationResult {
    /// Cointegrating regression `actual = intercept + slope * predicted`.
    pub intercept: f64,
    pub slope: f64,
    pub residual_adf: AdfResult,
    pub cointegrated: bool,
    /// Preconditions that did not hold (inputs that already look stationary).
    pub warnings: Vec<String>,
}

/// Residual-based two-step cointegration test of `actual` against `predicted`.
pub fn engle_granger_test(
    actual: &MonthlySeries,
    predicted: &MonthlySeries,
    level: Level,
    lag: LagOrder,
) -> Result<CointegrationResult, StatsError> {
    let Some((from, a, p)) = actual.overlap(predicted) else {
        return Err(StatsError::InsufficientOverlap {
            found: 0,
            needed: MIN_COINT_OVERLAP,
        });
    };
    if a.len() < MIN_COINT_OVERLAP {
        return Err(StatsError::InsufficientOverlap {
            found: a.len(),
            needed: MIN_COINT_OVERLAP,
        });
    }
    let ones = vec![1.0; a.len()];
    let ls = linalg::solve(&[p, &ones], a, RCOND_THRESHOLD).map_err(|_| StatsError::DegenerateVariance)?;
    let (slope, intercept) = (ls.coef[0], ls.coef[1]);
    let resid: Vec<f64> = a.iter().zip(p).map(|(y, x)| y - (intercept + slope * x)).collect();
    let resid = MonthlySeries::new(from, resid).expect("finite residuals");

    let (statistic, n_obs, order) = adf_statistic(resid.values(), lag)?;
    let critical_values = coint_critical_values(n_obs);
    let reject = statistic < critical_values.at(level);

    let mut warnings = Vec::new();
    for (name, s) in [("actual", actual), ("predicted", predicted)] {
        if let Ok(r) = adf_test(s, level, lag) {
            if r.reject_unit_root {
                warnings.push(format!("{name} series rejects a unit root (ADF {:.3})", r.statistic));
            }
        }
    }

    Ok(CointegrationResult {
        intercept,
        slope,
        residual_adf: AdfResult {
            statistic,
            lag_order: order,
            n_obs,
            critical_values,
            level,
            reject_unit_root: reject,
        },
        cointegrated: reject,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MonthKey;

    fn series(values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::new(MonthKey::new(2000, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn self_correlation_is_one() {
        let s = series((0..40).map(|k| (k as f64 * 0.3).sin() + 0.01 * k as f64).collect());
        assert!((pearson_cc(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lag_scan_cc(&s, &s, 11).unwrap(), LagMax { cc: pearson_cc(&s, &s).unwrap(), shift: 0 });
    }

    #[test]
    fn pearson_errors() {
        let s = series((0..40).map(|k| k as f64).collect());
        let flat = series(vec![2.0; 40]);
        assert_eq!(pearson_cc(&s, &flat), Err(StatsError::DegenerateVariance));
        let short = series((0..20).map(|k| k as f64).collect());
        assert!(matches!(pearson_cc(&s, &short), Err(StatsError::InsufficientOverlap { found: 20, .. })));
    }

    #[test]
    fn lag_scan_finds_planted_shift() {
        let base: Vec<f64> = (0..80).map(|k| ((k * k * 37 + 11) % 101) as f64).collect();
        let a = series(base.clone());
        // b(m) = a(m + 3), so a(m) = b(m - 3): shift +3.
        let b = MonthlySeries::new(MonthKey::new(1999, 10).unwrap(), base).unwrap();
        let lm = lag_scan_cc(&a, &b, 5).unwrap();
        assert_eq!(lm.shift, 3);
        assert!((lm.cc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_labels_and_mirror() {
        let x = series((0..50).map(|k| (k as f64 * 0.7).sin()).collect());
        let y = series((0..50).map(|k| (k as f64 * 0.7 + 0.9).sin()).collect());
        let m = correlation_matrix(&[("x".into(), x.clone()), ("x2".into(), x), ("y".into(), y)], Some(4));
        assert_eq!(m.labels, vec!["x", "x2", "y"]);
        assert!((m.get(0, 1).unwrap() - 1.0).abs() < 1e-12);
        let lm = m.lag_max.unwrap();
        assert_eq!(lm[0][2].unwrap().shift, -lm[2][0].unwrap().shift);
        assert_eq!(lm[0][2].unwrap().cc, lm[2][0].unwrap().cc);
    }

    #[test]
    fn critical_values_match_reference_values() {
        // Reference: statsmodels mackinnoncrit(1, "c", 185) and (2, "c", 149).
        let cv = adf_critical_values(185);
        assert!((cv.one - -3.46620057).abs() < 1e-8);
        assert!((cv.five - -2.87729328).abs() < 1e-8);
        assert!((cv.ten - -2.57516775).abs() < 1e-8);
        let cv = coint_critical_values(149);
        assert!((cv.one - -3.97145284).abs() < 1e-8);
        assert!((cv.five - -3.37744471).abs() < 1e-8);
        assert!((cv.ten - -3.07303695).abs() < 1e-8);
    }

    #[test]
    fn auto_lag_order() {
        assert_eq!(LagOrder::schwert(200), 14);
        assert_eq!(LagOrder::schwert(100), 12);
        assert_eq!(LagOrder::schwert(113), 12);
        let rw = series(crate::synthkit::random_walk(200, 1));
        assert_eq!(adf_test(&rw, Level::Five, LagOrder::Auto).unwrap().lag_order, 14);
        assert_eq!(adf_test(&rw, Level::Five, LagOrder::Fixed(3)).unwrap().lag_order, 3);
        assert!(adf_test(&rw, Level::Five, LagOrder::Aic).unwrap().lag_order <= 14);
    }

    #[test]
    fn adf_errors() {
        assert_eq!(
            adf_test(&series(vec![3.0; 100]), Level::Five, LagOrder::Auto),
            Err(StatsError::DegenerateSeries)
        );
        let short = series((0..30).map(|k| (k as f64).sin()).collect());
        assert!(matches!(adf_test(&short, Level::Five, LagOrder::Fixed(2)), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn coint_needs_overlap() {
        let a = series((0..50).map(|k| (k as f64).sin()).collect());
        assert!(matches!(
            engle_granger_test(&a, &a, Level::Five, LagOrder::Auto),
            Err(StatsError::InsufficientOverlap { found: 50, .. })
        ));
    }
}
