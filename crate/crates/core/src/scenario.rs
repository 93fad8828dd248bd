//! Sensitivity arithmetic and what-if comparison of fitted models.
//!
//! Ratios and sensitivities are always computed from the coefficients
//! themselves. Rounded ratios quoted elsewhere may disagree with them; for
//! example `-7.93 / 4.415` is about `-1.80`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{month_range, IndexSource, MonthKey, MonthlySeries};
use crate::regression::{predict_series, FitError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("coefficient b2 is zero")]
    ZeroDenominator,
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("empty horizon {from}..{to}")]
    EmptyRange { from: MonthKey, to: MonthKey },
    #[error("no entry price for `{0}`")]
    MissingEntry(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Assumed absolute index levels per code.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPath {
    paths: BTreeMap<String, MonthlySeries>,
}

impl ScenarioPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, code: impl Into<String>, series: MonthlySeries) -> Self {
        self.insert(code, series);
        self
    }

    pub fn insert(&mut self, code: impl Into<String>, series: MonthlySeries) {
        self.paths.insert(code.into(), series);
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.paths.keys().map(String::as_str)
    }

    /// Continue `history` past its last month at a constant annual growth
    /// rate (percent per year, compounded monthly) up to `until`.
    pub fn extend_with_growth(history: &MonthlySeries, annual_pct: f64, until: MonthKey) -> MonthlySeries {
        let monthly = (1.0 + annual_pct / 100.0).powf(1.0 / 12.0);
        let mut values = history.values().to_vec();
        let mut last = *values.last().expect("non-empty series");
        for _ in month_range(history.end().add_months(1), until) {
            last *= monthly;
            values.push(last);
        }
        MonthlySeries::new(history.start(), values).expect("finite growth path")
    }
}

impl IndexSource for ScenarioPath {
    fn series(&self, code: &str) -> Option<&MonthlySeries> {
        self.paths.get(code)
    }
}

pub fn coefficient_ratio(spec: &ModelSpec) -> Result<f64, ScenarioError> {
    if spec.b2 == 0.0 {
        return Err(ScenarioError::ZeroDenominator);
    }
    Ok(spec.b1 / spec.b2)
}

/// Price response to a one-unit rise in the first index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub dollars: f64,
    pub percent: f64,
}

pub fn unit_sensitivity(spec: &ModelSpec, current_price: f64) -> Result<Sensitivity, ScenarioError> {
    if current_price.is_nan() || current_price <= 0.0 {
        return Err(ScenarioError::NonPositivePrice(current_price));
    }
    Ok(Sensitivity {
        dollars: spec.b1,
        percent: 100.0 * spec.b1 / current_price,
    })
}

pub fn project_price<S: IndexSource>(
    spec: &ModelSpec,
    path: &S,
    from: MonthKey,
    to: MonthKey,
) -> Result<MonthlySeries, ScenarioError> {
    if from > to {
        return Err(ScenarioError::EmptyRange { from, to });
    }
    Ok(predict_series(spec, path, from, to)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedReturn {
    pub label: String,
    pub entry_price: f64,
    pub end_price: f64,
    pub return_pct: f64,
}

/// Project each model over `from..=to` and rank by percent return from its
/// entry price to the projected price at `to`. Equal returns keep label order.
pub fn compare_models<S: IndexSource>(
    specs: &[(String, ModelSpec)],
    path: &S,
    from: MonthKey,
    to: MonthKey,
    entry_prices: &BTreeMap<String, f64>,
) -> Result<Vec<RankedReturn>, ScenarioError> {
    let mut out = specs
        .iter()
        .map(|(label, spec)| {
            let entry = *entry_prices
                .get(label)
                .ok_or_else(|| ScenarioError::MissingEntry(label.clone()))?;
            if entry.is_nan() || entry <= 0.0 {
                return Err(ScenarioError::NonPositivePrice(entry));
            }
            let projected = project_price(spec, path, from, to)?;
            let end = *projected.values().last().expect("non-empty projection");
            Ok(RankedReturn {
                label: label.clone(),
                entry_price: entry,
                end_price: end,
                return_pct: 100.0 * (end - entry) / entry,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    out.sort_by(|a, b| b.return_pct.total_cmp(&a.return_pct).then_with(|| a.label.cmp(&b.label)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(b1: f64, b2: f64, c: f64, d: f64) -> ModelSpec {
        ModelSpec {
            code1: "SEFV".into(),
            lag1: 0,
            b1,
            code2: "RSH".into(),
            lag2: 2,
            b2,
            c,
            d,
        }
    }

    fn mk(s: &str) -> MonthKey {
        s.parse().unwrap()
    }

    #[test]
    fn ratios() {
        let bac = spec(-5.897, 2.650, 20.609, 444.030);
        assert!((coefficient_ratio(&bac).unwrap() - -2.225283).abs() < 1e-6);
        let jpm = spec(-1.856, 0.993, 7.037, 116.907);
        assert!((coefficient_ratio(&jpm).unwrap() - -1.869084).abs() < 1e-6);
        assert_eq!(coefficient_ratio(&spec(0.0, 1.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(coefficient_ratio(&spec(1.0, 0.0, 0.0, 0.0)), Err(ScenarioError::ZeroDenominator));
    }

    #[test]
    fn sensitivities() {
        let bac = spec(-5.897, 2.650, 20.609, 444.030);
        let s = unit_sensitivity(&bac, 9.07).unwrap();
        assert_eq!(s.dollars, -5.897);
        assert!((s.percent - -65.0).abs() < 0.05, "{}", s.percent);
        let gs = spec(-13.795, 11.027, 29.935, 33.751);
        let s = unit_sensitivity(&gs, 125.4).unwrap();
        assert!((s.percent - -11.0).abs() < 0.01, "{}", s.percent);
        assert!(unit_sensitivity(&gs, 1e15).unwrap().percent.abs() < 1e-10);
        assert_eq!(unit_sensitivity(&gs, 0.0), Err(ScenarioError::NonPositivePrice(0.0)));
    }

    #[test]
    fn flat_path_moves_by_trend_only() {
        let flat = MonthlySeries::new(mk("2012-01"), vec![230.0; 36]).unwrap();
        let path = ScenarioPath::new().with("SEFV", flat.clone()).with("RSH", flat);
        let bac = spec(-5.897, 2.650, 20.609, 444.030);
        let p = project_price(&bac, &path, mk("2013-01"), mk("2014-06")).unwrap();
        for w in p.values().windows(2) {
            assert!((w[1] - w[0] - 20.609 / 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_lagged_month() {
        let s = MonthlySeries::new(mk("2013-01"), vec![230.0; 12]).unwrap();
        let path = ScenarioPath::new().with("SEFV", s.clone()).with("RSH", s);
        let bac = spec(-5.897, 2.650, 20.609, 444.030);
        let err = project_price(&bac, &path, mk("2013-01"), mk("2013-06")).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::Fit(FitError::MissingMonth {
                code: "RSH".into(),
                month: mk("2012-11")
            })
        );
        assert!(matches!(
            project_price(&bac, &path, mk("2013-06"), mk("2013-05")),
            Err(ScenarioError::EmptyRange { .. })
        ));
    }

    #[test]
    fn identical_models_tie_by_label() {
        let flat = MonthlySeries::new(mk("2012-01"), vec![230.0; 36]).unwrap();
        let path = ScenarioPath::new().with("SEFV", flat.clone()).with("RSH", flat);
        let m = spec(-5.897, 2.650, 20.609, 444.030);
        let specs = vec![("zeta".to_string(), m.clone()), ("alpha".to_string(), m)];
        let entries = BTreeMap::from([("zeta".to_string(), 9.0), ("alpha".to_string(), 9.0)]);
        let r = compare_models(&specs, &path, mk("2013-01"), mk("2013-12"), &entries).unwrap();
        assert_eq!(r[0].label, "alpha");
        assert_eq!(r[0].return_pct, r[1].return_pct);
    }

    #[test]
    fn growth_extension_compounds_monthly() {
        let h = MonthlySeries::new(mk("2012-01"), vec![100.0; 12]).unwrap();
        let e = ScenarioPath::extend_with_growth(&h, 12.0, mk("2013-12"));
        assert_eq!(e.end(), mk("2013-12"));
        assert!((e.get(mk("2013-12")).unwrap() - 112.0).abs() < 1e-9);
    }
}
