//! Seeded synthetic catalogs and prices with a known generating model.
//!
//! Random streams come from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! and normal variates from `rand_distr::StandardNormal` (ziggurat). Both are
//! platform independent, so a seed yields the same series everywhere.
//!
//! Index series are log random walks with positive-leaning drift: level
//! `x_k = x_{k-1} * exp(mu + sigma * z_k)` with start level in `[80, 120)`,
//! `mu` in `[-0.0005, 0.004)` and `sigma` in `[0.002, 0.008)` per month. The
//! shared secular rise makes levels strongly correlated, which is the regime
//! that stresses the regression.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{month_range, CpiCatalog, MonthKey, MonthlySeries};
use crate::regression::{evaluate_model, predict_series, FitError, ModelSpec};
use crate::search::{best_fit_search, SearchConfig, SearchError};

pub const MIN_SPAN: usize = 36;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("span of {0} months is shorter than {MIN_SPAN}")]
    SpanTooShort(usize),
    #[error("need at least two series, got {0}")]
    TooFewSeries(usize),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Generating model plus noise level, seed and output span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub spec: ModelSpec,
    pub noise_sigma: f64,
    pub seed: u64,
    pub from: MonthKey,
    pub to: MonthKey,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn generate_catalog(n_series: usize, from: MonthKey, to: MonthKey, seed: u64) -> Result<CpiCatalog, SynthError> {
    if n_series < 2 {
        return Err(SynthError::TooFewSeries(n_series));
    }
    let len = (from.months_until(to) + 1).max(0) as usize;
    if len < MIN_SPAN {
        return Err(SynthError::SpanTooShort(len));
    }
    let width = n_series.saturating_sub(1).to_string().len().max(2);
    let mut rng = rng(seed);
    let mut entries = BTreeMap::new();
    for s in 0..n_series {
        let mut level: f64 = rng.random_range(80.0..120.0);
        let mu: f64 = rng.random_range(-0.0005..0.004);
        let sigma: f64 = rng.random_range(0.002..0.008);
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(level);
            let z: f64 = rng.sample(StandardNormal);
            level *= (mu + sigma * z).exp();
        }
        let series = MonthlySeries::new(from, values).expect("finite random walk");
        entries.insert(format!("S{s:0width$}"), series);
    }
    Ok(CpiCatalog::new(entries).expect("at least two series"))
}

/// Model value plus seeded `N(0, noise_sigma^2)` noise for every month.
pub fn synthesize_price(truth: &TruthSpec, catalog: &CpiCatalog) -> Result<MonthlySeries, SynthError> {
    if !truth.noise_sigma.is_finite() || truth.noise_sigma < 0.0 {
        return Err(SynthError::BadNoise(truth.noise_sigma));
    }
    let mut rng = rng(truth.seed);
    let values = month_range(truth.from, truth.to)
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            Ok(evaluate_model(&truth.spec, catalog, m)? + truth.noise_sigma * z)
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    MonthlySeries::new(truth.from, values).map_err(|e| SynthError::Fit(FitError::InsufficientData(e.to_string())))
}

/// Standard deviation of the noiseless price over the truth span.
pub fn price_std(truth: &TruthSpec, catalog: &CpiCatalog) -> Result<f64, SynthError> {
    let p = predict_series(&truth.spec, catalog, truth.from, truth.to)?;
    let v = p.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Ok((v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Draw a noiseless truth: two distinct codes, lags uniform in
/// `min_lag..=max_lag`, `|b| in [0.5, 5)`, `|c| in [2, 20)`, `|d| in [50, 500)`,
/// each with a random sign.
pub fn random_truth(
    catalog: &CpiCatalog,
    from: MonthKey,
    to: MonthKey,
    min_lag: i32,
    max_lag: i32,
    seed: u64,
) -> TruthSpec {
    let mut rng = rng(seed);
    let codes: Vec<&str> = catalog.codes().collect();
    let i = rng.random_range(0..codes.len());
    let mut j = rng.random_range(0..codes.len() - 1);
    if j >= i {
        j += 1;
    }
    let mut signed = |lo: f64, hi: f64| {
        let v: f64 = rng.random_range(lo..hi);
        if rng.random_bool(0.5) { v } else { -v }
    };
    let (b1, b2, c, d) = (signed(0.5, 5.0), signed(0.5, 5.0), signed(2.0, 20.0), signed(50.0, 500.0));
    let lag1 = rng.random_range(min_lag..=max_lag);
    let lag2 = rng.random_range(min_lag..=max_lag);
    let spec = ModelSpec {
        code1: codes[i].to_string(),
        lag1,
        b1,
        code2: codes[j].to_string(),
        lag2,
        b2,
        c,
        d,
    }
    .canonical();
    TruthSpec {
        spec,
        noise_sigma: 0.0,
        seed: seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        from,
        to,
    }
}

/// Gaussian random walk `y_k = y_{k-1} + z_k` starting at `y_0 = z_0`.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    ar1(1.0, n, seed)
}

/// `y_k = phi * y_{k-1} + z_k` with standard normal innovations, `y_0 = z_0`.
pub fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut y = 0.0;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        y = phi * y + z;
        out.push(y);
    }
    out
}

/// Copy of `s` with independent multiplicative noise `exp(rel_sigma * z)` per
/// month, like a regional variant of a national index.
pub fn near_duplicate(s: &MonthlySeries, rel_sigma: f64, seed: u64) -> MonthlySeries {
    let mut rng = rng(seed);
    let values = s
        .values()
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v * (rel_sigma * z).exp()
        })
        .collect();
    MonthlySeries::new(s.start(), values).expect("finite input")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub recovered_pair: bool,
    pub recovered_lags: bool,
    /// Largest relative coefficient error; infinite when the pair was missed.
    pub coef_max_rel_err: f64,
    pub best: ModelSpec,
    pub best_sterr: f64,
    pub n_candidates: usize,
}

pub fn coef_max_rel_err(truth: &ModelSpec, fitted: &ModelSpec) -> f64 {
    let (t, f) = (truth.canonical(), fitted.canonical());
    if t.code1 != f.code1 || t.code2 != f.code2 {
        return f64::INFINITY;
    }
    t.coefficients()
        .iter()
        .zip(f.coefficients())
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max)
}

/// Synthesize a price from `truth`, search it, and score the best model.
pub fn recovery_trial(truth: &TruthSpec, catalog: &CpiCatalog, config: &SearchConfig) -> Result<TrialRecord, SearchError> {
    let price = synthesize_price(truth, catalog).map_err(|e| match e {
        SynthError::Fit(f) => SearchError::Fit(f),
        other => SearchError::Fit(FitError::InsufficientData(other.to_string())),
    })?;
    let res = best_fit_search(&price, catalog, config)?;
    let t = truth.spec.canonical();
    let b = &res.best.spec;
    let recovered_pair = t.code1 == b.code1 && t.code2 == b.code2;
    Ok(TrialRecord {
        recovered_pair,
        recovered_lags: recovered_pair && t.lag1 == b.lag1 && t.lag2 == b.lag2,
        coef_max_rel_err: coef_max_rel_err(&t, b),
        best: b.clone(),
        best_sterr: res.best.sterr,
        n_candidates: res.n_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{fit_candidate, SampleWindow};

    fn mk(s: &str) -> MonthKey {
        s.parse().unwrap()
    }

    #[test]
    fn catalog_is_deterministic_and_positive() {
        let a = generate_catalog(92, mk("2000-01"), mk("2012-06"), 7).unwrap();
        let b = generate_catalog(92, mk("2000-01"), mk("2012-06"), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 92);
        assert!(a.iter().all(|(_, s)| s.len() == 150 && s.values().iter().all(|&v| v > 0.0)));
        assert_ne!(a, generate_catalog(92, mk("2000-01"), mk("2012-06"), 8).unwrap());
    }

    #[test]
    fn catalog_preconditions() {
        assert_eq!(generate_catalog(1, mk("2000-01"), mk("2010-01"), 1), Err(SynthError::TooFewSeries(1)));
        assert_eq!(generate_catalog(3, mk("2000-01"), mk("2002-10"), 1), Err(SynthError::SpanTooShort(34)));
    }

    #[test]
    fn noiseless_truth_refits_exactly() {
        let cat = generate_catalog(20, mk("2002-08"), mk("2012-11"), 3).unwrap();
        let truth = random_truth(&cat, mk("2003-07"), mk("2012-11"), 0, 11, 3);
        let price = synthesize_price(&truth, &cat).unwrap();
        assert_eq!(price, synthesize_price(&truth, &cat).unwrap());
        let w = SampleWindow::new(truth.from, truth.to);
        let fit = fit_candidate(&price, &cat, &truth.spec.candidate(), &w).unwrap();
        assert!(fit.sterr <= 1e-8, "{}", fit.sterr);
        assert!(coef_max_rel_err(&truth.spec, &fit.spec) < 1e-6);
    }

    #[test]
    fn generated_pairs_are_full_rank() {
        let (from, to) = (mk("2003-07"), mk("2012-11"));
        let w = SampleWindow::new(from, to);
        let mut rejected = 0;
        for seed in 0..100 {
            let cat = generate_catalog(6, from, to, seed).unwrap();
            let price = synthesize_price(&random_truth(&cat, from, to, 0, 0, seed), &cat).unwrap();
            let codes: Vec<&str> = cat.codes().collect();
            for (i, a) in codes.iter().enumerate() {
                for b in &codes[i + 1..] {
                    if fit_candidate(&price, &cat, &crate::regression::Candidate::new(a, 0, b, 0), &w).is_err() {
                        rejected += 1;
                    }
                }
            }
        }
        assert_eq!(rejected, 0);
    }

    #[test]
    fn near_duplicate_tracks_source() {
        let cat = generate_catalog(2, mk("2000-01"), mk("2010-12"), 5).unwrap();
        let s = cat.get("S00").unwrap();
        let d = near_duplicate(s, 1e-3, 9);
        assert_eq!(d.start(), s.start());
        assert!(s.values().iter().zip(d.values()).all(|(a, b)| (a / b - 1.0).abs() < 1e-2));
    }

    #[test]
    fn noise_level_is_recovered_by_true_refit() {
        let cat = generate_catalog(20, mk("2002-08"), mk("2012-11"), 11).unwrap();
        let mut truth = random_truth(&cat, mk("2003-07"), mk("2012-11"), 0, 11, 11);
        truth.noise_sigma = 2.0;
        let price = synthesize_price(&truth, &cat).unwrap();
        let fit = fit_candidate(&price, &cat, &truth.spec.candidate(), &SampleWindow::new(truth.from, truth.to)).unwrap();
        assert_eq!(fit.n_obs, 113);
        assert!((fit.sterr - 2.0).abs() < 0.3, "{}", fit.sterr);
    }
}
