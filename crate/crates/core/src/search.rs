//! Exhaustive best-fit search over index pairs and lag combinations.
//!
//! Every unordered pair of distinct codes is tried with every `(lag1, lag2)`
//! in `[-lead, max_lag]^2`, where `lead` is capped by how far the catalog
//! reaches past the anchor month. Candidates are fitted in parallel on the
//! ambient rayon pool; the reduction sorts by a total order so the result does
//! not depend on scheduling or thread count.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{lead_cap, CpiCatalog, MonthKey, MonthlySeries};
use crate::regression::{
    assemble, fit_candidate, fit_columns, lagged_column, price_window, Candidate, FitError, FitResult,
    SampleWindow, DEFAULT_MIN_OBS,
};

/// Relative tolerance under which two standard errors count as tied.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("catalog must contain at least two series")]
    EmptyCatalog,
    #[error("no feasible candidate among {n_candidates} ({n_rejected} rejected)")]
    NoFeasibleCandidate { n_candidates: usize, n_rejected: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub start: MonthKey,
    pub anchor: MonthKey,
    pub max_lag: u32,
    pub max_lead: u32,
    /// Most recent month with published index values.
    pub latest_cpi: MonthKey,
    pub top_k: usize,
    pub min_obs: usize,
}

impl SearchConfig {
    pub fn new(anchor: MonthKey, latest_cpi: MonthKey) -> Self {
        Self {
            start: MonthKey::new(2003, 7).expect("valid month"),
            anchor,
            max_lag: 11,
            max_lead: 8,
            latest_cpi,
            top_k: 10,
            min_obs: DEFAULT_MIN_OBS,
        }
    }

    pub fn for_catalog(catalog: &CpiCatalog, anchor: MonthKey) -> Self {
        Self::new(anchor, catalog.latest_month())
    }

    pub fn effective_lead(&self) -> u32 {
        lead_cap(self.max_lead, self.latest_cpi, self.anchor)
    }

    pub fn lag_range(&self) -> RangeInclusive<i32> {
        -(self.effective_lead() as i32)..=self.max_lag as i32
    }

    pub fn window(&self) -> SampleWindow {
        SampleWindow {
            start: self.start,
            anchor: self.anchor,
            min_obs: self.min_obs,
        }
    }
}

/// The set of candidates a search will evaluate, in canonical order:
/// pairs `(code1 < code2)` lexicographically, then `lag1`, then `lag2`.
#[derive(Debug, Clone)]
pub struct CandidateSpace<'a> {
    codes: Vec<&'a str>,
    lags: RangeInclusive<i32>,
}

impl<'a> CandidateSpace<'a> {
    pub fn codes(&self) -> &[&'a str] {
        &self.codes
    }

    pub fn lags(&self) -> RangeInclusive<i32> {
        self.lags.clone()
    }

    pub fn pair_count(&self) -> usize {
        let n = self.codes.len();
        n * (n - 1) / 2
    }

    pub fn lags_per_pair(&self) -> usize {
        let width = (self.lags.end() - self.lags.start() + 1) as usize;
        width * width
    }

    pub fn len(&self) -> usize {
        self.pair_count() * self.lags_per_pair()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.codes.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Candidate> + '_ {
        self.pairs().into_iter().flat_map(move |(i, j)| {
            self.lags.clone().flat_map(move |l1| {
                self.lags
                    .clone()
                    .map(move |l2| Candidate::new(self.codes[i], l1, self.codes[j], l2))
            })
        })
    }
}

pub fn enumerate_candidates<'a>(
    catalog: &'a CpiCatalog,
    config: &SearchConfig,
) -> Result<CandidateSpace<'a>, SearchError> {
    if catalog.len() < 2 {
        return Err(SearchError::EmptyCatalog);
    }
    Ok(CandidateSpace {
        codes: catalog.codes().collect(),
        lags: config.lag_range(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: FitResult,
    /// Up to `top_k` fits, ascending by standard error.
    pub ranked: Vec<FitResult>,
    pub n_candidates: usize,
    pub n_rejected: usize,
    pub effective_lead: u32,
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    sterr: f64,
    i: usize,
    j: usize,
    lag1: i32,
    lag2: i32,
}

impl Scored {
    fn lag_reach(&self) -> i32 {
        self.lag1.abs() + self.lag2.abs()
    }

    /// Tie-break among (near-)equal standard errors.
    fn secondary(&self, other: &Self) -> Ordering {
        self.lag_reach()
            .cmp(&other.lag_reach())
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
            .then(self.lag1.cmp(&other.lag1))
            .then(self.lag2.cmp(&other.lag2))
    }
}

fn near_tie(a: f64, b: f64) -> bool {
    (b - a).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// Sort by standard error, then reorder each run of near-ties by the
/// secondary key. The first pass is a strict total order, so the outcome is
/// independent of the input order.
fn rank(scored: &mut [Scored]) {
    scored.sort_unstable_by(|a, b| a.sterr.total_cmp(&b.sterr).then_with(|| a.secondary(b)));
    let mut g = 0;
    while g < scored.len() {
        let mut e = g + 1;
        while e < scored.len() && near_tie(scored[g].sterr, scored[e].sterr) {
            e += 1;
        }
        if e - g > 1 {
            scored[g..e].sort_unstable_by(Scored::secondary);
        }
        g = e;
    }
}

/// Fit every candidate and return the minimum-standard-error model.
pub fn best_fit_search(
    price: &MonthlySeries,
    catalog: &CpiCatalog,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let space = enumerate_candidates(catalog, config)?;
    let window = config.window();
    let y = price_window(price, &window)?;
    let trend = window.trend();
    let lags: Vec<i32> = space.lags().collect();

    // columns[code][lag index]; None when the lagged window is not covered.
    let columns: Vec<Vec<Option<&[f64]>>> = space
        .codes()
        .iter()
        .map(|code| {
            lags.iter()
                .map(|&l| lagged_column(catalog, code, l, &window).ok())
                .collect()
        })
        .collect();

    let outcomes: Vec<Option<Scored>> = space
        .pairs()
        .into_par_iter()
        .flat_map_iter(|(i, j)| {
            let columns = &columns;
            let trend = &trend;
            let lags = &lags;
            (0..lags.len()).flat_map(move |a| {
                (0..lags.len()).map(move |b| {
                    let (x1, x2) = (columns[i][a]?, columns[j][b]?);
                    let raw = fit_columns(y, x1, x2, trend).ok()?;
                    Some(Scored {
                        sterr: raw.sterr(),
                        i,
                        j,
                        lag1: lags[a],
                        lag2: lags[b],
                    })
                })
            })
        })
        .collect();

    let n_candidates = space.len();
    debug_assert_eq!(outcomes.len(), n_candidates);
    let mut scored: Vec<Scored> = outcomes.into_iter().flatten().collect();
    let n_rejected = n_candidates - scored.len();
    if scored.is_empty() {
        return Err(SearchError::NoFeasibleCandidate {
            n_candidates,
            n_rejected,
        });
    }
    rank(&mut scored);

    let codes = space.codes();
    let refit = |s: &Scored| -> FitResult {
        let cand = Candidate::new(codes[s.i], s.lag1, codes[s.j], s.lag2);
        let x1 = columns[s.i][lags.iter().position(|&l| l == s.lag1).unwrap()].unwrap();
        let x2 = columns[s.j][lags.iter().position(|&l| l == s.lag2).unwrap()].unwrap();
        let raw = fit_columns(y, x1, x2, &trend).expect("candidate fitted during the scan");
        assemble(&cand, raw, y, &window)
    };
    let ranked: Vec<FitResult> = scored.iter().take(config.top_k).map(refit).collect();
    let best = ranked.first().cloned().unwrap_or_else(|| refit(&scored[0]));

    Ok(SearchResult {
        best,
        ranked,
        n_candidates,
        n_rejected,
        effective_lead: config.effective_lead(),
    })
}

/// Fit a single candidate with the same sample definition as a search.
pub fn fit_with_config(
    price: &MonthlySeries,
    catalog: &CpiCatalog,
    candidate: &Candidate,
    config: &SearchConfig,
) -> Result<FitResult, FitError> {
    fit_candidate(price, catalog, candidate, &config.window())
}
