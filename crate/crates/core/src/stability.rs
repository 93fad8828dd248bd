//! Rolling re-estimation over consecutive anchor months.
//!
//! Moving the anchor back in time leaves newer index readings available
//! after the sample end, so earlier anchors admit more leading candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{CpiCatalog, MonthKey, MonthlySeries};
use crate::regression::FitResult;
use crate::search::{best_fit_search, SearchConfig};

pub const DEFAULT_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorOutcome {
    pub anchor: MonthKey,
    pub effective_lead: u32,
    pub n_candidates: usize,
    pub best: Option<FitResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Option<Range> {
        values.fold(None, |acc, v| match acc {
            None => Some(Range { min: v, max: v }),
            Some(r) => Some(Range {
                min: r.min.min(v),
                max: r.max.max(v),
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityPair {
    pub code1: String,
    pub code2: String,
    pub count: usize,
}

/// Spread of each parameter across the months whose best model uses the
/// majority pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub lag1: Range,
    pub lag2: Range,
    pub b1: Range,
    pub b2: Range,
    pub c: Range,
    pub d: Range,
    pub sterr: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Oldest first, newest (the requested anchor) last.
    pub anchors: Vec<AnchorOutcome>,
    pub pair_consistent: bool,
    pub majority_pair: Option<MajorityPair>,
    pub drift: Option<Drift>,
}

impl StabilityReport {
    pub fn window(&self) -> usize {
        self.anchors.len()
    }

    pub fn bests(&self) -> impl Iterator<Item = Option<&FitResult>> {
        self.anchors.iter().map(|a| a.best.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictMode {
    /// Same pair at every anchor.
    Strict,
    /// Majority pair seen at least `quorum` times.
    Majority { quorum: usize },
}

/// Run the best-fit search at each of `window` consecutive anchors ending at
/// `anchor`. The sample always starts at `base.start`.
pub fn backtrack_models(
    price: &MonthlySeries,
    catalog: &CpiCatalog,
    anchor: MonthKey,
    window: usize,
    base: &SearchConfig,
) -> StabilityReport {
    assert!(window >= 2, "stability window must cover at least two months");
    let anchors: Vec<AnchorOutcome> = (0..window)
        .rev()
        .map(|back| {
            let a = anchor.add_months(-(back as i64));
            let cfg = SearchConfig {
                anchor: a,
                ..base.clone()
            };
            match best_fit_search(price, catalog, &cfg) {
                Ok(res) => AnchorOutcome {
                    anchor: a,
                    effective_lead: res.effective_lead,
                    n_candidates: res.n_candidates,
                    best: Some(res.best),
                    error: None,
                },
                Err(e) => AnchorOutcome {
                    anchor: a,
                    effective_lead: cfg.effective_lead(),
                    n_candidates: 0,
                    best: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    summarize(anchors)
}

fn summarize(anchors: Vec<AnchorOutcome>) -> StabilityReport {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for best in anchors.iter().filter_map(|a| a.best.as_ref()) {
        *counts.entry((&best.spec.code1, &best.spec.code2)).or_default() += 1;
    }
    // Highest count wins; among equal counts the newest anchor's pair wins.
    let newest_rank = |pair: (&str, &str)| {
        anchors
            .iter()
            .rposition(|a| a.best.as_ref().is_some_and(|b| (b.spec.code1.as_str(), b.spec.code2.as_str()) == pair))
    };
    let majority = counts
        .iter()
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then(newest_rank(**pa).cmp(&newest_rank(**pb))))
        .map(|(&(c1, c2), &count)| MajorityPair {
            code1: c1.to_string(),
            code2: c2.to_string(),
            count,
        });

    let pair_consistent = majority.as_ref().is_some_and(|m| m.count == anchors.len());

    let drift = majority.as_ref().map(|m| {
        let members: Vec<&FitResult> = anchors
            .iter()
            .filter_map(|a| a.best.as_ref())
            .filter(|b| b.spec.code1 == m.code1 && b.spec.code2 == m.code2)
            .collect();
        let r = |f: fn(&FitResult) -> f64| Range::of(members.iter().map(|b| f(b))).expect("non-empty");
        Drift {
            lag1: r(|b| b.spec.lag1 as f64),
            lag2: r(|b| b.spec.lag2 as f64),
            b1: r(|b| b.spec.b1),
            b2: r(|b| b.spec.b2),
            c: r(|b| b.spec.c),
            d: r(|b| b.spec.d),
            sterr: r(|b| b.sterr),
        }
    });

    StabilityReport {
        anchors,
        pair_consistent,
        majority_pair: majority,
        drift,
    }
}

pub fn reliability_verdict(report: &StabilityReport, mode: VerdictMode) -> bool {
    match mode {
        VerdictMode::Strict => report.pair_consistent,
        VerdictMode::Majority { quorum } => report.majority_pair.as_ref().is_some_and(|m| m.count >= quorum),
    }
}

/// Majority mode with the default quorum of `window - 1`.
pub fn default_majority(report: &StabilityReport) -> VerdictMode {
    VerdictMode::Majority {
        quorum: report.window().saturating_sub(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MonthlySeries;
    use crate::regression::ModelSpec;

    fn outcome(month: u32, pair: (&str, &str), lag1: i32) -> AnchorOutcome {
        let start = MonthKey::new(2003, 7).unwrap();
        AnchorOutcome {
            anchor: MonthKey::new(2012, month).unwrap(),
            effective_lead: 10 - month,
            n_candidates: 1,
            best: Some(FitResult {
                spec: ModelSpec {
                    code1: pair.0.into(),
                    lag1,
                    b1: -1.8 - month as f64 * 0.001,
                    code2: pair.1.into(),
                    lag2: 2,
                    b2: 1.0,
                    c: 7.0,
                    d: 110.0 + month as f64,
                },
                residuals: MonthlySeries::new(start, vec![0.0; 100]).unwrap(),
                ssr: 1.0,
                sterr: 2.9,
                r2: 0.7,
                n_obs: 100,
            }),
            error: None,
        }
    }

    #[test]
    fn unanimous_window_is_reliable() {
        let rep = summarize((3..=10).map(|m| outcome(m, ("F", "ORPR"), 4)).collect());
        assert!(reliability_verdict(&rep, VerdictMode::Strict));
        assert_eq!(rep.majority_pair.as_ref().unwrap().count, 8);
        let drift = rep.drift.unwrap();
        assert_eq!((drift.lag1.min, drift.lag1.max), (4.0, 4.0));
        assert!((drift.d.max - drift.d.min - 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_defection_fails_strict_passes_majority() {
        let rep = summarize(
            (3..=10)
                .map(|m| if m == 4 { outcome(m, ("FAB", "FH"), 4) } else { outcome(m, ("F", "ORPR"), 4) })
                .collect(),
        );
        assert!(!reliability_verdict(&rep, VerdictMode::Strict));
        assert!(reliability_verdict(&rep, VerdictMode::Majority { quorum: 7 }));
        assert!(reliability_verdict(&rep, default_majority(&rep)));
        assert!(!reliability_verdict(&rep, VerdictMode::Majority { quorum: 8 }));
        let m = rep.majority_pair.unwrap();
        assert_eq!((m.code1.as_str(), m.code2.as_str(), m.count), ("F", "ORPR", 7));
    }

    #[test]
    fn failed_anchor_breaks_strict_consistency() {
        let mut anchors: Vec<_> = (3..=10).map(|m| outcome(m, ("F", "ORPR"), 4)).collect();
        anchors[0].best = None;
        anchors[0].error = Some("no feasible candidate".into());
        let rep = summarize(anchors);
        assert!(!rep.pair_consistent);
        assert_eq!(rep.majority_pair.unwrap().count, 7);
    }
}
