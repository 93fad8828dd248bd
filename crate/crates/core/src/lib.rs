//! Share-price models built from two lagged consumer price indices.
//!
//! A monthly price `p(m)` is modelled as
//!
//! ```text
//! p(m) = b1 * CPI1(m - lag1) + b2 * CPI2(m - lag2) + c * (t(m) - 2000) + d + e(m)
//! ```
//!
//! where `t(m)` is the month in fractional years. The crate finds the best
//! pair of indices and lags by exhaustive search ([`search`]), checks that the
//! choice persists over consecutive anchor months ([`stability`]), and
//! diagnoses the fit with correlation tables, unit-root and cointegration
//! tests ([`stats`]). [`scenario`] turns fitted models into sensitivities and
//! projected returns; [`synthkit`] produces seeded data with a known answer.

pub mod cli;
pub mod data;
pub mod linalg;
pub mod regression;
pub mod scenario;
pub mod search;
pub mod stability;
pub mod stats;
pub mod synthkit;

pub use data::{CpiCatalog, MonthKey, MonthlySeries};
pub use regression::{Candidate, FitResult, ModelSpec};
pub use search::{best_fit_search, SearchConfig, SearchResult};
pub use stability::{backtrack_models, reliability_verdict, StabilityReport, VerdictMode};
