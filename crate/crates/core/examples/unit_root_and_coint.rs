//! Unit-root tests on a fitted price and its differences, then an
//! Engle-Granger test of actual against model-predicted prices.
//!
//! cargo run --release --example unit_root_and_coint

use cpimodel::data::{first_difference, MonthKey, MonthlySeries};
use cpimodel::regression::{actual_vs_predicted_r2, predict_series};
use cpimodel::search::{best_fit_search, SearchConfig};
use cpimodel::stats::{adf_test, engle_granger_test, LagOrder, Level};
use cpimodel::synthkit::{generate_catalog, price_std, random_truth, synthesize_price};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (start, anchor): (MonthKey, MonthKey) = ("2003-07".parse()?, "2012-10".parse()?);
    let catalog = generate_catalog(10, "2002-08".parse()?, anchor, 21)?;
    let mut truth = random_truth(&catalog, start, anchor, 0, 11, 21);
    truth.noise_sigma = 0.05 * price_std(&truth, &catalog)?;
    let price = synthesize_price(&truth, &catalog)?;

    for (label, s) in [("price", price.clone()), ("d price", first_difference(&price)?)] {
        let r = adf_test(&s, Level::Five, LagOrder::Aic)?;
        println!(
            "{label:>8}: ADF {:>7.3} (5% cv {:.3}, {} lags, {} obs) -> {}",
            r.statistic,
            r.critical_values.five,
            r.lag_order,
            r.n_obs,
            if r.reject_unit_root { "stationary" } else { "unit root" }
        );
    }

    let best = best_fit_search(&price, &catalog, &SearchConfig::for_catalog(&catalog, anchor))?.best;
    let predicted = predict_series(&best.spec, &catalog, start, anchor)?;
    let actual = MonthlySeries::new(start, price.window(start, anchor).unwrap().to_vec())?;
    println!("R2 actual vs predicted: {:.4}", actual_vs_predicted_r2(&actual, &predicted)?);

    let eg = engle_granger_test(&actual, &predicted, Level::Five, LagOrder::Aic)?;
    println!(
        "actual = {:.3} + {:.4} * predicted; residual ADF {:.3} (5% cv {:.3}) -> cointegrated: {}",
        eg.intercept, eg.slope, eg.residual_adf.statistic, eg.residual_adf.critical_values.five, eg.cointegrated
    );
    for w in &eg.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
