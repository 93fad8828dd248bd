//! How often the search recovers a known model as noise grows.
//!
//! cargo run --release --example recovery_campaign [trials]

use cpimodel::data::MonthKey;
use cpimodel::search::SearchConfig;
use cpimodel::synthkit::{generate_catalog, price_std, random_truth, recovery_trial};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let (start, anchor): (MonthKey, MonthKey) = ("2003-07".parse()?, "2012-11".parse()?);
    println!("noise/std  pair  pair+lags  median coef err");
    for frac in [0.0, 0.01, 0.05, 0.2, 0.5] {
        let (mut pair, mut lags, mut errs) = (0, 0, Vec::new());
        for seed in 0..trials {
            let catalog = generate_catalog(20, "2002-08".parse()?, anchor, 1000 + seed)?;
            let mut truth = random_truth(&catalog, start, anchor, 0, 11, 1000 + seed);
            truth.noise_sigma = frac * price_std(&truth, &catalog)?;
            let rec = recovery_trial(&truth, &catalog, &SearchConfig::for_catalog(&catalog, anchor))?;
            pair += rec.recovered_pair as u32;
            lags += rec.recovered_lags as u32;
            if rec.recovered_pair {
                errs.push(rec.coef_max_rel_err);
            }
        }
        errs.sort_by(f64::total_cmp);
        let median = errs.get(errs.len() / 2).map_or("-".to_string(), |e| format!("{e:.4}"));
        println!("{frac:>9.2}  {pair:>4}  {lags:>9}  {median:>15}");
    }
    Ok(())
}
