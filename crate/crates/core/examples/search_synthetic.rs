//! Exhaustive best-fit search on a synthetic catalog with a known model.
//!
//! cargo run --release --example search_synthetic [seed]

use cpimodel::data::MonthKey;
use cpimodel::search::{best_fit_search, SearchConfig};
use cpimodel::synthkit::{generate_catalog, price_std, random_truth, synthesize_price};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let (start, anchor): (MonthKey, MonthKey) = ("2003-07".parse()?, "2012-10".parse()?);

    // Catalog runs three months past the anchor, so leads of up to 3 are tried.
    let catalog = generate_catalog(20, "2002-08".parse()?, "2013-01".parse()?, seed)?;
    let mut truth = random_truth(&catalog, start, anchor, -3, 11, seed);
    truth.noise_sigma = 0.01 * price_std(&truth, &catalog)?;
    let price = synthesize_price(&truth, &catalog)?;

    let config = SearchConfig { top_k: 5, ..SearchConfig::for_catalog(&catalog, anchor) };
    let t0 = std::time::Instant::now();
    let result = best_fit_search(&price, &catalog, &config)?;
    println!(
        "{} candidates ({} rejected), lead {} months, {:.2}s",
        result.n_candidates,
        result.n_rejected,
        result.effective_lead,
        t0.elapsed().as_secs_f64()
    );

    let t = &truth.spec;
    println!("truth  {} {:>3} {:>8.3}  {} {:>3} {:>8.3}  c {:.3} d {:.3}", t.code1, t.lag1, t.b1, t.code2, t.lag2, t.b2, t.c, t.d);
    for (k, fit) in result.ranked.iter().enumerate() {
        let s = &fit.spec;
        println!(
            "#{}     {} {:>3} {:>8.3}  {} {:>3} {:>8.3}  c {:.3} d {:.3}  sterr {:.3}",
            k + 1,
            s.code1,
            s.lag1,
            s.b1,
            s.code2,
            s.lag2,
            s.b2,
            s.c,
            s.d,
            fit.sterr
        );
    }
    Ok(())
}
