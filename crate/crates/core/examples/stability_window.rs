//! Refit over eight consecutive anchor months and judge whether the same
//! index pair keeps winning.
//!
//! cargo run --release --example stability_window [seed]

use cpimodel::data::MonthKey;
use cpimodel::search::SearchConfig;
use cpimodel::stability::{backtrack_models, default_majority, reliability_verdict, VerdictMode};
use cpimodel::synthkit::{generate_catalog, price_std, random_truth, synthesize_price};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let anchor: MonthKey = "2012-10".parse()?;
    let catalog = generate_catalog(12, "2002-08".parse()?, anchor, seed)?;
    let mut truth = random_truth(&catalog, "2003-07".parse()?, anchor, 0, 11, seed);
    truth.noise_sigma = 0.02 * price_std(&truth, &catalog)?;
    let price = synthesize_price(&truth, &catalog)?;

    let report = backtrack_models(&price, &catalog, anchor, 8, &SearchConfig::for_catalog(&catalog, anchor));
    println!("truth: {} t{} / {} t{}", truth.spec.code1, truth.spec.lag1, truth.spec.code2, truth.spec.lag2);
    for a in report.anchors.iter().rev() {
        match &a.best {
            Some(b) => println!(
                "{}  lead {}  {} t{} b {:>7.3}  {} t{} b {:>7.3}  sterr {:.3}",
                a.anchor, a.effective_lead, b.spec.code1, b.spec.lag1, b.spec.b1, b.spec.code2, b.spec.lag2, b.spec.b2, b.sterr
            ),
            None => println!("{}  {}", a.anchor, a.error.as_deref().unwrap_or("no fit")),
        }
    }
    println!("strict: {}", reliability_verdict(&report, VerdictMode::Strict));
    println!("majority: {}", reliability_verdict(&report, default_majority(&report)));
    if let Some(d) = &report.drift {
        println!("b1 drift {:.3}..{:.3}, sterr drift {:.3}..{:.3}", d.b1.min, d.b1.max, d.sterr.min, d.sterr.max);
    }
    Ok(())
}
