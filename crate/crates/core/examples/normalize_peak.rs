//! Scale price histories to their pre-2010 peak, so that "how far below the
//! old high" reads directly off the series.
//!
//! cargo run --example normalize_peak

use cpimodel::data::{normalize_to_peak, MonthlySeries};
use cpimodel::synthkit::ar1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = "2003-01".parse()?;
    for (name, seed) in [("ONE", 1u64), ("TWO", 2)] {
        // A positive, wandering price path.
        let values: Vec<f64> = ar1(1.0, 118, seed).iter().map(|z| 60.0 * (0.08 * z).exp()).collect();
        let s = MonthlySeries::new(start, values)?;
        let n = normalize_to_peak(&s, start, "2009-12".parse()?)?;
        let (peak_month, _) = n.iter().find(|(_, v)| *v == 1.0).unwrap();
        println!("{name}: peak {peak_month}, latest {} at {:.2} of peak", n.end(), n.values().last().unwrap());
    }
    Ok(())
}
