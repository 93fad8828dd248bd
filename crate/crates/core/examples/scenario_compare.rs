//! Coefficient ratios, one-point sensitivities, and projected returns of
//! several models under an assumed index path.
//!
//! cargo run --example scenario_compare

use std::collections::BTreeMap;

use cpimodel::data::MonthlySeries;
use cpimodel::regression::ModelSpec;
use cpimodel::scenario::{coefficient_ratio, compare_models, unit_sensitivity, ScenarioPath};

fn model(code1: &str, b1: f64, code2: &str, b2: f64, c: f64, d: f64) -> ModelSpec {
    ModelSpec { code1: code1.into(), lag1: 0, b1, code2: code2.into(), lag2: 2, b2, c, d }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let models = vec![
        ("ALPHA".to_string(), model("FOOD", -4.0, "RENT", 2.5, 12.0, 150.0)),
        ("BETA".to_string(), model("FUEL", -0.6, "RENT", 1.1, 3.0, -40.0)),
        ("GAMMA".to_string(), model("FOOD", 1.2, "FUEL", -0.3, -2.0, 20.0)),
    ];
    let current = [("ALPHA", 95.0), ("BETA", 60.0), ("GAMMA", 150.0)];

    for ((label, spec), (_, price)) in models.iter().zip(current) {
        let s = unit_sensitivity(spec, price)?;
        println!(
            "{label}: b1/b2 = {:.3}; +1 point of {} moves ${price} by {:+.2} ({:+.1}%)",
            coefficient_ratio(spec)?,
            spec.code1,
            s.dollars,
            s.percent
        );
    }

    // History through 2012-12, then assumed annual growth to 2015-12.
    let from = "2012-12".parse()?;
    let to = "2015-12".parse()?;
    let hist = |level: f64| MonthlySeries::new("2011-01".parse().unwrap(), vec![level; 24]).unwrap();
    let path = ScenarioPath::new()
        .with("FOOD", ScenarioPath::extend_with_growth(&hist(230.0), 2.0, to))
        .with("RENT", ScenarioPath::extend_with_growth(&hist(255.0), 3.0, to))
        .with("FUEL", ScenarioPath::extend_with_growth(&hist(340.0), -4.0, to));
    let entry: BTreeMap<String, f64> = current.iter().map(|(l, p)| (l.to_string(), *p)).collect();

    for r in compare_models(&models, &path, from, to, &entry)? {
        println!("{:>6}: {:>8.2} -> {:>8.2}  {:+.1}%", r.label, r.entry_price, r.end_price, r.return_pct);
    }
    Ok(())
}
