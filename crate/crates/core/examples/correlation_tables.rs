//! Correlation matrices of levels and first differences, with the
//! lag-maximised coefficient for each pair.
//!
//! cargo run --example correlation_tables

use cpimodel::data::{first_difference, MonthlySeries};
use cpimodel::stats::correlation_matrix;
use cpimodel::synthkit::{generate_catalog, near_duplicate};

fn print(m: &cpimodel::stats::CorrelationMatrix) {
    print!("{:>6}", "");
    for l in &m.labels {
        print!("  {l:>18}");
    }
    println!();
    for (i, l) in m.labels.iter().enumerate() {
        print!("{l:>6}");
        for j in 0..m.labels.len() {
            let cc = m.get(i, j).map_or("NA".to_string(), |v| format!("{v:.3}"));
            let scan = m.lag_max.as_ref().and_then(|lm| lm[i][j]).filter(|_| i != j);
            match scan {
                Some(s) => print!("  {:>18}", format!("{cc} [{:.3}@{}]", s.cc, s.shift)),
                None => print!("  {cc:>18}"),
            }
        }
        println!();
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = generate_catalog(3, "2000-01".parse()?, "2012-12".parse()?, 11)?;
    let mut cols: Vec<(String, MonthlySeries)> = catalog.iter().map(|(k, s)| (k.to_string(), s.clone())).collect();
    // A regional variant of S00 that differs only by small independent noise.
    cols.push(("S00R".into(), near_duplicate(catalog.get("S00").unwrap(), 2e-4, 5)));

    println!("levels:");
    print(&correlation_matrix(&cols, None));

    let diffs: Vec<(String, MonthlySeries)> = cols
        .iter()
        .map(|(k, s)| Ok((format!("d{k}"), first_difference(s)?)))
        .collect::<Result<_, cpimodel::data::DataError>>()?;
    println!("\nfirst differences, scanned over +-11 months:");
    print(&correlation_matrix(&diffs, Some(11)));
    Ok(())
}
