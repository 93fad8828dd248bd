//! Load a wide CPI catalog and a price file, check a sample window, and
//! inspect lagged and differenced series.
//!
//! cargo run --example catalog_io

use cpimodel::data::{
    first_difference, lag_shift, parse_catalog_csv, parse_price_csv, validate_window, write_series_csv, MonthKey,
};

const CPI: &str = "\
date,FOOD,RENT,FUEL
2011-01,226.7,255.1,310.2
2011-02,227.6,255.5,318.9
2011-03,228.8,255.9,337.0
2011-04,229.9,256.4,352.7
2011-05,230.8,256.8,359.4
2011-06,231.1,257.4,349.1
2011-07,231.4,258.0,351.3
2011-08,232.2,258.6,350.8
";

const PRICE: &str = "\
date,ACME
2011-03,41.2
2011-04,42.0
2011-05,40.7
2011-06,39.9
2011-07,41.5
2011-08,43.1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = parse_catalog_csv(CPI)?;
    let (ticker, price) = parse_price_csv(PRICE)?;
    println!("{} indices, latest month {}", catalog.len(), catalog.latest_month());
    println!("{ticker}: {} months from {}", price.len(), price.start());

    let (start, anchor): (MonthKey, MonthKey) = ("2011-03".parse()?, "2011-08".parse()?);
    let report = validate_window(&catalog, &price, start, anchor, 2, 0);
    println!("window {start}..{anchor} with lags up to 2: passes = {}", report.passes());
    let report = validate_window(&catalog, &price, start, anchor, 3, 0);
    let failing: Vec<&str> = report.failing_codes().collect();
    println!("with lags up to 3, short indices: {failing:?}");

    // A lag of 2 moves January's value to March.
    let food = catalog.get("FOOD").unwrap();
    let lagged = lag_shift(food, 2);
    println!("FOOD lagged 2 at 2011-03 = {:?}", lagged.get("2011-03".parse()?));

    let diffs = first_difference(food)?;
    print!("{}", write_series_csv([("dFOOD", &diffs)]));
    Ok(())
}
