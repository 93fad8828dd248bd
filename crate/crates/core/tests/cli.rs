use std::path::Path;
use std::process::Command;

use cpimodel::cli::{self, model_from_json, report_body};
use cpimodel::data::{parse_catalog_csv, MonthKey};
use cpimodel::regression::{evaluate_model, ModelSpec};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("cpimodel").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Synthetic catalog and price with a known truth in `dir/data`.
fn synth(dir: &Path, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data");
    let s = seed.to_string();
    assert_eq!(run(&["synth", "--seed", &s, "--series", "6", "--out", p(&data)]), 0);
    (data.join("price.csv"), data.join("cpi.csv"))
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_cpimodel")).args(["search", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let help = Command::new(env!("CARGO_BIN_EXE_cpimodel")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert_eq!(run(&["adf", "--level", "7", "--cpi", "x.csv"]), 1);
    assert_eq!(run(&[]), 1);
}

#[test]
fn data_and_feasibility_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 3);
    let out = tmp.path().join("out");
    assert_eq!(run(&["search", "--prices", "missing.csv", "--cpi", p(&cpi), "--out", p(&out)]), 2);
    // A catalog file used as a price file has more than one column.
    assert_eq!(run(&["search", "--prices", p(&cpi), "--cpi", p(&cpi), "--out", p(&out)]), 2);

    // Every series ends before the anchor needs it, so no candidate is feasible.
    let short = tmp.path().join("short.csv");
    let text = std::fs::read_to_string(&cpi).unwrap();
    let kept: Vec<&str> = text.lines().take_while(|l| !l.starts_with("2012-0")).collect();
    std::fs::write(&short, kept.join("\n") + "\n").unwrap();
    let code = run(&["search", "--prices", p(&price), "--cpi", p(&short), "--max-lag", "0", "--out", p(&out)]);
    assert_eq!(code, 3);
}

#[test]
fn search_report_has_ranked_table_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 4);
    let out = tmp.path().join("search");
    assert_eq!(run(&["search", "--prices", p(&price), "--cpi", p(&cpi), "--anchor", "2012-10", "--top", "5", "--out", p(&out)]), 0);
    let doc = read_json(&out.join("search.json"));
    let manifest = &doc["manifest"];
    assert_eq!(manifest["command"], "search");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["model"]["top"], 5);
    assert_eq!(doc["report"]["ranked"].as_array().unwrap().len(), 5);

    let tsv = std::fs::read_to_string(out.join("search.tsv")).unwrap();
    let mut lines = tsv.lines().skip_while(|l| l.starts_with("# manifest"));
    assert_eq!(lines.next().unwrap(), "rank\tC1\tt1\tb1\tC2\tt2\tb2\tc\td\tsterr\tr2");
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(row.len(), 11);
    assert!(row[3].split('.').nth(1).unwrap().len() == 3, "{row:?}");

    // The truth pair and lags come back from a low-noise synthetic price.
    let truth = model_from_json(&read_json(&tmp.path().join("data/truth.json"))).unwrap();
    let best = model_from_json(&doc).unwrap();
    assert_eq!(best.candidate(), truth.candidate());
}

#[test]
fn threads_do_not_change_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 5);
    let mut bodies = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(threads);
        assert_eq!(run(&["search", "--prices", p(&price), "--cpi", p(&cpi), "--threads", threads, "--out", p(&out)]), 0);
        let json = report_body(&std::fs::read_to_string(out.join("search.json")).unwrap());
        let tsv = report_body(&std::fs::read_to_string(out.join("search.tsv")).unwrap());
        bodies.push((json, tsv));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn stability_on_synthetic_stable_data_is_reliable() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 6);
    let out = tmp.path().join("st");
    assert_eq!(run(&["stability", "--prices", p(&price), "--cpi", p(&cpi), "--window", "8", "--out", p(&out)]), 0);
    let doc = read_json(&out.join("stability.json"));
    assert_eq!(doc["report"]["verdict"], "reliable (strict)");
    assert_eq!(doc["report"]["anchors"].as_array().unwrap().len(), 8);
    let tsv = std::fs::read_to_string(out.join("stability.tsv")).unwrap();
    assert!(tsv.trim_end().ends_with("verdict: reliable (strict)"));
}

#[test]
fn exported_model_reimports_and_evaluates_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 7);
    let out = tmp.path().join("s");
    assert_eq!(run(&["search", "--prices", p(&price), "--cpi", p(&cpi), "--out", p(&out), "--format", "json"]), 0);
    let spec = model_from_json(&read_json(&out.join("search.json"))).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    let back: ModelSpec = serde_json::from_str(&text).unwrap();
    let catalog = parse_catalog_csv(&std::fs::read_to_string(&cpi).unwrap()).unwrap();
    for m in ["2005-01", "2009-06", "2012-10"] {
        let m: MonthKey = m.parse().unwrap();
        assert_eq!(
            evaluate_model(&spec, &catalog, m).unwrap().to_bits(),
            evaluate_model(&back, &catalog, m).unwrap().to_bits()
        );
    }
}

#[test]
fn remaining_subcommands_produce_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (price, cpi) = synth(tmp.path(), 8);
    let truth = tmp.path().join("data/truth.json");
    let o = |name: &str| tmp.path().join(name);

    assert_eq!(run(&["corr", "--cpi", p(&cpi), "--prices", p(&price), "--diff", "--scan", "--out", p(&o("corr"))]), 0);
    let corr = read_json(&o("corr").join("corr.json"));
    assert_eq!(corr["report"]["labels"][0], "dS00");

    assert_eq!(run(&["adf", "--prices", p(&price), "--lags", "aic", "--out", p(&o("adf"))]), 0);
    let adf = read_json(&o("adf").join("adf.json"));
    assert_eq!(adf["report"]["tests"][0]["code"], "SYN");

    assert_eq!(run(&["coint", "--prices", p(&price), "--cpi", p(&cpi), "--model", p(&truth), "--out", p(&o("coint"))]), 0);
    let coint = read_json(&o("coint").join("coint.json"));
    assert_eq!(coint["report"]["cointegration"]["cointegrated"], true);
    assert!(coint["report"]["r2"].as_f64().unwrap() > 0.99);

    let model = format!("SYN={}", p(&truth));
    assert_eq!(run(&["sensitivity", "--model", &model, "--current", "SYN=100", "--out", p(&o("sens"))]), 0);
    let sens = read_json(&o("sens").join("sensitivity.json"));
    let b1 = sens["report"]["models"][0]["spec"]["b1"].as_f64().unwrap();
    let pct = sens["report"]["models"][0]["sensitivity"]["percent"].as_f64().unwrap();
    assert!((pct - b1).abs() < 1e-12, "one index point on a $100 price is b1 percent");

    let cmp_out = o("cmp");
    let args = [
        "compare", "--model", &model, "--cpi", p(&cpi), "--growth", "S00=2", "--entry", "SYN=100", "--from", "2012-10", "--to", "2014-10",
        "--out", p(&cmp_out),
    ];
    assert_eq!(run(&args), 0);
    let cmp = read_json(&o("cmp").join("compare.json"));
    assert_eq!(cmp["report"]["ranked"][0]["label"], "SYN");

    assert_eq!(run(&["normalize", "--prices", p(&price), "--out", p(&o("norm"))]), 0);
    let norm = std::fs::read_to_string(o("norm").join("normalize.tsv")).unwrap();
    assert!(norm.lines().any(|l| l.ends_with("\t1")), "peak month normalizes to exactly 1");

    assert_eq!(run(&["compare", "--model", &model, "--from", "2012-10", "--to", "2014-10", "--out", p(&o("x"))]), 1);
}
