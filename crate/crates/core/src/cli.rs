//! Command-line front end.
//!
//! Every subcommand writes `<out>/<command>.tsv` and/or `<out>/<command>.json`.
//! Both embed a manifest (command, resolved flags, input digests, version,
//! timestamp); everything outside the manifest is a pure function of the
//! inputs and flags, including `--threads`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 no feasible
//! candidate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{
    first_difference, normalize_to_peak, parse_catalog_csv, parse_series_csv, validate_window, write_series_csv,
    CpiCatalog, MonthKey, MonthlySeries,
};
use crate::regression::{actual_vs_predicted_r2, predict_series, FitResult, ModelSpec};
use crate::scenario::{coefficient_ratio, compare_models, unit_sensitivity, ScenarioPath};
use crate::search::{best_fit_search, SearchConfig, SearchError};
use crate::stability::{backtrack_models, default_majority, reliability_verdict, StabilityReport, VerdictMode};
use crate::stats::{adf_test, correlation_matrix, engle_granger_test, LagOrder, Level};
use crate::synthkit::{generate_catalog, price_std, random_truth, synthesize_price};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NO_FEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cpimodel", version, about = "Two-index CPI share price models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exhaustive best-fit search at one anchor month
    Search(SearchArgs),
    /// Best fits over consecutive anchor months and a reliability verdict
    Stability(StabilityArgs),
    /// Correlation matrix, optionally with lag scanning
    Corr(CorrArgs),
    /// Augmented Dickey-Fuller test per column
    Adf(AdfArgs),
    /// Cointegration of actual and model-predicted prices
    Coint(CointArgs),
    /// Coefficient ratio and one-unit sensitivity of fitted models
    Sensitivity(SensitivityArgs),
    /// Projected returns of several models under a scenario path
    Compare(CompareArgs),
    /// Generate a seeded synthetic catalog, price and truth (intercept raised
    /// when needed so the noiseless price stays at or above 10)
    Synth(SynthArgs),
    /// Normalize price columns to their peak within a window
    Normalize(NormalizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Json,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Single-column price CSV (`date,TICKER`)
    #[arg(long)]
    pub prices: PathBuf,
    /// Wide CPI catalog CSV (`date,CODE,...`)
    #[arg(long)]
    pub cpi: PathBuf,
    #[arg(long, default_value = "2003-07")]
    pub start: MonthKey,
    /// Last sample month (default: last price month)
    #[arg(long)]
    pub anchor: Option<MonthKey>,
    #[arg(long, default_value_t = 11)]
    pub max_lag: u32,
    #[arg(long, default_value_t = 8)]
    pub max_lead: u32,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, default_value_t = crate::regression::DEFAULT_MIN_OBS)]
    pub min_obs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = crate::stability::DEFAULT_WINDOW)]
    pub window: usize,
    /// Majority quorum (default: window - 1)
    #[arg(long)]
    pub quorum: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrArgs {
    #[arg(long)]
    pub cpi: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Restrict to these comma-separated codes, in this order
    #[arg(long, value_delimiter = ',')]
    pub codes: Vec<String>,
    /// Correlate first differences instead of levels
    #[arg(long)]
    pub diff: bool,
    /// Also report the lag-maximised coefficient over +-max-lag months
    #[arg(long)]
    pub scan: bool,
    #[arg(long, default_value_t = 11)]
    pub max_lag: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AdfArgs {
    #[arg(long)]
    pub cpi: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub codes: Vec<String>,
    /// Test first differences instead of levels
    #[arg(long)]
    pub diff: bool,
    #[arg(long, default_value_t = 5, value_parser = parse_level)]
    pub level: u32,
    /// `auto`, `aic` or a fixed integer
    #[arg(long, default_value = "auto", value_parser = parse_lag_order)]
    pub lags: LagOrder,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use this model (JSON spec or search report) instead of searching
    #[arg(long = "model")]
    pub model_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5, value_parser = parse_level)]
    pub level: u32,
    #[arg(long, default_value = "aic", value_parser = parse_lag_order)]
    pub lags: LagOrder,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SensitivityArgs {
    /// `[LABEL=]PATH` of a model JSON; repeatable
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// `LABEL=PRICE` current share price; repeatable
    #[arg(long = "current")]
    pub current: Vec<String>,
    /// Price CSV whose last value is used when `--current` is absent
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// `[LABEL=]PATH` of a model JSON; repeatable
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// Scenario path CSV of absolute index levels
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Historical catalog extended with `--growth` rates
    #[arg(long)]
    pub cpi: Option<PathBuf>,
    /// `CODE=PCT` annual growth applied after the catalog ends; repeatable
    #[arg(long)]
    pub growth: Vec<String>,
    #[arg(long)]
    pub from: MonthKey,
    #[arg(long)]
    pub to: MonthKey,
    /// `LABEL=PRICE` entry price; default is the projection at `--from`
    #[arg(long)]
    pub entry: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub series: usize,
    #[arg(long, default_value = "2003-07")]
    pub start: MonthKey,
    /// Last month of the price and catalog
    #[arg(long, default_value = "2012-10")]
    pub anchor: MonthKey,
    #[arg(long, default_value_t = 11)]
    pub max_lag: u32,
    /// Noise standard deviation as a fraction of the noiseless price std
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long, default_value = "2003-01")]
    pub from: MonthKey,
    #[arg(long, default_value = "2009-12")]
    pub to: MonthKey,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_level(s: &str) -> Result<u32, String> {
    let p: u32 = s.parse().map_err(|_| format!("`{s}` is not 1, 5 or 10"))?;
    Level::from_percent(p).map(|_| p).ok_or_else(|| format!("`{s}` is not 1, 5 or 10"))
}

fn parse_lag_order(s: &str) -> Result<LagOrder, String> {
    match s {
        "auto" => Ok(LagOrder::Auto),
        "aic" => Ok(LagOrder::Aic),
        n => n
            .parse()
            .map(LagOrder::Fixed)
            .map_err(|_| format!("`{s}` is not auto, aic or an integer")),
    }
}

fn level_of(p: u32) -> Level {
    Level::from_percent(p).expect("validated by the parser")
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    NoFeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::NoFeasible(_) => EXIT_NO_FEASIBLE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::NoFeasible(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::NoFeasibleCandidate { .. } => CliError::NoFeasible(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    command: String,
    config: Value,
    inputs: Vec<InputDigest>,
    version: String,
    timestamp: String,
}

/// Input files read during a run, with their digests.
#[derive(Default)]
struct Inputs {
    read: Vec<InputDigest>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.read.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn catalog(&mut self, path: &Path) -> Result<CpiCatalog, CliError> {
        parse_catalog_csv(&self.read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn columns(&mut self, path: &Path) -> Result<Vec<(String, MonthlySeries)>, CliError> {
        parse_series_csv(&self.read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn price(&mut self, path: &Path) -> Result<(String, MonthlySeries), CliError> {
        let mut cols = self.columns(path)?;
        if cols.len() != 1 {
            return Err(CliError::Data(format!(
                "{}: price file must have exactly one series column, found {}",
                path.display(),
                cols.len()
            )));
        }
        Ok(cols.remove(0))
    }

    fn model(&mut self, path: &Path) -> Result<ModelSpec, CliError> {
        let v: Value = serde_json::from_str(&self.read(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        model_from_json(&v).ok_or_else(|| CliError::Data(format!("{}: no model spec found", path.display())))
    }
}

/// Accepts a bare spec, a fit or truth record (`spec`), or a search report
/// (`report.best.spec`).
pub fn model_from_json(v: &Value) -> Option<ModelSpec> {
    let candidates = [
        Some(v),
        v.get("spec"),
        v.pointer("/best/spec"),
        v.pointer("/report/best/spec"),
        v.pointer("/report/spec"),
    ];
    candidates
        .into_iter()
        .flatten()
        .find_map(|c| serde_json::from_value::<ModelSpec>(c.clone()).ok())
}

struct Report {
    command: &'static str,
    body: Value,
    tsv: String,
}

fn write_report(report: &Report, config: Value, inputs: Inputs, out: &OutputArgs) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: report.command.to_string(),
        config,
        inputs: inputs.read,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    fs::create_dir_all(&out.out).map_err(|e| CliError::Data(format!("{}: {e}", out.out.display())))?;
    let write = |ext: &str, text: String| {
        let path = out.out.join(format!("{}.{ext}", report.command));
        fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    if matches!(out.format, Format::Json | Format::Both) {
        let doc = json!({ "manifest": manifest, "report": report.body });
        write("json", serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    }
    if matches!(out.format, Format::Tsv | Format::Both) {
        let head = format!("# manifest\t{}\n", serde_json::to_string(&manifest).expect("serializable"));
        write("tsv", head + &report.tsv)?;
    }
    Ok(())
}

/// Strip the manifest so two reports can be compared byte for byte.
pub fn report_body(text: &str) -> String {
    if let Ok(mut v) = serde_json::from_str::<Value>(text) {
        if let Some(obj) = v.as_object_mut() {
            obj.remove("manifest");
        }
        return serde_json::to_string_pretty(&v).expect("serializable");
    }
    text.lines()
        .filter(|l| !l.starts_with("# manifest\t"))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

const MODEL_HEADER: &str = "C1\tt1\tb1\tC2\tt2\tb2\tc\td\tsterr";

fn model_row(spec: &ModelSpec, sterr: f64) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        spec.code1,
        spec.lag1,
        f3(spec.b1),
        spec.code2,
        spec.lag2,
        f3(spec.b2),
        f3(spec.c),
        f3(spec.d),
        f3(sterr)
    )
}

fn search_config(args: &ModelArgs, catalog: &CpiCatalog, price: &MonthlySeries) -> SearchConfig {
    let anchor = args.anchor.unwrap_or_else(|| price.end());
    SearchConfig {
        start: args.start,
        max_lag: args.max_lag,
        max_lead: args.max_lead,
        top_k: args.top,
        min_obs: args.min_obs,
        ..SearchConfig::for_catalog(catalog, anchor)
    }
}

fn load_model_inputs(args: &ModelArgs, inputs: &mut Inputs) -> Result<(String, MonthlySeries, CpiCatalog, SearchConfig), CliError> {
    let (ticker, price) = inputs.price(&args.prices)?;
    let catalog = inputs.catalog(&args.cpi)?;
    let cfg = search_config(args, &catalog, &price);
    if cfg.start > cfg.anchor {
        return Err(CliError::Usage(format!("--start {} is after --anchor {}", cfg.start, cfg.anchor)));
    }
    Ok((ticker, price, catalog, cfg))
}

fn run_search(args: &SearchArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let (ticker, price, catalog, cfg) = load_model_inputs(&args.model, inputs)?;
    let window = validate_window(&catalog, &price, cfg.start, cfg.anchor, cfg.max_lag, cfg.max_lead);
    if !window.price_ok {
        return Err(CliError::Data(format!(
            "{ticker} covers {}..{}, sample needs {}..{}",
            price.start(),
            price.end(),
            cfg.start,
            cfg.anchor
        )));
    }
    let res = best_fit_search(&price, &catalog, &cfg)?;

    let mut tsv = format!("rank\t{MODEL_HEADER}\tr2\n");
    for (k, fit) in res.ranked.iter().enumerate() {
        let _ = writeln!(tsv, "{}\t{}\t{}", k + 1, model_row(&fit.spec, fit.sterr), f3(fit.r2));
    }
    let _ = writeln!(
        tsv,
        "# {ticker} anchor {} n_obs {} candidates {} rejected {} lead {}",
        cfg.anchor, res.best.n_obs, res.n_candidates, res.n_rejected, res.effective_lead
    );
    Ok(Report {
        command: "search",
        body: json!({
            "ticker": ticker,
            "search_config": cfg,
            "window": window,
            "n_candidates": res.n_candidates,
            "n_rejected": res.n_rejected,
            "effective_lead": res.effective_lead,
            "best": fit_json(&res.best),
            "ranked": res.ranked.iter().map(fit_json).collect::<Vec<_>>(),
        }),
        tsv,
    })
}

fn fit_json(fit: &FitResult) -> Value {
    json!({
        "spec": fit.spec,
        "sterr": fit.sterr,
        "ssr": fit.ssr,
        "r2": fit.r2,
        "n_obs": fit.n_obs,
    })
}

pub fn verdict_label(report: &StabilityReport, quorum: usize) -> String {
    if reliability_verdict(report, VerdictMode::Strict) {
        "reliable (strict)".to_string()
    } else if reliability_verdict(report, VerdictMode::Majority { quorum }) {
        format!(
            "reliable (majority {}/{})",
            report.majority_pair.as_ref().map_or(0, |m| m.count),
            report.window()
        )
    } else {
        "unreliable".to_string()
    }
}

fn run_stability(args: &StabilityArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    if args.window < 2 {
        return Err(CliError::Usage("--window must be at least 2".into()));
    }
    let (ticker, price, catalog, cfg) = load_model_inputs(&args.model, inputs)?;
    let report = backtrack_models(&price, &catalog, cfg.anchor, args.window, &cfg);
    if report.anchors.iter().all(|a| a.best.is_none()) {
        let why = report.anchors.last().and_then(|a| a.error.clone()).unwrap_or_default();
        return Err(CliError::NoFeasible(why));
    }
    let quorum = match (args.quorum, default_majority(&report)) {
        (Some(q), _) => q,
        (None, VerdictMode::Majority { quorum }) => quorum,
        (None, VerdictMode::Strict) => args.window,
    };
    let verdict = verdict_label(&report, quorum);

    let mut tsv = format!("month\t{MODEL_HEADER}\tlead\tcandidates\n");
    for a in report.anchors.iter().rev() {
        match &a.best {
            Some(b) => {
                let _ = writeln!(tsv, "{}\t{}\t{}\t{}", a.anchor, model_row(&b.spec, b.sterr), a.effective_lead, a.n_candidates);
            }
            None => {
                let _ = writeln!(tsv, "{}\t# {}", a.anchor, a.error.as_deref().unwrap_or("failed"));
            }
        }
    }
    let _ = writeln!(tsv, "# {ticker} verdict: {verdict}");
    Ok(Report {
        command: "stability",
        body: json!({
            "ticker": ticker,
            "search_config": cfg,
            "window": args.window,
            "quorum": quorum,
            "verdict": verdict,
            "strict": reliability_verdict(&report, VerdictMode::Strict),
            "majority": reliability_verdict(&report, VerdictMode::Majority { quorum }),
            "pair_consistent": report.pair_consistent,
            "majority_pair": report.majority_pair,
            "drift": report.drift,
            "anchors": report.anchors.iter().map(|a| json!({
                "anchor": a.anchor,
                "effective_lead": a.effective_lead,
                "n_candidates": a.n_candidates,
                "best": a.best.as_ref().map(fit_json),
                "error": a.error,
            })).collect::<Vec<_>>(),
        }),
        tsv,
    })
}

fn select_columns(
    inputs: &mut Inputs,
    files: &[&Option<PathBuf>],
    codes: &[String],
    diff: bool,
) -> Result<Vec<(String, MonthlySeries)>, CliError> {
    let mut cols = Vec::new();
    for path in files.iter().filter_map(|p| p.as_ref()) {
        cols.extend(inputs.columns(path)?);
    }
    if cols.is_empty() {
        return Err(CliError::Usage("give --cpi and/or --prices".into()));
    }
    if !codes.is_empty() {
        cols = codes
            .iter()
            .map(|c| {
                cols.iter()
                    .find(|(k, _)| k == c)
                    .cloned()
                    .ok_or_else(|| CliError::Data(format!("unknown code `{c}`")))
            })
            .collect::<Result<_, _>>()?;
    }
    if diff {
        cols = cols
            .into_iter()
            .map(|(k, s)| Ok((format!("d{k}"), first_difference(&s).map_err(data_err)?)))
            .collect::<Result<_, CliError>>()?;
    }
    Ok(cols)
}

fn run_corr(args: &CorrArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let cols = select_columns(inputs, &[&args.cpi, &args.prices], &args.codes, args.diff)?;
    let m = correlation_matrix(&cols, args.scan.then_some(args.max_lag));
    let mut tsv = String::from("code");
    for l in &m.labels {
        let _ = write!(tsv, "\t{l}");
    }
    tsv.push('\n');
    for (i, l) in m.labels.iter().enumerate() {
        tsv.push_str(l);
        for j in 0..m.labels.len() {
            let cell = match m.values[i][j] {
                Some(v) => format!("{v:.5}"),
                None => "NA".to_string(),
            };
            let scanned = m.lag_max.as_ref().and_then(|lm| lm[i][j]).filter(|_| i != j);
            match scanned {
                Some(lm) => {
                    let _ = write!(tsv, "\t{cell} [{:.5}@{}]", lm.cc, lm.shift);
                }
                None => {
                    let _ = write!(tsv, "\t{cell}");
                }
            }
        }
        tsv.push('\n');
    }
    Ok(Report {
        command: "corr",
        body: serde_json::to_value(&m).expect("serializable"),
        tsv,
    })
}

fn run_adf(args: &AdfArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let cols = select_columns(inputs, &[&args.cpi, &args.prices], &args.codes, args.diff)?;
    let level = level_of(args.level);
    let mut tsv = String::from("code\tstatistic\tlags\tn_obs\tcv1\tcv5\tcv10\treject_unit_root\n");
    let mut rows = Vec::new();
    for (code, s) in &cols {
        match adf_test(s, level, args.lags) {
            Ok(r) => {
                let _ = writeln!(
                    tsv,
                    "{code}\t{:.4}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                    r.statistic, r.lag_order, r.n_obs, r.critical_values.one, r.critical_values.five, r.critical_values.ten, r.reject_unit_root
                );
                rows.push(json!({ "code": code, "result": r }));
            }
            Err(e) => {
                let _ = writeln!(tsv, "{code}\t# {e}");
                rows.push(json!({ "code": code, "error": e.to_string() }));
            }
        }
    }
    Ok(Report {
        command: "adf",
        body: json!({ "level": level, "lags": args.lags, "tests": rows }),
        tsv,
    })
}

fn run_coint(args: &CointArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let (ticker, price, catalog, cfg) = load_model_inputs(&args.model, inputs)?;
    let spec = match &args.model_file {
        Some(p) => inputs.model(p)?,
        None => best_fit_search(&price, &catalog, &cfg)?.best.spec,
    };
    let predicted = predict_series(&spec, &catalog, cfg.start, cfg.anchor).map_err(data_err)?;
    let actual = price
        .window(cfg.start, cfg.anchor)
        .map(|v| MonthlySeries::new(cfg.start, v.to_vec()).expect("finite"))
        .ok_or_else(|| CliError::Data(format!("{ticker} does not cover {}..{}", cfg.start, cfg.anchor)))?;
    let r2 = actual_vs_predicted_r2(&actual, &predicted).map_err(data_err)?;
    let level = level_of(args.level);
    let eg = engle_granger_test(&actual, &predicted, level, args.lags).map_err(data_err)?;

    let mut tsv = format!("{MODEL_HEADER}\n");
    let resid: Vec<f64> = actual.values().iter().zip(predicted.values()).map(|(a, p)| a - p).collect();
    let n = resid.len() as f64;
    let sterr = (resid.iter().map(|e| e * e).sum::<f64>() / (n - 4.0)).sqrt();
    let _ = writeln!(tsv, "{}", model_row(&spec, sterr));
    let _ = writeln!(
        tsv,
        "# r2\t{:.3}\n# residual_adf\t{:.4}\tlags {}\tcv {:.4}\n# cointegrated\t{}",
        r2,
        eg.residual_adf.statistic,
        eg.residual_adf.lag_order,
        eg.residual_adf.critical_values.at(level),
        eg.cointegrated
    );
    tsv.push_str("month\tactual\tpredicted\tresidual\n");
    for ((m, a), p) in actual.iter().zip(predicted.values()) {
        let _ = writeln!(tsv, "{m}\t{a:.3}\t{p:.3}\t{:.3}", a - p);
    }
    Ok(Report {
        command: "coint",
        body: json!({
            "ticker": ticker,
            "spec": spec,
            "r2": r2,
            "cointegration": eg,
            "actual": actual,
            "predicted": predicted,
        }),
        tsv,
    })
}

fn split_label(s: &str) -> Option<(&str, &str)> {
    s.split_once('=').filter(|(k, v)| !k.is_empty() && !v.is_empty())
}

fn labeled_models(specs: &[String], inputs: &mut Inputs) -> Result<Vec<(String, ModelSpec)>, CliError> {
    specs
        .iter()
        .map(|s| {
            let (label, path) = match split_label(s) {
                Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                None => {
                    let p = PathBuf::from(s);
                    let stem = p.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_else(|| s.clone());
                    (stem, p)
                }
            };
            Ok((label, inputs.model(&path)?))
        })
        .collect()
}

fn labeled_prices(pairs: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    pairs
        .iter()
        .map(|s| {
            let (l, v) = split_label(s).ok_or_else(|| CliError::Usage(format!("expected LABEL=PRICE, got `{s}`")))?;
            let v: f64 = v.parse().map_err(|_| CliError::Usage(format!("bad price in `{s}`")))?;
            Ok((l.to_string(), v))
        })
        .collect()
}

fn run_sensitivity(args: &SensitivityArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let models = labeled_models(&args.models, inputs)?;
    let mut current = labeled_prices(&args.current)?;
    if let Some(p) = &args.prices {
        for (code, s) in inputs.columns(p)? {
            let last = *s.values().last().expect("non-empty");
            if models.len() == 1 {
                current.entry(models[0].0.clone()).or_insert(last);
            }
            current.entry(code).or_insert(last);
        }
    }
    let mut tsv = String::from("label\tC1\tb1\tC2\tb2\tratio\tprice\tdollars_per_unit\tpercent_per_unit\n");
    let mut rows = Vec::new();
    for (label, spec) in &models {
        let ratio = coefficient_ratio(spec).ok();
        let price = current.get(label).copied();
        let sens = price.map(|p| unit_sensitivity(spec, p)).transpose().map_err(data_err)?;
        let _ = writeln!(
            tsv,
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            spec.code1,
            f3(spec.b1),
            spec.code2,
            f3(spec.b2),
            ratio.map_or("NA".into(), f3),
            price.map_or("NA".into(), f3),
            f3(spec.b1),
            sens.map_or("NA".into(), |s| format!("{:.1}", s.percent)),
        );
        rows.push(json!({ "label": label, "spec": spec, "ratio": ratio, "price": price, "sensitivity": sens }));
    }
    Ok(Report {
        command: "sensitivity",
        body: json!({ "models": rows }),
        tsv,
    })
}

fn growth_path(catalog: &CpiCatalog, growth: &BTreeMap<String, f64>, codes: &[&str], until: MonthKey) -> Result<ScenarioPath, CliError> {
    let mut path = ScenarioPath::new();
    for code in codes {
        let hist = catalog.get(code).ok_or_else(|| CliError::Data(format!("catalog has no `{code}`")))?;
        let rate = growth.get(*code).copied().unwrap_or(0.0);
        path.insert(*code, ScenarioPath::extend_with_growth(hist, rate, until));
    }
    Ok(path)
}

fn run_compare(args: &CompareArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    if args.from > args.to {
        return Err(CliError::Usage(format!("--from {} is after --to {}", args.from, args.to)));
    }
    let models = labeled_models(&args.models, inputs)?;
    let path = match (&args.scenario, &args.cpi) {
        (Some(p), None) => {
            let mut path = ScenarioPath::new();
            for (code, s) in inputs.columns(p)? {
                path.insert(code, s);
            }
            path
        }
        (None, Some(p)) => {
            let catalog = inputs.catalog(p)?;
            let growth = labeled_prices(&args.growth)
                .map_err(|_| CliError::Usage("expected --growth CODE=PCT".into()))?;
            let mut codes: Vec<&str> = models.iter().flat_map(|(_, m)| [m.code1.as_str(), m.code2.as_str()]).collect();
            codes.sort_unstable();
            codes.dedup();
            growth_path(&catalog, &growth, &codes, args.to)?
        }
        _ => return Err(CliError::Usage("give exactly one of --scenario or --cpi".into())),
    };
    let mut entries = labeled_prices(&args.entry)?;
    for (label, spec) in &models {
        if !entries.contains_key(label) {
            let p = crate::regression::evaluate_model(spec, &path, args.from).map_err(data_err)?;
            entries.insert(label.clone(), p);
        }
    }
    let ranked = compare_models(&models, &path, args.from, args.to, &entries).map_err(data_err)?;
    let mut tsv = String::from("rank\tlabel\tentry\tend\treturn_pct\n");
    for (k, r) in ranked.iter().enumerate() {
        let _ = writeln!(tsv, "{}\t{}\t{}\t{}\t{:.2}", k + 1, r.label, f3(r.entry_price), f3(r.end_price), r.return_pct);
    }
    let mut projections = BTreeMap::new();
    for (label, spec) in &models {
        projections.insert(label.clone(), predict_series(spec, &path, args.from, args.to).map_err(data_err)?);
    }
    let _ = write!(tsv, "# projections\n{}", write_series_csv(projections.iter().map(|(k, v)| (k.as_str(), v))).replace(',', "\t"));
    Ok(Report {
        command: "compare",
        body: json!({ "from": args.from, "to": args.to, "ranked": ranked, "projections": projections }),
        tsv,
    })
}

const MIN_SYNTH_PRICE: f64 = 10.0;

fn run_synth(args: &SynthArgs) -> Result<Report, CliError> {
    let cat_from = args.start.add_months(-(args.max_lag as i64));
    let catalog = generate_catalog(args.series, cat_from, args.anchor, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut truth = random_truth(&catalog, args.start, args.anchor, 0, args.max_lag as i32, args.seed);
    // Share prices are positive: lift the intercept so the noiseless path stays at or above 10.
    let noiseless = predict_series(&truth.spec, &catalog, args.start, args.anchor).map_err(data_err)?;
    let low = noiseless.values().iter().cloned().fold(f64::INFINITY, f64::min);
    truth.spec.d += (MIN_SYNTH_PRICE - low).max(0.0);
    truth.noise_sigma = args.noise * price_std(&truth, &catalog).map_err(data_err)?;
    let price = synthesize_price(&truth, &catalog).map_err(data_err)?;

    fs::create_dir_all(&args.output.out).map_err(data_err)?;
    let write = |name: &str, text: String| fs::write(args.output.out.join(name), text).map_err(data_err);
    write("cpi.csv", catalog.to_csv())?;
    write("price.csv", write_series_csv([("SYN", &price)]))?;
    write("truth.json", serde_json::to_string_pretty(&truth).expect("serializable") + "\n")?;

    // The sterr column carries the noise sigma.
    let tsv = format!("{MODEL_HEADER}\n{}\n", model_row(&truth.spec, truth.noise_sigma));
    Ok(Report {
        command: "synth",
        body: json!({ "truth": truth, "files": ["cpi.csv", "price.csv", "truth.json"] }),
        tsv,
    })
}

fn run_normalize(args: &NormalizeArgs, inputs: &mut Inputs) -> Result<Report, CliError> {
    let cols = inputs.columns(&args.prices)?;
    let normed = cols
        .iter()
        .map(|(k, s)| Ok((k.clone(), normalize_to_peak(s, args.from, args.to).map_err(|e| CliError::Data(format!("{k}: {e}")))?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let tsv = write_series_csv(normed.iter().map(|(k, s)| (k.as_str(), s))).replace(',', "\t");
    Ok(Report {
        command: "normalize",
        body: json!({ "from": args.from, "to": args.to, "series": normed.iter().map(|(k, s)| json!({"code": k, "series": s})).collect::<Vec<_>>() }),
        tsv,
    })
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    Ok(pool.install(f))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut inputs = Inputs::default();
    macro_rules! go {
        ($args:expr, $run:expr) => {{
            let args = $args;
            let config = serde_json::to_value(&args).expect("serializable");
            let report = with_threads(args.output.threads, || $run(&args, &mut inputs))??;
            write_report(&report, config, inputs, &args.output)
        }};
    }
    match cli.command {
        Command::Search(a) => go!(a, run_search),
        Command::Stability(a) => go!(a, run_stability),
        Command::Corr(a) => go!(a, run_corr),
        Command::Adf(a) => go!(a, run_adf),
        Command::Coint(a) => go!(a, run_coint),
        Command::Sensitivity(a) => go!(a, run_sensitivity),
        Command::Compare(a) => go!(a, run_compare),
        Command::Synth(a) => go!(a, |a: &SynthArgs, _: &mut Inputs| run_synth(a)),
        Command::Normalize(a) => go!(a, run_normalize),
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
