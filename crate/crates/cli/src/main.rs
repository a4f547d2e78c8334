//! Command-line driver: runs manifest-defined backtest grids, generates
//! synthetic market data, and validates inputs without running anything.

mod manifest;
mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use tcback::engine::{run_backtest, RenewingFrequency, TradingFrequency};
use tcback::io::{load_market_csv, load_risk_free_csv, write_market_csv, RiskFreeSeries};
use tcback::market::MarketDataset;
use tcback::metrics::mean_excess_return;
use tcback::synthetic::{generate, SyntheticParams};

use manifest::{load_manifest, RunPoint};
use report::{
    failures_json, metrics_json, summary_csv, write_atomic, write_wealth_csv, CompletedRun,
    Failure,
};

#[derive(Parser)]
#[command(
    name = "tcback",
    version,
    about = "Backtests of systematically generated stock portfolios under proportional transaction costs"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run every grid point of a manifest and write result artifacts.
    Run(RunArgs),
    /// Generate a synthetic market CSV and print its content digest.
    Gen(GenArgs),
    /// Check a manifest or a data CSV without running anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Manifest path (TOML).
    manifest: PathBuf,
    /// Output directory; overrides the manifest's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    stocks: usize,
    #[arg(long, default_value_t = 1250)]
    days: usize,
    /// First trading date; must fall on a weekday.
    #[arg(long, default_value = "2000-01-03")]
    start: NaiveDate,
    /// Annualized drift range, sampled per stock.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, 0.12])]
    drift: Vec<f64>,
    /// Annualized volatility range, sampled per stock.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.10, 0.35])]
    volatility: Vec<f64>,
    /// Probability that a stock pays a dividend on a given day.
    #[arg(long, default_value_t = 0.02)]
    dividend_probability: f64,
    /// Dividend yield range, sampled per payment.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0005, 0.004])]
    dividend_yield: Vec<f64>,
    /// Probability that a stock delists on a given day.
    #[arg(long, default_value_t = 0.0)]
    delisting_hazard: f64,
    /// Initial capitalization range, sampled log-uniformly per stock.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1e8, 2e11])]
    initial_cap: Vec<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// A manifest (.toml) or a market/risk-free data file (.csv).
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.verb {
        Verb::Run(args) => cmd_run(args),
        Verb::Gen(args) => cmd_gen(args),
        Verb::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let (manifest, points) = load_manifest(&args.manifest)?;
    let out = args
        .out
        .or_else(|| manifest.out.clone())
        .context("no output directory: pass --out or set `out` in the manifest")?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let dataset = load_market_csv(&manifest.market)
        .with_context(|| format!("loading market data {}", manifest.market.display()))?;
    let risk_free = match &manifest.risk_free {
        Some(path) => load_risk_free_csv(path)
            .with_context(|| format!("loading risk-free data {}", path.display()))?,
        None => RiskFreeSeries::zero(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<Result<CompletedRun, Failure>> = pool.install(|| {
        points
            .par_iter()
            .map(|point| execute_point(point, &dataset, &risk_free, &out))
            .collect()
    });

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(run) => completed.push(run),
            Err(failure) => failures.push(failure),
        }
    }

    attach_excess_returns(&mut completed);
    for run in &completed {
        let path = out.join(&run.point.key).join("metrics.json");
        write_atomic(&path, &metrics_json(run))?;
    }
    write_atomic(&out.join("summary.csv"), &summary_csv(&completed))?;
    write_atomic(&out.join("failures.json"), &failures_json(&failures)?)?;

    for failure in &failures {
        eprintln!("failed: {}: {}", failure.key, failure.error);
    }
    println!(
        "{} runs completed, {} failed -> {}",
        completed.len(),
        failures.len(),
        out.display()
    );
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn execute_point(
    point: &RunPoint,
    dataset: &MarketDataset,
    risk_free: &RiskFreeSeries,
    out: &Path,
) -> Result<CompletedRun, Failure> {
    let attempt = || -> Result<CompletedRun> {
        let dir = out.join(&point.key);
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating run directory {}", dir.display()))?;
        let result = run_backtest(&point.config, dataset, risk_free)?;
        write_wealth_csv(&dir.join("wealth.csv"), &result)?;
        Ok(CompletedRun {
            point: point.clone(),
            metrics: result.metrics,
            zero_trailing_average_dates: result.zero_trailing_average_dates,
        })
    };
    attempt().map_err(|err| Failure {
        key: point.key.clone(),
        error: format!("{err:#}"),
    })
}

/// Fills in each run's mean yearly return difference against the
/// index-tracking run with the same size, frequencies, and cost rate.
/// Runs without such a twin, and the index-tracking runs themselves, keep
/// the field absent.
fn attach_excess_returns(completed: &mut [CompletedRun]) {
    type TwinKey = (usize, TradingFrequency, RenewingFrequency, u64, u64);
    let twin_key = |point: &RunPoint| -> TwinKey {
        (
            point.config.d,
            point.config.trading,
            point.config.renewing,
            point.config.rates.buy.to_bits(),
            point.config.rates.sell.to_bits(),
        )
    };
    let mut benchmarks: HashMap<TwinKey, tcback::metrics::YearlyMetrics> = HashMap::new();
    for run in completed.iter() {
        if run.point.kind_name == "index_tracking" {
            benchmarks.insert(twin_key(&run.point), run.metrics.yearly.clone());
        }
    }
    for run in completed.iter_mut() {
        if run.point.kind_name == "index_tracking" {
            continue;
        }
        if let Some(benchmark) = benchmarks.get(&twin_key(&run.point)) {
            run.metrics.mean_excess_return = mean_excess_return(&run.metrics.yearly, benchmark);
        }
    }
}

fn range_pair(values: &[f64]) -> (f64, f64) {
    (values[0], values[1])
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let params = SyntheticParams {
        seed: args.seed,
        n_stocks: args.stocks,
        n_days: args.days,
        drift: range_pair(&args.drift),
        volatility: range_pair(&args.volatility),
        dividend_probability: args.dividend_probability,
        dividend_yield: range_pair(&args.dividend_yield),
        delisting_hazard: args.delisting_hazard,
        initial_cap: range_pair(&args.initial_cap),
        start: args.start,
    };
    let dataset = generate(&params)?;
    write_market_csv(&dataset, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let bytes =
        std::fs::read(&args.out).with_context(|| format!("reading back {}", args.out.display()))?;
    let digest = Sha256::digest(&bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    println!(
        "wrote {} stocks x {} days -> {}",
        dataset.n_stocks(),
        dataset.n_days(),
        args.out.display()
    );
    println!("sha256:{hex}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let extension = args
        .path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match extension.as_str() {
        "toml" => {
            let (manifest, points) = load_manifest(&args.path)?;
            std::fs::metadata(&manifest.market)
                .with_context(|| format!("market data {}", manifest.market.display()))?;
            if let Some(rf) = &manifest.risk_free {
                std::fs::metadata(rf)
                    .with_context(|| format!("risk-free data {}", rf.display()))?;
            }
            println!("manifest ok: {} grid points", points.len());
        }
        "csv" => match load_market_csv(&args.path) {
            Ok(dataset) => println!(
                "market data ok: {} stocks, {} days",
                dataset.n_stocks(),
                dataset.n_days()
            ),
            Err(market_err) => match load_risk_free_csv(&args.path) {
                Ok(_) => println!("risk-free data ok"),
                Err(_) => {
                    return Err(market_err).with_context(|| {
                        format!("{} is neither market nor risk-free data", args.path.display())
                    });
                }
            },
        },
        other => bail!("unsupported file type {other:?}: expected .toml or .csv"),
    }
    Ok(ExitCode::SUCCESS)
}
