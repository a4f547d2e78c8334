//! Result-file emission.
//!
//! Every number is written with 17 significant digits so that reruns can
//! be compared byte for byte. Files are written to a temporary name and
//! renamed into place, so a crash never leaves a half-written artifact.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use tcback::engine::BacktestResult;
use tcback::metrics::YearlyMetrics;

use crate::manifest::{renewing_label, trading_label, RunPoint};

/// A finished grid point: its identity plus everything the reports need.
#[derive(Debug, Clone)]
pub struct CompletedRun {
    pub point: RunPoint,
    pub metrics: tcback::engine::PerfMetrics,
    pub zero_trailing_average_dates: Vec<chrono::NaiveDate>,
}

/// A failed grid point, kept machine-readable for `failures.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub key: String,
    pub error: String,
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!("{name}.tmp"));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_else(|| "null".into())
}

fn float_array(xs: &[f64]) -> String {
    let cells: Vec<String> = xs.iter().map(|&x| fmt(x)).collect();
    format!("[{}]", cells.join(", "))
}

/// Date series `(date, wealth, cumulative costs, convexity weight)`; the
/// weight column appears only for the dynamic portfolio.
pub fn write_wealth_csv(path: &Path, result: &BacktestResult) -> Result<()> {
    let mut buf = String::with_capacity(result.dates.len() * 64 + 64);
    match &result.alpha_path {
        Some(alphas) => {
            buf.push_str("date,wealth,cumulative_tc,alpha\n");
            for (i, date) in result.dates.iter().enumerate() {
                buf.push_str(&format!(
                    "{date},{},{},{}\n",
                    fmt(result.wealth_path[i]),
                    fmt(result.cumulative_tc_path[i]),
                    fmt(alphas[i])
                ));
            }
        }
        None => {
            buf.push_str("date,wealth,cumulative_tc\n");
            for (i, date) in result.dates.iter().enumerate() {
                buf.push_str(&format!(
                    "{date},{},{}\n",
                    fmt(result.wealth_path[i]),
                    fmt(result.cumulative_tc_path[i])
                ));
            }
        }
    }
    write_atomic(path, &buf)
}

fn yearly_json(y: &YearlyMetrics, indent: &str) -> String {
    let years: Vec<String> = y.years.iter().map(|v| v.to_string()).collect();
    format!(
        "{{\n{indent}  \"years\": [{}],\n{indent}  \"returns\": {},\n{indent}  \"risk_free\": {},\n{indent}  \"mean_return\": {},\n{indent}  \"std_return\": {},\n{indent}  \"sharpe_ratio\": {}\n{indent}}}",
        years.join(", "),
        float_array(&y.returns),
        float_array(&y.risk_free),
        fmt_opt(y.mean_return),
        fmt_opt(y.std_return),
        fmt_opt(y.sharpe_ratio)
    )
}

/// Single-run summary document. The schema is fixed: parameters that do
/// not apply to the run's kind are `null`.
pub fn metrics_json(run: &CompletedRun) -> String {
    let p = &run.point;
    let m = &run.metrics;
    let dates: Vec<String> = run
        .zero_trailing_average_dates
        .iter()
        .map(|d| format!("\"{d}\""))
        .collect();
    format!(
        "{{\n  \"key\": \"{}\",\n  \"kind\": \"{}\",\n  \"d\": {},\n  \"trading\": \"{}\",\n  \"renewing\": \"{}\",\n  \"tc_buy\": {},\n  \"tc_sell\": {},\n  \"alpha\": {},\n  \"beta\": {},\n  \"initial_wealth\": {},\n  \"final_wealth\": {},\n  \"final_cumulative_tc\": {},\n  \"qv_relative_tc\": {},\n  \"mean_excess_return\": {},\n  \"yearly\": {},\n  \"zero_trailing_average_dates\": [{}]\n}}\n",
        p.key,
        p.kind_name,
        p.config.d,
        trading_label(p.config.trading),
        renewing_label(p.config.renewing),
        fmt(p.config.rates.buy),
        fmt(p.config.rates.sell),
        fmt_opt(p.alpha),
        fmt_opt(p.beta),
        fmt(p.config.initial_wealth),
        fmt(m.final_wealth),
        fmt(m.final_cumulative_tc),
        fmt(m.qv_relative_tc),
        fmt_opt(m.mean_excess_return),
        yearly_json(&m.yearly, "  "),
        dates.join(", ")
    )
}

/// Grid-level table: one row per metric, one column per run, in grid
/// order. Metrics a run does not have leave an empty cell.
pub fn summary_csv(runs: &[CompletedRun]) -> String {
    let mut buf = String::from("metric");
    for run in runs {
        buf.push(',');
        buf.push_str(&run.point.key);
    }
    buf.push('\n');
    let rows: [(&str, fn(&CompletedRun) -> Option<f64>); 7] = [
        ("final_wealth", |r| Some(r.metrics.final_wealth)),
        ("final_cumulative_tc", |r| {
            Some(r.metrics.final_cumulative_tc)
        }),
        ("qv_relative_tc", |r| Some(r.metrics.qv_relative_tc)),
        ("mean_yearly_return", |r| r.metrics.yearly.mean_return),
        ("std_yearly_return", |r| r.metrics.yearly.std_return),
        ("sharpe_ratio", |r| r.metrics.yearly.sharpe_ratio),
        ("mean_excess_return", |r| r.metrics.mean_excess_return),
    ];
    for (name, pick) in rows {
        buf.push_str(name);
        for run in runs {
            buf.push(',');
            if let Some(value) = pick(run) {
                buf.push_str(&fmt(value));
            }
        }
        buf.push('\n');
    }
    buf
}

pub fn failures_json(failures: &[Failure]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(failures)?;
    text.push('\n');
    Ok(text)
}
