//! Declarative run manifests.
//!
//! A manifest is a TOML file naming the input data, the output directory,
//! and a configuration grid: lists of cost rates, portfolio sizes,
//! frequencies, and portfolio kinds whose cartesian product defines the
//! runs. Diversity and smoothing parameters live in their own sections and
//! apply to the kinds that need them.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use tcback::engine::{BacktestConfig, PortfolioKind, RenewingFrequency, TradingFrequency};
use tcback::portfolios::DiversityConfig;
use tcback::rebalance::CostRates;
use tcback::smoothing::SmoothingConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Market data CSV, relative to the manifest's directory.
    pub market: PathBuf,
    /// Risk-free yield CSV, relative to the manifest's directory. A zero
    /// yield is assumed when absent.
    pub risk_free: Option<PathBuf>,
    /// Output directory, relative to the manifest's directory. The `--out`
    /// flag overrides it.
    pub out: Option<PathBuf>,
    #[serde(default = "default_initial_wealth")]
    pub initial_wealth: f64,
    pub grid: GridSpec,
    pub diversity: Option<DiversitySpec>,
    pub smoothing: Option<SmoothingSpec>,
}

fn default_initial_wealth() -> f64 {
    1000.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Portfolio kinds: `index_tracking`, `equal`, `entropy`, `diversity`,
    /// `diversity_dynamic`.
    pub kinds: Vec<String>,
    /// Proportional cost rates, applied to both sides of every trade.
    pub tc: Vec<f64>,
    /// Constituent list sizes.
    pub d: Vec<usize>,
    pub trading: Vec<TradingFrequency>,
    pub renewing: Vec<RenewingFrequency>,
}

/// Parameters for the diversity kinds: the power `p`, the moving-average
/// window `delta`, and the convexity weights to sweep for the static kind.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversitySpec {
    pub p: f64,
    pub alpha: Vec<f64>,
    pub delta: usize,
}

/// Parameters for the dynamic convexity weight: its baseline `alpha0`, the
/// sensitivities to sweep, and the relative-cost cap `xi`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSpec {
    pub alpha0: f64,
    pub beta: Vec<f64>,
    pub xi: f64,
}

/// One expanded grid point, ready to run.
#[derive(Debug, Clone)]
pub struct RunPoint {
    /// Directory and column name, unique within the grid.
    pub key: String,
    pub kind_name: &'static str,
    pub config: BacktestConfig,
    /// Convexity weight, for the diversity kinds.
    pub alpha: Option<f64>,
    /// Sensitivity, for the dynamic diversity kind.
    pub beta: Option<f64>,
}

pub fn trading_label(f: TradingFrequency) -> &'static str {
    match f {
        TradingFrequency::Daily => "daily",
        TradingFrequency::Weekly => "weekly",
        TradingFrequency::Monthly => "monthly",
    }
}

pub fn renewing_label(f: RenewingFrequency) -> &'static str {
    match f {
        RenewingFrequency::Weekly => "weekly",
        RenewingFrequency::Monthly => "monthly",
        RenewingFrequency::Quarterly => "quarterly",
    }
}

/// Parses a manifest file and expands its grid, resolving the data and
/// output paths against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<RunPoint>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let mut manifest: Manifest =
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest.market = base.join(&manifest.market);
    manifest.risk_free = manifest.risk_free.map(|rf| base.join(rf));
    manifest.out = manifest.out.map(|out| base.join(out));
    let points = expand_grid(&manifest)?;
    Ok((manifest, points))
}

/// Expands the manifest's grid into validated run points, in a fixed
/// order: kinds, then sizes, trading, renewing, cost rates, and last the
/// kind-specific parameter sweep.
pub fn expand_grid(manifest: &Manifest) -> Result<Vec<RunPoint>> {
    let grid = &manifest.grid;
    if grid.kinds.is_empty() {
        bail!("grid.kinds: the grid is empty");
    }
    if grid.tc.is_empty() {
        bail!("grid.tc: no cost rates listed");
    }
    if grid.d.is_empty() {
        bail!("grid.d: no portfolio sizes listed");
    }
    if grid.trading.is_empty() {
        bail!("grid.trading: no trading frequencies listed");
    }
    if grid.renewing.is_empty() {
        bail!("grid.renewing: no renewing frequencies listed");
    }

    let mut points = Vec::new();
    for kind in &grid.kinds {
        for &d in &grid.d {
            for &trading in &grid.trading {
                for &renewing in &grid.renewing {
                    for &tc in &grid.tc {
                        let rates = CostRates::uniform(tc)
                            .with_context(|| format!("grid.tc: rate {tc}"))?;
                        let base = BacktestConfig {
                            kind: PortfolioKind::Equal,
                            d,
                            trading,
                            renewing,
                            rates,
                            initial_wealth: manifest.initial_wealth,
                        };
                        let base_key = format!(
                            "{kind}_d{d}_{}_{}_tc{}",
                            trading_label(trading),
                            renewing_label(renewing),
                            tc * 100.0
                        );
                        expand_kind(manifest, kind, &base, &base_key, &mut points)?;
                    }
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for point in &points {
        if !seen.insert(point.key.as_str()) {
            bail!("grid: duplicate run key {} (repeated list entries?)", point.key);
        }
        point
            .config
            .validate()
            .with_context(|| format!("grid point {}", point.key))?;
    }
    Ok(points)
}

fn expand_kind(
    manifest: &Manifest,
    kind: &str,
    base: &BacktestConfig,
    base_key: &str,
    points: &mut Vec<RunPoint>,
) -> Result<()> {
    let plain = |name: &'static str, portfolio: PortfolioKind| RunPoint {
        key: base_key.to_string(),
        kind_name: name,
        config: BacktestConfig {
            kind: portfolio,
            ..base.clone()
        },
        alpha: None,
        beta: None,
    };
    match kind {
        "index_tracking" => points.push(plain("index_tracking", PortfolioKind::IndexTracking)),
        "equal" => points.push(plain("equal", PortfolioKind::Equal)),
        "entropy" => points.push(plain("entropy", PortfolioKind::Entropy)),
        "diversity" => {
            let spec = manifest
                .diversity
                .as_ref()
                .context("diversity: section required by grid.kinds entry \"diversity\"")?;
            for &alpha in &spec.alpha {
                let cfg = DiversityConfig::new(spec.p, alpha, spec.delta)
                    .with_context(|| format!("diversity: alpha {alpha}"))?;
                points.push(RunPoint {
                    key: format!("{base_key}_a{alpha}"),
                    kind_name: "diversity",
                    config: BacktestConfig {
                        kind: PortfolioKind::Diversity(cfg),
                        ..base.clone()
                    },
                    alpha: Some(alpha),
                    beta: None,
                });
            }
        }
        "diversity_dynamic" => {
            let div = manifest.diversity.as_ref().context(
                "diversity: section required by grid.kinds entry \"diversity_dynamic\"",
            )?;
            let smo = manifest.smoothing.as_ref().context(
                "smoothing: section required by grid.kinds entry \"diversity_dynamic\"",
            )?;
            for &beta in &smo.beta {
                let cfg = SmoothingConfig::new(smo.alpha0, beta, smo.xi)
                    .with_context(|| format!("smoothing: beta {beta}"))?;
                points.push(RunPoint {
                    key: format!("{base_key}_b{beta}"),
                    kind_name: "diversity_dynamic",
                    config: BacktestConfig {
                        kind: PortfolioKind::DiversityDynamic {
                            p: div.p,
                            delta: div.delta,
                            smoothing: cfg,
                        },
                        ..base.clone()
                    },
                    alpha: Some(smo.alpha0),
                    beta: Some(beta),
                });
            }
        }
        other => bail!("grid.kinds: unknown portfolio kind {other:?}"),
    }
    Ok(())
}
