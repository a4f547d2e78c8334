//! Deterministic synthetic market panels.
//!
//! Generation draws from a single ChaCha8 stream seeded from `seed`,
//! consumed stock by stock and day by day in a fixed order (per stock:
//! drift, volatility, initial capitalization; per day: delisting draw,
//! normal shock, dividend draw, then the yield when a dividend is due).
//! Equal parameters therefore reproduce the panel byte for byte.
//!
//! Capitalizations follow per-stock geometric Brownian motion at daily
//! resolution. Each stored price return is re-derived from the stored
//! capitalization pair, so decomposing the panel recovers the dividend
//! rates exactly: a day without a dividend decomposes to a dividend rate
//! of exactly zero.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::market::{MarketDataset, StockSeries};

const TRADING_DAYS_PER_YEAR: f64 = 250.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    /// Annualized drift range, sampled uniformly per stock.
    pub drift: (f64, f64),
    /// Annualized volatility range, sampled uniformly per stock. The lower
    /// bound must be positive.
    pub volatility: (f64, f64),
    /// Probability that a stock pays a dividend on a given day.
    pub dividend_probability: f64,
    /// Dividend yield range, sampled uniformly per payment.
    pub dividend_yield: (f64, f64),
    /// Probability that a stock delists on a given day.
    pub delisting_hazard: f64,
    /// Initial capitalization range, sampled log-uniformly per stock.
    pub initial_cap: (f64, f64),
    /// First trading date; must fall on a weekday.
    pub start: NaiveDate,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            seed: 42,
            n_stocks: 100,
            n_days: 1250,
            drift: (0.0, 0.12),
            volatility: (0.10, 0.35),
            dividend_probability: 0.02,
            dividend_yield: (0.0005, 0.004),
            delisting_hazard: 0.0,
            initial_cap: (1e8, 2e11),
            start: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
        }
    }
}

fn check_range(name: &'static str, range: (f64, f64)) -> Result<()> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("({lo}, {hi}) is not an ordered finite range"),
        });
    }
    Ok(())
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("{p} is not a probability"),
        });
    }
    Ok(())
}

fn validate(params: &SyntheticParams) -> Result<()> {
    if params.n_stocks < 2 {
        return Err(Error::InvalidParameter {
            name: "n_stocks",
            reason: format!("a panel needs at least two stocks, got {}", params.n_stocks),
        });
    }
    if params.n_days < 2 {
        return Err(Error::InvalidParameter {
            name: "n_days",
            reason: format!("a panel needs at least two days, got {}", params.n_days),
        });
    }
    check_range("drift", params.drift)?;
    check_range("volatility", params.volatility)?;
    check_range("dividend_yield", params.dividend_yield)?;
    check_range("initial_cap", params.initial_cap)?;
    if params.volatility.0 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "volatility",
            reason: format!("volatility must be positive, got {}", params.volatility.0),
        });
    }
    if params.dividend_yield.0 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "dividend_yield",
            reason: format!("yields must be nonnegative, got {}", params.dividend_yield.0),
        });
    }
    if params.initial_cap.0 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "initial_cap",
            reason: format!("capitalizations must be positive, got {}", params.initial_cap.0),
        });
    }
    check_probability("dividend_probability", params.dividend_probability)?;
    check_probability("delisting_hazard", params.delisting_hazard)?;
    if matches!(params.start.weekday(), Weekday::Sat | Weekday::Sun) {
        return Err(Error::InvalidParameter {
            name: "start",
            reason: format!("{} falls on a weekend", params.start),
        });
    }
    Ok(())
}

fn sample_uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    range.0 + rng.gen::<f64>() * (range.1 - range.0)
}

fn sample_log_uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let lo = range.0.ln();
    let hi = range.1.ln();
    (lo + rng.gen::<f64>() * (hi - lo)).exp()
}

fn weekday_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut date = start;
    while dates.len() < n {
        if !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(date);
        }
        date = date.succ_opt().expect("calendar exhausted");
    }
    dates
}

/// Generates a reproducible market panel on consecutive weekdays.
pub fn generate(params: &SyntheticParams) -> Result<MarketDataset> {
    validate(params)?;
    let dates = weekday_dates(params.start, params.n_days);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stocks = Vec::with_capacity(params.n_stocks);
    for s in 0..params.n_stocks {
        let drift = sample_uniform(&mut rng, params.drift);
        let volatility = sample_uniform(&mut rng, params.volatility);
        let cap0 = sample_log_uniform(&mut rng, params.initial_cap);
        let daily_vol = volatility / TRADING_DAYS_PER_YEAR.sqrt();
        let daily_mean = drift / TRADING_DAYS_PER_YEAR - 0.5 * daily_vol * daily_vol;

        let mut caps = vec![cap0];
        let mut returns = vec![0.0];
        let mut delisted = false;
        for _ in 1..params.n_days {
            let delists = rng.gen::<f64>() < params.delisting_hazard;
            let shock: f64 = rng.sample(StandardNormal);
            let gross = (daily_mean + daily_vol * shock).exp();
            if delists {
                returns.push(gross - 1.0);
                delisted = true;
                break;
            }
            let pays = rng.gen::<f64>() < params.dividend_probability;
            let yield_rate = if pays {
                sample_uniform(&mut rng, params.dividend_yield)
            } else {
                0.0
            };
            let cap_prev = *caps.last().unwrap();
            let cap = cap_prev * gross;
            // Derive the price return from the stored capitalization pair
            // so decomposition recovers the dividend exactly.
            let growth = cap / cap_prev - 1.0;
            caps.push(cap);
            returns.push(growth + yield_rate);
        }
        stocks.push(StockSeries::new(
            format!("S{s:04}"),
            0,
            caps,
            returns,
            delisted,
        )?);
    }
    MarketDataset::new(dates, stocks)
}
