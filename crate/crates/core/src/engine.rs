//! Backtest orchestration.
//!
//! A run starts by buying the target portfolio at the first date with the
//! initial wealth (formation cost is sunk, so the day-0 trade record
//! carries zero cost). Afterwards each day accrues holdings and dividends;
//! on trading days the engine recomputes target weights over the current
//! constituent list and rebalances through the self-financing solver, with
//! stocks that left the list liquidated through zero targets. Renewal days
//! rebuild the list from the largest capitalizations before targets are
//! computed. The dynamic diversity portfolio additionally evolves a
//! fictitious constant-weight baseline in lockstep and retunes its
//! convexity weight from the baseline's realized relative costs at each
//! renewal.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RiskFreeSeries;
use crate::market::{
    accrue_between_trades, accumulate_dividends, decompose_return, MarketDataset,
    ReturnDecomposition,
};
use crate::metrics::{yearly_metrics, YearlyMetrics};
use crate::portfolios::{
    market_weights, moving_average, smoothed_market_weights, target_diversity, target_entropy,
    target_equal, target_index_tracking, DiversityConfig,
};
use crate::rebalance::{rebalance, CostRates, RebalanceProblem};
use crate::smoothing::{qv_relative_tc, quarterly_relative_tc, update_alpha, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradingFrequency {
    Daily,
    Weekly,
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewingFrequency {
    Weekly,
    Monthly,
    Quarterly,
}

/// The portfolio family driving target weights.
#[derive(Debug, Clone, PartialEq)]
pub enum PortfolioKind {
    /// Hold the market weights; trades only when the list changes or
    /// dividends arrive.
    IndexTracking,
    /// Equal weight over the current list, retraded every trading day.
    Equal,
    /// Entropy weight over the current list, retraded every trading day.
    Entropy,
    /// Diversity weight over smoothed market weights with a constant
    /// convexity weight.
    Diversity(DiversityConfig),
    /// Diversity weight whose convexity weight is retuned at renewals from
    /// a lockstep constant-weight baseline.
    DiversityDynamic {
        p: f64,
        delta: usize,
        smoothing: SmoothingConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub kind: PortfolioKind,
    pub d: usize,
    pub trading: TradingFrequency,
    pub renewing: RenewingFrequency,
    pub rates: CostRates,
    pub initial_wealth: f64,
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("a portfolio needs at least two stocks, got {}", self.d),
            });
        }
        if !self.initial_wealth.is_finite() || self.initial_wealth <= 0.0 {
            return Err(Error::NonPositiveWealth {
                wealth: self.initial_wealth,
            });
        }
        match &self.kind {
            PortfolioKind::Diversity(cfg) => {
                DiversityConfig::new(cfg.p, cfg.alpha, cfg.delta)?;
            }
            PortfolioKind::DiversityDynamic {
                p,
                delta,
                smoothing,
            } => {
                SmoothingConfig::new(smoothing.alpha0, smoothing.beta, smoothing.xi)?;
                DiversityConfig::new(*p, smoothing.alpha0, *delta)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Day indexes on which the engine trades and renews the constituent list.
/// Every renewal day is also a trading day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calendar {
    pub trading_days: Vec<usize>,
    pub renewal_days: Vec<usize>,
}

fn last_of_groups<K: PartialEq>(dates: &[NaiveDate], key: impl Fn(&NaiveDate) -> K) -> Vec<usize> {
    let mut out = Vec::new();
    for (idx, date) in dates.iter().enumerate() {
        if idx + 1 == dates.len() || key(date) != key(&dates[idx + 1]) {
            out.push(idx);
        }
    }
    out
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Builds the trading and renewal day sets: the last available date of each
/// ISO week, calendar month, or calendar quarter, with daily trading using
/// every date. Trailing partial periods close on their last available date.
pub fn build_calendar(
    dates: &[NaiveDate],
    trading: TradingFrequency,
    renewing: RenewingFrequency,
) -> Result<Calendar> {
    if dates.is_empty() {
        return Err(Error::InvalidDataset {
            reason: "empty date sequence".into(),
        });
    }
    let week_key = |d: &NaiveDate| {
        let week = d.iso_week();
        (week.year(), week.week())
    };
    let month_key = |d: &NaiveDate| (d.year(), d.month());
    let quarter_key = |d: &NaiveDate| (d.year(), (d.month() - 1) / 3);

    let trading_days = match trading {
        TradingFrequency::Daily => (0..dates.len()).collect(),
        TradingFrequency::Weekly => last_of_groups(dates, week_key),
        TradingFrequency::Monthly => last_of_groups(dates, month_key),
    };
    let renewal_days = match renewing {
        RenewingFrequency::Weekly => last_of_groups(dates, week_key),
        RenewingFrequency::Monthly => last_of_groups(dates, month_key),
        RenewingFrequency::Quarterly => last_of_groups(dates, quarter_key),
    };
    let trading_days = merge_sorted(&trading_days, &renewal_days);
    Ok(Calendar {
        trading_days,
        renewal_days,
    })
}

/// The `d` stocks with the largest capitalizations on `day`, ties broken
/// by identifier ascending. Returned sorted by identifier.
pub fn renew_constituents(dataset: &MarketDataset, day: usize, d: usize) -> Result<Vec<usize>> {
    let mut listed: Vec<(usize, f64)> = dataset
        .listed_on(day)
        .into_iter()
        .map(|i| (i, dataset.stocks()[i].cap_on(day).unwrap_or(0.0)))
        .collect();
    if listed.len() < d {
        return Err(Error::TooFewStocks {
            required: d,
            available: listed.len(),
        }
        .at_date(dataset.dates()[day]));
    }
    listed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut members: Vec<usize> = listed[..d].iter().map(|&(i, _)| i).collect();
    members.sort_unstable();
    Ok(members)
}

/// One executed (or, on day 0, formed) rebalance.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub day: usize,
    pub date: NaiveDate,
    /// Pre-trade invested wealth, exclusive of accrued dividends.
    pub wealth_before: f64,
    /// Dividend cash accumulated since the previous trade.
    pub dividends: f64,
    pub buys: f64,
    pub sells: f64,
    pub transaction_costs: f64,
    pub wealth_after: f64,
    pub scale: f64,
    pub renewal: bool,
}

/// Summary statistics of one run, serialized as the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMetrics {
    pub final_wealth: f64,
    pub final_cumulative_tc: f64,
    pub yearly: YearlyMetrics,
    /// Mean per-year return difference against a benchmark run; attached
    /// after the fact, absent until then.
    pub mean_excess_return: Option<f64>,
    /// Quadratic variation of per-trading-day relative transaction costs.
    /// The dynamic portfolio measures its costs against the baseline's
    /// wealth; every other portfolio measures against its own.
    pub qv_relative_tc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub dates: Vec<NaiveDate>,
    /// Account value per day: invested wealth plus dividend cash awaiting
    /// the next trade.
    pub wealth_path: Vec<f64>,
    pub cumulative_tc_path: Vec<f64>,
    /// Convexity weight in force each day; present only for the dynamic
    /// diversity portfolio.
    pub alpha_path: Option<Vec<f64>>,
    pub trades: Vec<TradeRecord>,
    pub metrics: PerfMetrics,
    /// Renewal dates where the trailing four-period cost average was zero
    /// and the convexity weight was left at its baseline.
    pub zero_trailing_average_dates: Vec<NaiveDate>,
}

/// Which target rule a running portfolio applies day to day.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    IndexTracking,
    Equal,
    Entropy,
    Diversity { p: f64 },
}

/// Mutable state of one evolving portfolio (the real one, or the
/// fictitious baseline of a dynamic run).
struct PortfolioState {
    /// Stock indexes held since the last trade, ascending, all with
    /// strictly positive holdings.
    positions: Vec<usize>,
    /// Holdings fixed at the last trade, aligned with `positions`.
    psi_at_trade: Vec<f64>,
    /// Per-position return decompositions since the last trade.
    decomps: Vec<ReturnDecomposition>,
    /// Holdings evolved day by day, used for the daily wealth path.
    psi_daily: Vec<f64>,
    /// Dividend cash collected since the last trade.
    dividend_cash: f64,
    wealth_path: Vec<f64>,
    cumulative_tc_path: Vec<f64>,
    cum_tc: f64,
    trades: Vec<TradeRecord>,
    /// Transaction cost and pre-trade wealth per trading day (zero cost on
    /// trading days where the portfolio held still).
    trading_day_tc: Vec<f64>,
    trading_day_wealth_pre: Vec<f64>,
}

impl PortfolioState {
    fn form(
        day: usize,
        date: NaiveDate,
        members: &[usize],
        targets: &[f64],
        initial_wealth: f64,
    ) -> PortfolioState {
        let mut positions = Vec::new();
        let mut psi = Vec::new();
        for (&stock, &weight) in members.iter().zip(targets) {
            if weight > 0.0 {
                positions.push(stock);
                psi.push(initial_wealth * weight);
            }
        }
        let decomps = positions.iter().map(|_| ReturnDecomposition::default()).collect();
        let psi_daily = psi.clone();
        PortfolioState {
            positions,
            psi_at_trade: psi,
            decomps,
            psi_daily,
            dividend_cash: 0.0,
            wealth_path: vec![initial_wealth],
            cumulative_tc_path: vec![0.0],
            cum_tc: 0.0,
            trades: vec![TradeRecord {
                day,
                date,
                wealth_before: initial_wealth,
                dividends: 0.0,
                buys: 0.0,
                sells: 0.0,
                transaction_costs: 0.0,
                wealth_after: initial_wealth,
                scale: 1.0,
                renewal: true,
            }],
            trading_day_tc: vec![0.0],
            trading_day_wealth_pre: vec![initial_wealth],
        }
    }

    /// Applies one day of returns to every held position.
    fn accrue(&mut self, dataset: &MarketDataset, day: usize) -> Result<()> {
        for (k, &s) in self.positions.iter().enumerate() {
            let stock = &dataset.stocks()[s];
            let (dividend, realised) = match stock.return_on(day) {
                // Past the delisting day the position sits frozen until
                // the next trade liquidates it.
                None => (0.0, 0.0),
                Some(total) => {
                    let cap_prev = stock.cap_on(day - 1).ok_or(Error::InvalidDataset {
                        reason: format!(
                            "{} held without a prior-day capitalization",
                            stock.id()
                        ),
                    })?;
                    let delisted_today = stock.delist_day() == Some(day);
                    decompose_return(cap_prev, stock.cap_on(day), total, delisted_today)
                        .map_err(|e| e.at_date(dataset.dates()[day]))?
                }
            };
            self.decomps[k].push(dividend, realised);
            self.dividend_cash += self.psi_daily[k] * dividend;
            self.psi_daily[k] *= 1.0 + realised;
        }
        Ok(())
    }

    /// Account value today: evolved holdings plus waiting dividend cash.
    fn account_value(&self) -> f64 {
        self.psi_daily.iter().sum::<f64>() + self.dividend_cash
    }

    /// Dividends accumulated since the last trade, from the buffered
    /// decompositions.
    fn pending_dividends(&self) -> Result<f64> {
        if self.decomps.first().is_some_and(|d| d.is_empty()) {
            return Ok(0.0);
        }
        accumulate_dividends(&self.psi_at_trade, &self.decomps)
    }

    /// Records a non-trading day.
    fn mark(&mut self) {
        self.wealth_path.push(self.account_value());
        self.cumulative_tc_path.push(self.cum_tc);
    }

    /// Records a trading day on which the portfolio holds still.
    fn hold(&mut self) {
        let value = self.account_value();
        self.wealth_path.push(value);
        self.cumulative_tc_path.push(self.cum_tc);
        self.trading_day_tc.push(0.0);
        self.trading_day_wealth_pre.push(value);
    }

    /// Rebalances to `targets` over `members`; stocks held but no longer
    /// in `members` are liquidated through zero targets.
    fn trade(
        &mut self,
        dataset: &MarketDataset,
        day: usize,
        members: &[usize],
        targets: &[f64],
        rates: CostRates,
        renewal: bool,
    ) -> Result<()> {
        let date = dataset.dates()[day];
        let (psi_pre, dividends) = if self.decomps.first().is_some_and(|d| d.is_empty()) {
            (self.psi_at_trade.clone(), 0.0)
        } else {
            (
                accrue_between_trades(&self.psi_at_trade, &self.decomps)
                    .map_err(|e| e.at_date(date))?,
                accumulate_dividends(&self.psi_at_trade, &self.decomps)
                    .map_err(|e| e.at_date(date))?,
            )
        };

        let universe = merge_sorted(&self.positions, members);
        let mut holdings = Vec::with_capacity(universe.len());
        let mut target_vec = Vec::with_capacity(universe.len());
        for &stock in &universe {
            holdings.push(match self.positions.binary_search(&stock) {
                Ok(k) => psi_pre[k],
                Err(_) => 0.0,
            });
            target_vec.push(match members.binary_search(&stock) {
                Ok(k) => targets[k],
                Err(_) => 0.0,
            });
        }

        let problem = RebalanceProblem::new(holdings, dividends, target_vec, rates)
            .map_err(|e| e.at_date(date))?;
        let wealth_before = problem.wealth_prev();
        let outcome = rebalance(&problem);

        self.positions.clear();
        self.psi_at_trade.clear();
        for (&stock, &psi) in universe.iter().zip(&outcome.holdings_new) {
            if psi > 0.0 {
                self.positions.push(stock);
                self.psi_at_trade.push(psi);
            }
        }
        self.psi_daily.clear();
        self.psi_daily.extend_from_slice(&self.psi_at_trade);
        self.decomps.clear();
        self.decomps
            .resize_with(self.positions.len(), ReturnDecomposition::default);
        self.dividend_cash = 0.0;

        self.cum_tc += outcome.transaction_costs;
        self.wealth_path.push(outcome.wealth_new);
        self.cumulative_tc_path.push(self.cum_tc);
        self.trading_day_tc.push(outcome.transaction_costs);
        self.trading_day_wealth_pre.push(wealth_before);
        self.trades.push(TradeRecord {
            day,
            date,
            wealth_before,
            dividends,
            buys: outcome.buys,
            sells: outcome.sells,
            transaction_costs: outcome.transaction_costs,
            wealth_after: outcome.wealth_new,
            scale: outcome.scale,
            renewal,
        });
        Ok(())
    }
}

/// Assembles the moving average of market weights for the current members
/// from capitalizations on past trading observations. A member without a
/// quote on some past day contributes its earliest available
/// capitalization instead.
fn member_moving_average(
    dataset: &MarketDataset,
    members: &[usize],
    observation_days: &[usize],
    delta: usize,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(observation_days.len());
    for &day in observation_days {
        let caps: Vec<f64> = members
            .iter()
            .map(|&s| {
                let stock = &dataset.stocks()[s];
                stock
                    .cap_on(day)
                    .unwrap_or_else(|| stock.cap_on(stock.start()).unwrap())
            })
            .collect();
        history.push(market_weights(&caps)?);
    }
    moving_average(&history, delta)
}

fn diversity_targets(
    dataset: &MarketDataset,
    members: &[usize],
    mu: &[f64],
    lambda: &[f64],
    alpha: f64,
    p: f64,
    date: NaiveDate,
) -> Result<Vec<f64>> {
    let mu_bar = smoothed_market_weights(mu, lambda, alpha).map_err(|e| e.at_date(date))?;
    target_diversity(mu, &mu_bar, alpha, p).map_err(|e| match e {
        Error::NegativeDiversityWeight { index, value } => {
            Error::NegativeDiversityWeightForStock {
                stock: dataset.stocks()[members[index]].id().to_string(),
                value,
            }
            .at_date(date)
        }
        other => other.at_date(date),
    })
}

fn family_targets(
    family: Family,
    dataset: &MarketDataset,
    members: &[usize],
    mu: &[f64],
    lambda: Option<&[f64]>,
    alpha: f64,
    date: NaiveDate,
) -> Result<Vec<f64>> {
    match family {
        Family::IndexTracking => target_index_tracking(mu).map_err(|e| e.at_date(date)),
        Family::Equal => target_equal(members.len()).map_err(|e| e.at_date(date)),
        Family::Entropy => target_entropy(mu).map_err(|e| e.at_date(date)),
        Family::Diversity { p } => diversity_targets(
            dataset,
            members,
            mu,
            lambda.expect("diversity targets need a moving average"),
            alpha,
            p,
            date,
        ),
    }
}

/// Runs one backtest over the full dataset.
pub fn run_backtest(
    config: &BacktestConfig,
    dataset: &MarketDataset,
    risk_free: &RiskFreeSeries,
) -> Result<BacktestResult> {
    config.validate()?;
    if dataset.n_days() < 2 {
        return Err(Error::InvalidDataset {
            reason: "dataset must span at least two days".into(),
        });
    }
    let dates = dataset.dates();
    let calendar = build_calendar(dates, config.trading, config.renewing)?;
    let mut is_trading = vec![false; dates.len()];
    for &day in &calendar.trading_days {
        is_trading[day] = true;
    }
    let mut is_renewal = vec![false; dates.len()];
    for &day in &calendar.renewal_days {
        is_renewal[day] = true;
    }

    let (family, delta, smoothing): (Family, usize, Option<SmoothingConfig>) = match &config.kind {
        PortfolioKind::IndexTracking => (Family::IndexTracking, 0, None),
        PortfolioKind::Equal => (Family::Equal, 0, None),
        PortfolioKind::Entropy => (Family::Entropy, 0, None),
        PortfolioKind::Diversity(cfg) => (Family::Diversity { p: cfg.p }, cfg.delta, None),
        PortfolioKind::DiversityDynamic {
            p,
            delta,
            smoothing,
        } => (Family::Diversity { p: *p }, *delta, Some(*smoothing)),
    };
    let is_diversity = matches!(family, Family::Diversity { .. });
    let mut alpha = match &config.kind {
        PortfolioKind::Diversity(cfg) => cfg.alpha,
        PortfolioKind::DiversityDynamic { smoothing, .. } => smoothing.alpha0,
        _ => 1.0,
    };

    // Day 0: form the initial portfolio; the formation cost is sunk.
    let mut members = renew_constituents(dataset, 0, config.d)?;
    let mut observation_days: Vec<usize> = Vec::new();
    let day0_targets = {
        let caps: Vec<f64> = members
            .iter()
            .map(|&s| dataset.stocks()[s].cap_on(0).unwrap())
            .collect();
        let mu = market_weights(&caps).map_err(|e| e.at_date(dates[0]))?;
        let lambda = if is_diversity {
            observation_days.push(0);
            Some(member_moving_average(dataset, &members, &observation_days, delta)?)
        } else {
            None
        };
        family_targets(
            family,
            dataset,
            &members,
            &mu,
            lambda.as_deref(),
            alpha,
            dates[0],
        )?
    };
    let mut real = PortfolioState::form(0, dates[0], &members, &day0_targets, config.initial_wealth);
    let mut baseline = smoothing
        .as_ref()
        .map(|_| PortfolioState::form(0, dates[0], &members, &day0_targets, config.initial_wealth));

    let mut alpha_path = smoothing.as_ref().map(|_| vec![alpha]);
    let mut zero_average_dates = Vec::new();
    let mut quarter_costs: Vec<f64> = Vec::new();
    let mut period_start = 0usize;
    let mut members_changed = false;

    for day in 1..dataset.n_days() {
        let date = dates[day];
        real.accrue(dataset, day).map_err(|e| e.at_date(date))?;
        if let Some(base) = baseline.as_mut() {
            base.accrue(dataset, day).map_err(|e| e.at_date(date))?;
        }

        if !is_trading[day] {
            real.mark();
            if let Some(base) = baseline.as_mut() {
                base.mark();
            }
            if let Some(path) = alpha_path.as_mut() {
                path.push(alpha);
            }
            continue;
        }

        if is_renewal[day] {
            if let (Some(base), Some(cfg)) = (baseline.as_ref(), smoothing.as_ref()) {
                let tc = &base.trading_day_tc[period_start..];
                let wealth = &base.trading_day_wealth_pre[period_start..];
                quarter_costs.push(
                    quarterly_relative_tc(tc, wealth, cfg.xi).map_err(|e| e.at_date(date))?,
                );
                let update = update_alpha(cfg, &quarter_costs);
                if update.zero_trailing_average {
                    zero_average_dates.push(date);
                }
                alpha = update.alpha;
            }
            members = renew_constituents(dataset, day, config.d)?;
            members_changed = true;
        } else {
            let before = members.len();
            members.retain(|&s| dataset.stocks()[s].listed_on(day));
            if members.len() != before {
                members_changed = true;
            }
        }

        let caps: Vec<f64> = members
            .iter()
            .map(|&s| dataset.stocks()[s].cap_on(day).unwrap())
            .collect();
        let mu = market_weights(&caps).map_err(|e| e.at_date(date))?;
        let lambda = if is_diversity {
            observation_days.push(day);
            if observation_days.len() > delta {
                observation_days.remove(0);
            }
            Some(member_moving_average(dataset, &members, &observation_days, delta)?)
        } else {
            None
        };

        let real_trades = match family {
            Family::IndexTracking => {
                is_renewal[day] || members_changed || real.pending_dividends()? > 0.0
            }
            _ => true,
        };
        if real_trades {
            let targets = family_targets(
                family,
                dataset,
                &members,
                &mu,
                lambda.as_deref(),
                alpha,
                date,
            )?;
            real.trade(dataset, day, &members, &targets, config.rates, is_renewal[day])?;
            members_changed = false;
        } else {
            real.hold();
        }

        if let Some(base) = baseline.as_mut() {
            let alpha0 = smoothing.as_ref().unwrap().alpha0;
            let targets = family_targets(
                family,
                dataset,
                &members,
                &mu,
                lambda.as_deref(),
                alpha0,
                date,
            )?;
            base.trade(dataset, day, &members, &targets, config.rates, is_renewal[day])?;
            if is_renewal[day] {
                period_start = base.trading_day_tc.len() - 1;
            }
        }
        if let Some(path) = alpha_path.as_mut() {
            path.push(alpha);
        }
    }

    let yearly = yearly_metrics(dates, &real.wealth_path, risk_free)?;
    let qv = match &baseline {
        Some(base) => qv_relative_tc(&real.trading_day_tc, &base.trading_day_wealth_pre)?,
        None => qv_relative_tc(&real.trading_day_tc, &real.trading_day_wealth_pre)?,
    };
    let metrics = PerfMetrics {
        final_wealth: *real.wealth_path.last().unwrap(),
        final_cumulative_tc: real.cum_tc,
        yearly,
        mean_excess_return: None,
        qv_relative_tc: qv,
    };
    Ok(BacktestResult {
        dates: dates.to_vec(),
        wealth_path: real.wealth_path,
        cumulative_tc_path: real.cumulative_tc_path,
        alpha_path,
        trades: real.trades,
        metrics,
        zero_trailing_average_dates: zero_average_dates,
    })
}

/// Cost-free, dividend-free index level over the renewed constituent list.
///
/// Each day the level scales an anchor level by the members' capitalization
/// sum relative to the anchor day. Renewals re-anchor at the new list
/// without moving the level. When a member delists mid-period, the level
/// stays continuous: the anchor moves to the previous day over the
/// survivors, so the stock's last quote is frozen into the level and later
/// changes track the survivors only.
pub fn capitalization_index(
    dataset: &MarketDataset,
    d: usize,
    renewal_days: &[usize],
    initial_level: f64,
) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "the index needs at least one constituent".into(),
        });
    }
    if !initial_level.is_finite() || initial_level <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "initial_level",
            reason: format!("{initial_level} is not a positive finite number"),
        });
    }
    let member_sum = |members: &[usize], day: usize| -> f64 {
        members
            .iter()
            .map(|&s| dataset.stocks()[s].cap_on(day).unwrap_or(0.0))
            .sum()
    };

    let mut is_renewal = vec![false; dataset.n_days()];
    for &day in renewal_days {
        if day < dataset.n_days() {
            is_renewal[day] = true;
        }
    }
    let mut members = renew_constituents(dataset, 0, d)?;
    let mut anchor_day = 0usize;
    let mut anchor_level = initial_level;
    let mut levels = vec![initial_level];
    for day in 1..dataset.n_days() {
        let before = members.len();
        members.retain(|&s| dataset.stocks()[s].listed_on(day));
        if members.is_empty() {
            return Err(Error::TooFewStocks {
                required: 1,
                available: 0,
            }
            .at_date(dataset.dates()[day]));
        }
        if members.len() != before {
            anchor_level = levels[day - 1];
            anchor_day = day - 1;
        }
        let level = anchor_level * member_sum(&members, day) / member_sum(&members, anchor_day);
        levels.push(level);
        if is_renewal[day] {
            members = renew_constituents(dataset, day, d)?;
            anchor_day = day;
            anchor_level = level;
        }
    }
    Ok(levels)
}
