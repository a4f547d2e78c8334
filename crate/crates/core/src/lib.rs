//! Backtesting engine for systematically generated stock portfolios under
//! proportional transaction costs.
//!
//! The crate simulates portfolios that are formed once, then rebalanced on
//! a trading calendar toward rule-driven target weights (index tracking,
//! equal weight, entropy weight, and diversity weight over smoothed market
//! weights) while the constituent list of the largest `d` stocks is
//! renewed periodically. Rebalances are self-financing: purchases are paid
//! for by sales and accumulated dividend cash, net of proportional costs
//! on both sides, and the exact scaling factor that balances the two is
//! found in closed form.
//!
//! Modules:
//!
//! - [`rebalance`]: the self-financing rebalance solver.
//! - [`market`]: market panels, return decomposition, accrual windows.
//! - [`io`]: CSV ingest and emit for panels and risk-free yields.
//! - [`portfolios`]: target weight generators.
//! - [`smoothing`]: cost-driven retuning of the diversity convexity weight.
//! - [`metrics`]: yearly returns, Sharpe ratios, excess returns.
//! - [`engine`]: the day-by-day backtest loop.
//! - [`synthetic`]: reproducible synthetic market panels.

pub mod engine;
pub mod error;
pub mod io;
pub mod market;
pub mod metrics;
pub mod portfolios;
pub mod rebalance;
pub mod smoothing;
pub mod synthetic;

pub use engine::{
    build_calendar, capitalization_index, renew_constituents, run_backtest, BacktestConfig,
    BacktestResult, Calendar, PerfMetrics, PortfolioKind, RenewingFrequency, TradeRecord,
    TradingFrequency,
};
pub use error::{Error, Result};
pub use io::{load_market_csv, load_risk_free_csv, write_market_csv, RiskFreeSeries};
pub use market::{MarketDataset, StockSeries};
pub use portfolios::DiversityConfig;
pub use rebalance::{CostRates, RebalanceOutcome, RebalanceProblem};
pub use smoothing::SmoothingConfig;
pub use synthetic::SyntheticParams;
