//! Market data: a daily panel of capitalizations and total returns, the
//! split of total returns into dividend and realised parts, and the accrual
//! of holdings and dividends between trades.
//!
//! A stock-day total return `r` decomposes against the capitalization ratio
//! `S(t) / S(t-1)` as
//!
//! ```text
//! r_dividend = max(1 + r - S(t) / S(t-1), 0),    r_realised = r - r_dividend,
//! ```
//!
//! so share issuance or buybacks that push the capitalization ratio above
//! the total return clamp the dividend part at zero rather than going
//! negative. On a delisting day the capitalization is gone, the full return
//! is treated as realised, and from the next day on both parts are zero:
//! the position's value parks unchanged until the next trade liquidates it.
//!
//! Between two consecutive trades, holdings compound at the realised rates
//! while each day's dividends are set aside in a cash balance that earns
//! nothing until it is reinvested by the next trade.

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// One stock's contiguous history inside a dataset.
///
/// Capitalizations cover days `start .. start + caps.len()` of the dataset
/// calendar. A delisted stock carries one extra total return on the day
/// after its last capitalization, the delisting day.
#[derive(Debug, Clone, PartialEq)]
pub struct StockSeries {
    id: String,
    start: usize,
    caps: Vec<f64>,
    returns: Vec<f64>,
    delisted: bool,
}

impl StockSeries {
    pub fn new(
        id: String,
        start: usize,
        caps: Vec<f64>,
        returns: Vec<f64>,
        delisted: bool,
    ) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::InvalidDataset {
                reason: format!("stock {id} has no capitalizations"),
            });
        }
        let expected = caps.len() + usize::from(delisted);
        if returns.len() != expected {
            return Err(Error::InvalidDataset {
                reason: format!(
                    "stock {id} has {} returns, expected {expected}",
                    returns.len()
                ),
            });
        }
        for &cap in &caps {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::InvalidDataset {
                    reason: format!("stock {id} has nonpositive capitalization {cap}"),
                });
            }
        }
        for &r in &returns {
            if !r.is_finite() || r < -1.0 {
                return Err(Error::InvalidDataset {
                    reason: format!("stock {id} has invalid total return {r}"),
                });
            }
        }
        Ok(StockSeries {
            id,
            start,
            caps,
            returns,
            delisted,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// First dataset day with a capitalization.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Day the stock delisted: it has a return but no capitalization.
    pub fn delist_day(&self) -> Option<usize> {
        self.delisted.then(|| self.start + self.caps.len())
    }

    /// Last dataset day on which the stock has any data.
    pub fn last_day(&self) -> usize {
        self.start + self.returns.len() - 1
    }

    pub fn is_delisted(&self) -> bool {
        self.delisted
    }

    pub fn cap_on(&self, day: usize) -> Option<f64> {
        day.checked_sub(self.start)
            .and_then(|k| self.caps.get(k))
            .copied()
    }

    pub fn return_on(&self, day: usize) -> Option<f64> {
        day.checked_sub(self.start)
            .and_then(|k| self.returns.get(k))
            .copied()
    }

    /// Whether the stock trades with a quoted capitalization on `day`.
    pub fn listed_on(&self, day: usize) -> bool {
        self.cap_on(day).is_some()
    }
}

/// A validated panel of stocks over a shared trading calendar.
///
/// Dates are strictly increasing. Stocks are sorted by identifier and each
/// covers a contiguous block of days, leaving the panel free of interior
/// data gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    dates: Vec<NaiveDate>,
    stocks: Vec<StockSeries>,
}

impl MarketDataset {
    pub fn new(dates: Vec<NaiveDate>, mut stocks: Vec<StockSeries>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::InvalidDataset {
                reason: "no dates".into(),
            });
        }
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidDataset {
                    reason: format!("dates not strictly increasing at {}", pair[1]),
                });
            }
        }
        stocks.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in stocks.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::InvalidDataset {
                    reason: format!("duplicate stock id {}", pair[0].id),
                });
            }
        }
        for stock in &stocks {
            if stock.last_day() >= dates.len() {
                return Err(Error::InvalidDataset {
                    reason: format!(
                        "stock {} runs past the last date ({} > {})",
                        stock.id,
                        stock.last_day(),
                        dates.len() - 1
                    ),
                });
            }
        }
        Ok(MarketDataset { dates, stocks })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn stocks(&self) -> &[StockSeries] {
        &self.stocks
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn stock(&self, id: &str) -> Option<&StockSeries> {
        self.stocks
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.stocks[i])
    }

    /// Indices of stocks listed (with a capitalization) on `day`.
    pub fn listed_on(&self, day: usize) -> Vec<usize> {
        (0..self.stocks.len())
            .filter(|&i| self.stocks[i].listed_on(day))
            .collect()
    }
}

/// Splits one stock-day total return into `(dividend_rate, realised_rate)`.
///
/// `cap_now` is `None` on the delisting day, in which case the whole return
/// is realised. Otherwise the dividend part is the excess of the total
/// return over the capitalization ratio, clamped at zero.
pub fn decompose_return(
    cap_prev: f64,
    cap_now: Option<f64>,
    total_return: f64,
    delisted_today: bool,
) -> Result<(f64, f64)> {
    if !(cap_prev.is_finite() && cap_prev > 0.0) {
        return Err(Error::NonPositiveCap { value: cap_prev });
    }
    if delisted_today || cap_now.is_none() {
        return Ok((0.0, total_return));
    }
    let cap_now = cap_now.unwrap();
    if !(cap_now.is_finite() && cap_now > 0.0) {
        return Err(Error::NonPositiveCap { value: cap_now });
    }
    let dividend = (1.0 + total_return - cap_now / cap_prev).max(0.0);
    Ok((dividend, total_return - dividend))
}

/// Per-stock dividend and realised rates over one accrual window, aligned
/// to consecutive dataset days.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnDecomposition {
    pub dividend_rates: Vec<f64>,
    pub realised_rates: Vec<f64>,
}

impl ReturnDecomposition {
    pub fn len(&self) -> usize {
        self.dividend_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dividend_rates.is_empty()
    }

    pub fn push(&mut self, dividend: f64, realised: f64) {
        self.dividend_rates.push(dividend);
        self.realised_rates.push(realised);
    }
}

/// Zeroes both rate series strictly after the delisting day.
///
/// `window_start` is the dataset day of the decomposition's first entry;
/// the delisting day's own rates are left untouched.
pub fn post_delisting_zeroing(
    decomposition: &mut ReturnDecomposition,
    window_start: usize,
    delisting_day: usize,
) {
    for k in 0..decomposition.len() {
        if window_start + k > delisting_day {
            decomposition.dividend_rates[k] = 0.0;
            decomposition.realised_rates[k] = 0.0;
        }
    }
}

fn check_window(holdings: &[f64], decompositions: &[ReturnDecomposition]) -> Result<usize> {
    if holdings.len() != decompositions.len() {
        return Err(Error::WindowMismatch {
            reason: format!(
                "{} holdings but {} rate series",
                holdings.len(),
                decompositions.len()
            ),
        });
    }
    let n = decompositions.first().map_or(0, ReturnDecomposition::len);
    for d in decompositions {
        if d.len() != n || d.realised_rates.len() != d.dividend_rates.len() {
            return Err(Error::WindowMismatch {
                reason: "rate series of unequal length".into(),
            });
        }
    }
    if n == 0 {
        return Err(Error::WindowMismatch {
            reason: "empty accrual window".into(),
        });
    }
    Ok(n)
}

/// Compounds holdings from the last trade through the window at the
/// realised rates: `psi_i * prod_k (1 + realised_i(k))`.
pub fn accrue_between_trades(
    holdings_at_last_trade: &[f64],
    decompositions: &[ReturnDecomposition],
) -> Result<Vec<f64>> {
    let n = check_window(holdings_at_last_trade, decompositions)?;
    Ok(holdings_at_last_trade
        .iter()
        .zip(decompositions)
        .map(|(&h, d)| {
            let mut value = h;
            for k in 0..n {
                value *= 1.0 + d.realised_rates[k];
            }
            value
        })
        .collect())
}

/// Dividend cash accrued over the window: each day's dividend rate applies
/// to the holding compounded at realised rates through the previous day,
/// and the cash itself earns nothing.
pub fn accumulate_dividends(
    holdings_at_last_trade: &[f64],
    decompositions: &[ReturnDecomposition],
) -> Result<f64> {
    let n = check_window(holdings_at_last_trade, decompositions)?;
    let mut total = 0.0;
    for (&h, d) in holdings_at_last_trade.iter().zip(decompositions) {
        let mut value = h;
        let mut paid = 0.0;
        for k in 0..n {
            paid += value * d.dividend_rates[k];
            value *= 1.0 + d.realised_rates[k];
        }
        total += paid;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decompose_splits_dividend_from_price_move() {
        let (dividend, realised) = decompose_return(100.0, Some(98.0), 0.01, false).unwrap();
        assert!((dividend - 0.03).abs() < 1e-15);
        assert!((realised - (-0.02)).abs() < 1e-15);
        assert!((dividend + realised - 0.01).abs() < 1e-16);
    }

    #[test]
    fn decompose_clamps_issuance_above_total_return() {
        // Capitalization grew faster than the total return: no dividend.
        let (dividend, realised) = decompose_return(100.0, Some(105.0), 0.02, false).unwrap();
        assert_eq!(dividend, 0.0);
        assert_eq!(realised, 0.02);
    }

    #[test]
    fn decompose_treats_delisting_return_as_realised() {
        let (dividend, realised) = decompose_return(100.0, None, -0.35, true).unwrap();
        assert_eq!(dividend, 0.0);
        assert_eq!(realised, -0.35);
    }

    #[test]
    fn decompose_rejects_nonpositive_previous_cap() {
        assert!(matches!(
            decompose_return(0.0, Some(10.0), 0.0, false),
            Err(Error::NonPositiveCap { .. })
        ));
        assert!(matches!(
            decompose_return(-5.0, Some(10.0), 0.0, false),
            Err(Error::NonPositiveCap { .. })
        ));
    }

    #[test]
    fn zeroing_clears_rates_strictly_after_delisting() {
        let mut d = ReturnDecomposition {
            dividend_rates: vec![0.01, 0.0, 0.02, 0.03],
            realised_rates: vec![0.05, -0.4, 0.01, 0.02],
        };
        // Window covers days 4..=7, delisting on day 5.
        post_delisting_zeroing(&mut d, 4, 5);
        assert_eq!(d.dividend_rates, vec![0.01, 0.0, 0.0, 0.0]);
        assert_eq!(d.realised_rates, vec![0.05, -0.4, 0.0, 0.0]);
    }

    #[test]
    fn zeroing_leaves_windows_before_delisting_alone() {
        let mut d = ReturnDecomposition {
            dividend_rates: vec![0.01, 0.02],
            realised_rates: vec![0.05, 0.06],
        };
        post_delisting_zeroing(&mut d, 3, 10);
        assert_eq!(d.dividend_rates, vec![0.01, 0.02]);
        assert_eq!(d.realised_rates, vec![0.05, 0.06]);
    }

    #[test]
    fn accrue_compounds_realised_rates() {
        let d = ReturnDecomposition {
            dividend_rates: vec![0.0, 0.0],
            realised_rates: vec![0.01, -0.02],
        };
        let out = accrue_between_trades(&[100.0], &[d]).unwrap();
        assert!((out[0] - 98.98).abs() < 1e-12);
    }

    #[test]
    fn accrue_over_single_day_applies_one_rate() {
        let d = ReturnDecomposition {
            dividend_rates: vec![0.0],
            realised_rates: vec![0.05],
        };
        let out = accrue_between_trades(&[200.0], &[d]).unwrap();
        assert!((out[0] - 210.0).abs() < 1e-12);
    }

    #[test]
    fn accrue_ignores_dividend_rates() {
        let d = ReturnDecomposition {
            dividend_rates: vec![0.5, 0.5],
            realised_rates: vec![0.0, 0.0],
        };
        let out = accrue_between_trades(&[100.0], &[d]).unwrap();
        assert_eq!(out[0], 100.0);
    }

    #[test]
    fn dividends_accrue_on_compounded_holdings() {
        let d = ReturnDecomposition {
            dividend_rates: vec![0.005, 0.01],
            realised_rates: vec![0.01, -0.02],
        };
        let total = accumulate_dividends(&[100.0], &[d]).unwrap();
        assert!((total - 1.51).abs() < 1e-12);
    }

    #[test]
    fn single_day_dividend_is_rate_times_holding() {
        let d = ReturnDecomposition {
            dividend_rates: vec![0.02],
            realised_rates: vec![0.0],
        };
        let total = accumulate_dividends(&[200.0], &[d]).unwrap();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dividend_cash_earns_nothing_after_payment() {
        // A large up-move after the payment day must not lift the cash.
        let d = ReturnDecomposition {
            dividend_rates: vec![0.1, 0.0],
            realised_rates: vec![0.0, 0.5],
        };
        let total = accumulate_dividends(&[100.0], &[d]).unwrap();
        assert!((total - 10.0).abs() < 1e-12);
    }

    #[test]
    fn window_ops_reject_mismatched_series() {
        let d1 = ReturnDecomposition {
            dividend_rates: vec![0.0],
            realised_rates: vec![0.0],
        };
        let d2 = ReturnDecomposition {
            dividend_rates: vec![0.0, 0.0],
            realised_rates: vec![0.0, 0.0],
        };
        assert!(matches!(
            accrue_between_trades(&[1.0, 1.0], &[d1.clone(), d2]),
            Err(Error::WindowMismatch { .. })
        ));
        assert!(matches!(
            accrue_between_trades(&[1.0, 1.0], &[d1.clone()]),
            Err(Error::WindowMismatch { .. })
        ));
        assert!(matches!(
            accumulate_dividends(&[1.0], &[ReturnDecomposition::default()]),
            Err(Error::WindowMismatch { .. })
        ));
    }

    #[test]
    fn dataset_validates_shape() {
        let dates: Vec<NaiveDate> = (1..=4)
            .map(|d| NaiveDate::from_ymd_opt(2020, 1, d).unwrap())
            .collect();
        let good = StockSeries::new(
            "A".into(),
            0,
            vec![1.0, 1.1, 1.2],
            vec![0.0, 0.1, 0.1, -0.5],
            true,
        )
        .unwrap();
        assert_eq!(good.delist_day(), Some(3));
        assert_eq!(good.last_day(), 3);
        assert!(good.listed_on(2));
        assert!(!good.listed_on(3));
        let ds = MarketDataset::new(dates.clone(), vec![good.clone()]).unwrap();
        assert_eq!(ds.listed_on(0), vec![0]);
        assert_eq!(ds.listed_on(3), Vec::<usize>::new());
        assert!(ds.stock("A").is_some());
        assert!(ds.stock("B").is_none());

        assert!(StockSeries::new("A".into(), 0, vec![], vec![], false).is_err());
        assert!(StockSeries::new("A".into(), 0, vec![1.0], vec![0.0, 0.1], false).is_err());
        assert!(StockSeries::new("A".into(), 0, vec![-1.0], vec![0.0], false).is_err());
        assert!(StockSeries::new("A".into(), 0, vec![1.0], vec![-1.5], false).is_err());
        let overlong = StockSeries::new("B".into(), 3, vec![1.0, 1.0], vec![0.0, 0.0], false);
        assert!(MarketDataset::new(dates, vec![overlong.unwrap()]).is_err());
    }

    proptest! {
        /// Accruing over two windows back to back matches one pass over the
        /// union, with the dividend cash carried across the split.
        #[test]
        fn windows_compose(
            holdings in proptest::collection::vec(0.01f64..500.0, 1..6),
            rates in proptest::collection::vec((0.0f64..0.05, -0.5f64..0.5), 2..12),
            split in 1usize..11,
        ) {
            let n = rates.len();
            let split = split.min(n - 1);
            let build = |range: std::ops::Range<usize>| -> Vec<ReturnDecomposition> {
                holdings
                    .iter()
                    .map(|_| ReturnDecomposition {
                        dividend_rates: rates[range.clone()].iter().map(|r| r.0).collect(),
                        realised_rates: rates[range.clone()].iter().map(|r| r.1).collect(),
                    })
                    .collect()
            };
            let full = build(0..n);
            let first = build(0..split);
            let second = build(split..n);

            let direct = accrue_between_trades(&holdings, &full).unwrap();
            let mid = accrue_between_trades(&holdings, &first).unwrap();
            let chained = accrue_between_trades(&mid, &second).unwrap();
            for (a, b) in direct.iter().zip(&chained) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }

            let div_direct = accumulate_dividends(&holdings, &full).unwrap();
            let div_chained = accumulate_dividends(&holdings, &first).unwrap()
                + accumulate_dividends(&mid, &second).unwrap();
            prop_assert!((div_direct - div_chained).abs() <= 1e-12 * div_direct.abs().max(1.0));
        }

        /// The two parts of a decomposition always re-sum to the input.
        #[test]
        fn decomposition_identity(
            cap_prev in 0.5f64..5000.0,
            ratio in 0.3f64..3.0,
            total in -0.9f64..2.0,
        ) {
            let cap_now = cap_prev * ratio;
            let (dividend, realised) =
                decompose_return(cap_prev, Some(cap_now), total, false).unwrap();
            prop_assert!(dividend >= 0.0);
            // The realised rate carries the single rounding of
            // `total - dividend`, so the split recombines to the total
            // within one ulp of the parts.
            let residual = (dividend + realised - total).abs();
            prop_assert!(residual <= 1e-15 * (1.0 + total.abs() + dividend.abs()));
        }
    }
}
