//! Yearly performance statistics of a wealth path.
//!
//! Returns are measured over calendar years: the wealth at the last path
//! date of each year forms the year-end boundary, and a year's return is
//! the simple return between consecutive boundaries. The opening year only
//! provides the first boundary and never a return of its own, and the
//! closing year is dropped unless the path reaches into December, so
//! partial years never enter the statistics.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RiskFreeSeries;

/// Yearly returns and the statistics derived from them.
///
/// `std_return` needs at least two yearly returns, and `sharpe_ratio`
/// additionally needs them to not all be equal, so both are absent on
/// short or degenerate paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyMetrics {
    /// Calendar years with a computed return.
    pub years: Vec<i32>,
    /// Simple return of each year in `years`.
    pub returns: Vec<f64>,
    /// Risk-free yield matched to each year: the latest quote on or before
    /// the year's opening boundary.
    pub risk_free: Vec<f64>,
    /// Arithmetic mean of the yearly returns.
    pub mean_return: Option<f64>,
    /// Sample standard deviation of the yearly returns.
    pub std_return: Option<f64>,
    /// Mean excess return over the risk-free yields divided by
    /// `std_return`.
    pub sharpe_ratio: Option<f64>,
}

/// Computes yearly statistics from a daily wealth path.
pub fn yearly_metrics(
    dates: &[NaiveDate],
    wealth: &[f64],
    risk_free: &RiskFreeSeries,
) -> Result<YearlyMetrics> {
    if dates.len() != wealth.len() {
        return Err(Error::MisalignedPaths {
            reason: format!("{} dates against {} wealth entries", dates.len(), wealth.len()),
        });
    }
    if dates.is_empty() {
        return Err(Error::MisalignedPaths {
            reason: "empty wealth path".into(),
        });
    }
    for &v in wealth {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonPositiveWealth { wealth: v });
        }
    }

    // Index of the last path date within each calendar year, in date order.
    let mut boundaries: Vec<(i32, usize)> = Vec::new();
    for (idx, date) in dates.iter().enumerate() {
        match boundaries.last_mut() {
            Some((year, last)) if *year == date.year() => *last = idx,
            _ => boundaries.push((date.year(), idx)),
        }
    }

    let closing_year_complete = dates[dates.len() - 1].month() == 12;
    let mut years = Vec::new();
    let mut returns = Vec::new();
    let mut rf = Vec::new();
    for pair in boundaries.windows(2) {
        let (prev_year, prev_idx) = pair[0];
        let (year, idx) = pair[1];
        if year != prev_year + 1 {
            continue;
        }
        if idx == dates.len() - 1 && !closing_year_complete {
            continue;
        }
        years.push(year);
        returns.push(wealth[idx] / wealth[prev_idx] - 1.0);
        rf.push(risk_free.yield_at_or_before(dates[prev_idx]));
    }

    let mean_return = if returns.is_empty() {
        None
    } else {
        Some(returns.iter().sum::<f64>() / returns.len() as f64)
    };
    let std_return = mean_return.filter(|_| returns.len() >= 2).map(|mean| {
        let ss: f64 = returns.iter().map(|r| (r - mean) * (r - mean)).sum();
        (ss / (returns.len() - 1) as f64).sqrt()
    });
    let sharpe_ratio = match std_return {
        Some(std) if std > 0.0 => {
            let mean_excess = returns
                .iter()
                .zip(&rf)
                .map(|(r, y)| r - y)
                .sum::<f64>()
                / returns.len() as f64;
            Some(mean_excess / std)
        }
        _ => None,
    };

    Ok(YearlyMetrics {
        years,
        returns,
        risk_free: rf,
        mean_return,
        std_return,
        sharpe_ratio,
    })
}

/// Mean of the per-year return differences against a benchmark, over the
/// years both sides computed. Absent when no year overlaps.
pub fn mean_excess_return(own: &YearlyMetrics, benchmark: &YearlyMetrics) -> Option<f64> {
    let mut diffs = Vec::new();
    for (year, ret) in own.years.iter().zip(&own.returns) {
        if let Ok(pos) = benchmark.years.binary_search(year) {
            diffs.push(ret - benchmark.returns[pos]);
        }
    }
    if diffs.is_empty() {
        None
    } else {
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    /// One path date per month from `start` through December of `end_year`.
    fn monthly_path(start: NaiveDate, end_year: i32, values: impl Fn(usize) -> f64) -> (Vec<NaiveDate>, Vec<f64>) {
        let mut dates = Vec::new();
        let (mut y, mut m) = (start.year(), start.month());
        while y < end_year || (y == end_year && m <= 12) {
            dates.push(day(y, m, 28));
            m += 1;
            if m > 12 {
                m = 1;
                y += 1;
            }
        }
        let wealth = (0..dates.len()).map(values).collect();
        (dates, wealth)
    }

    #[test]
    fn two_year_hand_example() {
        // Boundaries 1000 (Dec 2000), 1100 (Dec 2001), 1320 (Dec 2002)
        // give yearly returns of 10% and 20%.
        let dates = vec![
            day(2000, 6, 1),
            day(2000, 12, 29),
            day(2001, 6, 1),
            day(2001, 12, 28),
            day(2002, 6, 3),
            day(2002, 12, 30),
        ];
        let wealth = vec![980.0, 1000.0, 1070.0, 1100.0, 1250.0, 1320.0];
        let rf_series = RiskFreeSeries::new(vec![day(2000, 1, 3)], vec![0.02]).unwrap();
        let m = yearly_metrics(&dates, &wealth, &rf_series).unwrap();
        assert_eq!(m.years, vec![2001, 2002]);
        assert!((m.returns[0] - 0.10).abs() < 1e-12);
        assert!((m.returns[1] - 0.20).abs() < 1e-12);
        assert_eq!(m.risk_free, vec![0.02, 0.02]);
        assert!((m.mean_return.unwrap() - 0.15).abs() < 1e-12);
        assert!((m.std_return.unwrap() - 0.07071067811865475).abs() < 1e-12);
        assert!((m.sharpe_ratio.unwrap() - 1.8384776310850235).abs() < 1e-12);
    }

    #[test]
    fn constant_path_has_absent_sharpe() {
        let (dates, wealth) = monthly_path(day(2000, 1, 1), 2003, |_| 1000.0);
        let m = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert_eq!(m.years, vec![2001, 2002, 2003]);
        assert!(m.returns.iter().all(|&r| r == 0.0));
        assert_eq!(m.mean_return, Some(0.0));
        assert_eq!(m.std_return, Some(0.0));
        assert_eq!(m.sharpe_ratio, None);
    }

    #[test]
    fn doubling_path_has_zero_std_and_absent_sharpe() {
        let (dates, wealth) = monthly_path(day(2000, 1, 1), 2003, |i| 1000.0 * 2f64.powi(i as i32 / 12));
        let m = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert!(m.returns.iter().all(|&r| r == 1.0));
        assert_eq!(m.mean_return, Some(1.0));
        assert_eq!(m.std_return, Some(0.0));
        assert_eq!(m.sharpe_ratio, None);
    }

    #[test]
    fn single_return_has_absent_std() {
        let (dates, wealth) = monthly_path(day(2000, 1, 1), 2001, |i| 1000.0 + i as f64);
        let m = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert_eq!(m.returns.len(), 1);
        assert!(m.mean_return.is_some());
        assert_eq!(m.std_return, None);
        assert_eq!(m.sharpe_ratio, None);
    }

    #[test]
    fn partial_closing_year_is_dropped() {
        let mut dates = vec![day(2000, 3, 1), day(2000, 12, 29), day(2001, 12, 28)];
        let mut wealth = vec![1000.0, 1000.0, 1100.0];
        let full = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert_eq!(full.years, vec![2001]);

        // Extending into mid-2002 adds no 2002 return.
        dates.push(day(2002, 7, 15));
        wealth.push(1500.0);
        let partial = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert_eq!(partial.years, vec![2001]);
        assert_eq!(partial.returns, full.returns);
    }

    #[test]
    fn opening_year_is_base_only() {
        // The 2000 within-year gain never shows up as a return.
        let dates = vec![day(2000, 1, 3), day(2000, 12, 29), day(2001, 12, 28)];
        let wealth = vec![1000.0, 2000.0, 2200.0];
        let m = yearly_metrics(&dates, &wealth, &RiskFreeSeries::zero()).unwrap();
        assert_eq!(m.years, vec![2001]);
        assert!((m.returns[0] - 0.10).abs() < 1e-12);
    }

    #[test]
    fn risk_free_matches_opening_boundary() {
        let dates = vec![day(2000, 12, 29), day(2001, 12, 28), day(2002, 12, 30)];
        let wealth = vec![1000.0, 1100.0, 1210.0];
        let rf_series = RiskFreeSeries::new(
            vec![day(2000, 12, 29), day(2001, 6, 1), day(2002, 12, 30)],
            vec![0.03, 0.05, 0.08],
        )
        .unwrap();
        let m = yearly_metrics(&dates, &wealth, &rf_series).unwrap();
        // 2001 keys off the Dec 2000 quote, 2002 off the mid-2001 quote.
        assert_eq!(m.risk_free, vec![0.03, 0.05]);
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(yearly_metrics(&[], &[], &RiskFreeSeries::zero()).is_err());
        assert!(yearly_metrics(&[day(2000, 1, 3)], &[], &RiskFreeSeries::zero()).is_err());
        assert!(matches!(
            yearly_metrics(&[day(2000, 1, 3)], &[-5.0], &RiskFreeSeries::zero()),
            Err(Error::NonPositiveWealth { .. })
        ));
    }

    #[test]
    fn excess_return_aligns_years() {
        let own = YearlyMetrics {
            years: vec![2001, 2002, 2003],
            returns: vec![0.10, 0.20, 0.30],
            risk_free: vec![0.0; 3],
            mean_return: Some(0.2),
            std_return: None,
            sharpe_ratio: None,
        };
        let bench = YearlyMetrics {
            years: vec![2002, 2003, 2004],
            returns: vec![0.15, 0.10, 0.50],
            risk_free: vec![0.0; 3],
            mean_return: Some(0.25),
            std_return: None,
            sharpe_ratio: None,
        };
        let excess = mean_excess_return(&own, &bench).unwrap();
        assert!((excess - (0.05 + 0.20) / 2.0).abs() < 1e-15);
        let disjoint = YearlyMetrics {
            years: vec![1990],
            returns: vec![0.1],
            risk_free: vec![0.0],
            mean_return: Some(0.1),
            std_return: None,
            sharpe_ratio: None,
        };
        assert_eq!(mean_excess_return(&own, &disjoint), None);
    }
}
