//! Dynamic adjustment of the diversity portfolio's convexity weight.
//!
//! A fictitious baseline portfolio with constant convexity weight runs in
//! lockstep with the real portfolio. At each constituent renewal the
//! baseline's transaction costs relative to its pre-trade wealth, capped
//! and averaged over the closing period, are compared against the trailing
//! four-period average. Trading speeds up when recent costs are below that
//! average and slows down when they are above it.

use crate::error::{Error, Result};

/// Parameters of the dynamic convexity-weight rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Baseline convexity weight, strictly between 0 and 1.
    pub alpha0: f64,
    /// Sensitivity of the update to relative-cost deviations.
    pub beta: f64,
    /// Cap applied to each day's relative transaction cost before
    /// averaging, screening out outsized list-change days.
    pub xi: f64,
}

impl SmoothingConfig {
    pub fn new(alpha0: f64, beta: f64, xi: f64) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 || alpha0 >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "alpha0",
                reason: format!("{alpha0} is not strictly between 0 and 1"),
            });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("{beta} is not a nonnegative finite number"),
            });
        }
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "xi",
                reason: format!("{xi} is not a positive finite number"),
            });
        }
        Ok(SmoothingConfig { alpha0, beta, xi })
    }
}

/// Average capped relative transaction cost of one renewal period.
///
/// `tc` and `wealth_pre_trade` cover the period's trading days, the cost
/// paid at each trade and the wealth just before it. Each day contributes
/// `min(tc/wealth, xi)`.
pub fn quarterly_relative_tc(tc: &[f64], wealth_pre_trade: &[f64], xi: f64) -> Result<f64> {
    if tc.len() != wealth_pre_trade.len() {
        return Err(Error::WindowMismatch {
            reason: format!(
                "{} cost entries against {} wealth entries",
                tc.len(),
                wealth_pre_trade.len()
            ),
        });
    }
    if tc.is_empty() {
        return Err(Error::WindowMismatch {
            reason: "empty renewal period".into(),
        });
    }
    let mut sum = 0.0;
    for (&cost, &wealth) in tc.iter().zip(wealth_pre_trade) {
        if wealth <= 0.0 {
            return Err(Error::NonPositiveWealth { wealth });
        }
        sum += (cost / wealth).min(xi);
    }
    Ok(sum / tc.len() as f64)
}

/// Result of one convexity-weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaUpdate {
    pub alpha: f64,
    /// Set when the trailing four-period average was zero (no costs were
    /// ever paid), in which case the baseline weight is kept.
    pub zero_trailing_average: bool,
}

/// Updates the convexity weight from the history of per-period average
/// relative costs, most recent last.
///
/// Before four periods have completed the weight stays at `alpha0`.
/// Afterwards the newest period is compared with the trailing four-period
/// average (newest included) and the weight moves opposite to the
/// deviation, clamped into [0, 1].
pub fn update_alpha(config: &SmoothingConfig, period_relative_tc: &[f64]) -> AlphaUpdate {
    if period_relative_tc.len() < 4 {
        return AlphaUpdate {
            alpha: config.alpha0,
            zero_trailing_average: false,
        };
    }
    let trailing = &period_relative_tc[period_relative_tc.len() - 4..];
    let average = trailing.iter().sum::<f64>() / 4.0;
    if average == 0.0 {
        return AlphaUpdate {
            alpha: config.alpha0,
            zero_trailing_average: true,
        };
    }
    let deviation = trailing[3] / average - 1.0;
    AlphaUpdate {
        alpha: (config.alpha0 * (1.0 - config.beta * deviation)).clamp(0.0, 1.0),
        zero_trailing_average: false,
    }
}

/// Quadratic variation of the relative transaction-cost series: the sum of
/// squared one-step increments of `tc/wealth` along the trading days.
pub fn qv_relative_tc(tc: &[f64], wealth_pre_trade: &[f64]) -> Result<f64> {
    if tc.len() != wealth_pre_trade.len() {
        return Err(Error::MisalignedPaths {
            reason: format!(
                "{} cost entries against {} wealth entries",
                tc.len(),
                wealth_pre_trade.len()
            ),
        });
    }
    let mut qv = 0.0;
    let mut prev = None;
    for (&cost, &wealth) in tc.iter().zip(wealth_pre_trade) {
        if wealth <= 0.0 {
            return Err(Error::NonPositiveWealth { wealth });
        }
        let relative = cost / wealth;
        if let Some(p) = prev {
            let step: f64 = relative - p;
            qv += step * step;
        }
        prev = Some(relative);
    }
    Ok(qv)
}
