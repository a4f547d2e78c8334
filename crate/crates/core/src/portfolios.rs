//! Target-weight generators.
//!
//! Every generator maps the market weights of the current constituent list
//! (capitalizations normalized to sum 1) to a long-only target weight
//! vector summing to 1. Four families are provided: index tracking (the
//! market weights themselves), equal weighting, entropy weighting, and
//! diversity weighting over smoothed market weights.

use crate::error::{Error, Result};

/// Largest tolerated deviation of an input weight vector's sum from 1.
const WEIGHT_SUM_TOL: f64 = 1e-9;

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    let mut sum = 0.0;
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeight { index, value: w });
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::TargetSumOutOfTolerance { sum });
    }
    Ok(())
}

/// Market weights of the constituent list: each capitalization divided by
/// the list total.
pub fn market_weights(caps: &[f64]) -> Result<Vec<f64>> {
    if caps.len() < 2 {
        return Err(Error::TooFewStocks {
            required: 2,
            available: caps.len(),
        });
    }
    let mut total = 0.0;
    for &cap in caps {
        if !cap.is_finite() || cap <= 0.0 {
            return Err(Error::NonPositiveCap { value: cap });
        }
        total += cap;
    }
    Ok(caps.iter().map(|&cap| cap / total).collect())
}

/// Index tracking holds the market weights themselves.
pub fn target_index_tracking(mu: &[f64]) -> Result<Vec<f64>> {
    validate_weights(mu)?;
    Ok(mu.to_vec())
}

/// Equal weighting over `d` constituents.
pub fn target_equal(d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::TooFewStocks {
            required: 2,
            available: d,
        });
    }
    Ok(vec![1.0 / d as f64; d])
}

/// Entropy weighting: each stock's share of the list entropy,
/// `mu_j ln(mu_j) / sum_i mu_i ln(mu_i)`.
///
/// Zero weights contribute zero (the `x ln x` limit). A point-mass `mu` has
/// zero entropy and is rejected.
pub fn target_entropy(mu: &[f64]) -> Result<Vec<f64>> {
    validate_weights(mu)?;
    let terms: Vec<f64> = mu
        .iter()
        .map(|&m| if m > 0.0 { m * m.ln() } else { 0.0 })
        .collect();
    let denom: f64 = terms.iter().sum();
    if denom == 0.0 {
        return Err(Error::DegenerateEntropy);
    }
    Ok(terms.iter().map(|&t| t / denom).collect())
}

/// Parameters of the diversity-weighted family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityConfig {
    /// Diversity degree, strictly between 0 and 1.
    pub p: f64,
    /// Convexity weight blending current market weights into their moving
    /// average.
    pub alpha: f64,
    /// Moving-average window length, counted in trading observations.
    pub delta: usize,
}

impl DiversityConfig {
    pub fn new(p: f64, alpha: f64, delta: usize) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("{p} is not strictly between 0 and 1"),
            });
        }
        if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{alpha} is not in [0, 1]"),
            });
        }
        if delta == 0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "window length must be at least 1".into(),
            });
        }
        Ok(DiversityConfig { p, alpha, delta })
    }
}

/// Simple average of the last `delta` weight observations, oldest first.
///
/// When fewer than `delta` observations exist the missing early slots are
/// filled with the first observation, so a single observation averages to
/// itself under any window length.
pub fn moving_average(history: &[Vec<f64>], delta: usize) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::EmptyWeights);
    }
    if delta == 0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: "window length must be at least 1".into(),
        });
    }
    let width = history[0].len();
    for entry in history {
        if entry.len() != width {
            return Err(Error::WindowMismatch {
                reason: format!(
                    "weight history mixes lengths {} and {}",
                    width,
                    entry.len()
                ),
            });
        }
    }
    let observed = history.len().min(delta);
    let padding = (delta - observed) as f64;
    let mut avg = vec![0.0; width];
    for entry in &history[history.len() - observed..] {
        for (a, &w) in avg.iter_mut().zip(entry) {
            *a += w;
        }
    }
    for (a, &first) in avg.iter_mut().zip(&history[0]) {
        *a = (*a + padding * first) / delta as f64;
    }
    Ok(avg)
}

/// Convex blend of current market weights with their moving average:
/// `alpha * mu + (1 - alpha) * lambda`.
pub fn smoothed_market_weights(mu: &[f64], lambda: &[f64], alpha: f64) -> Result<Vec<f64>> {
    validate_weights(mu)?;
    validate_weights(lambda)?;
    if mu.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            holdings: mu.len(),
            targets: lambda.len(),
        });
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} is not in [0, 1]"),
        });
    }
    Ok(mu
        .iter()
        .zip(lambda)
        .map(|(&m, &l)| alpha * m + (1.0 - alpha) * l)
        .collect())
}

/// Diversity-weighted targets over smoothed market weights:
/// `pi_j = mu_j * (xi_j - sum_i mu_i xi_i + 1)` with
/// `xi_j = alpha * mu_bar_j^(p-1) / sum_i mu_bar_i^p`.
///
/// With `alpha = 0` this returns `mu` unchanged. A negative target weight,
/// possible for extreme inputs with `alpha < 1`, is rejected rather than
/// clipped so the caller can surface the offending stock.
pub fn target_diversity(mu: &[f64], mu_bar: &[f64], alpha: f64, p: f64) -> Result<Vec<f64>> {
    validate_weights(mu)?;
    if mu.len() != mu_bar.len() {
        return Err(Error::LengthMismatch {
            holdings: mu.len(),
            targets: mu_bar.len(),
        });
    }
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("{p} is not strictly between 0 and 1"),
        });
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} is not in [0, 1]"),
        });
    }
    if alpha == 0.0 {
        return Ok(mu.to_vec());
    }
    validate_weights(mu_bar)?;

    let denom: f64 = mu_bar.iter().map(|&m| m.powf(p)).sum();
    let mut xi = Vec::with_capacity(mu_bar.len());
    for (index, (&mb, &m)) in mu_bar.iter().zip(mu).enumerate() {
        if mb > 0.0 {
            xi.push(alpha * mb.powf(p - 1.0) / denom);
        } else if m == 0.0 {
            xi.push(0.0);
        } else {
            return Err(Error::InvalidWeight {
                index,
                value: mb,
            });
        }
    }
    let cross: f64 = mu.iter().zip(&xi).map(|(&m, &x)| m * x).sum();
    let mut pi = Vec::with_capacity(mu.len());
    for (index, (&m, &x)) in mu.iter().zip(&xi).enumerate() {
        let w = m * (x - cross + 1.0);
        if !w.is_finite() {
            return Err(Error::NonFinite {
                context: "diversity target weight",
            });
        }
        if w < 0.0 {
            return Err(Error::NegativeDiversityWeight { index, value: w });
        }
        pi.push(w);
    }
    Ok(pi)
}

/// The generating function of the diversity family:
/// `G_p(x) = (sum_i x_i^p)^(1/p)`, between 1 (full concentration) and
/// `d^((1-p)/p)` (uniform weights).
pub fn measure_of_diversity(weights: &[f64], p: f64) -> Result<f64> {
    validate_weights(weights)?;
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("{p} is not strictly between 0 and 1"),
        });
    }
    let sum: f64 = weights.iter().map(|&w| w.powf(p)).sum();
    Ok(sum.powf(1.0 / p))
}
