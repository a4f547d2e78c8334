//! Self-financing rebalancing under proportional transaction costs.
//!
//! A rebalance moves a portfolio with pre-trade holdings `psi` (currency
//! units per stock) and an accrued dividend balance `D` onto target weights
//! `pi`, paying proportional costs on every buy and sell. Post-trade
//! holdings take the form `c * V * pi_j` for a single scale factor `c`,
//! where `V` is pre-trade wealth. The scale is pinned down by requiring the
//! trade to finance itself: cost-inflated buys must equal cost-deflated
//! sells plus the dividend balance,
//!
//! ```text
//! (1 + tc_buy) * sum(buys) = (1 - tc_sell) * sum(sells) + D.
//! ```
//!
//! Dividing through by wealth turns this into a scalar equation in `c`
//! whose left side is nondecreasing and whose right side is nonincreasing,
//! so the solution is unique. The left-minus-right residual is piecewise
//! linear with breakpoints at the weight ratios `c_i = w_i / pi_i` (current
//! weight over target weight), which yields a closed form: locate the
//! largest breakpoint whose residual gap stays below the normalized
//! dividend, then solve the linear segment through it. A bisection solver
//! over the same residual is retained as an independent numerical route.
//!
//! Stocks with a zero target weight are liquidated inside the same trade:
//! their sale proceeds, net of selling costs, are folded into the dividend
//! balance before the scale is solved.

use crate::error::{Error, Result};

/// Proportional cost rates applied to buys and sells, each in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRates {
    pub buy: f64,
    pub sell: f64,
}

impl CostRates {
    pub fn new(buy: f64, sell: f64) -> Result<Self> {
        for rate in [buy, sell] {
            if !rate.is_finite() || !(0.0..1.0).contains(&rate) {
                return Err(Error::CostRateOutOfRange { rate });
            }
        }
        Ok(CostRates { buy, sell })
    }

    /// Same rate on both sides of the trade.
    pub fn uniform(rate: f64) -> Result<Self> {
        CostRates::new(rate, rate)
    }

    pub fn zero() -> Self {
        CostRates {
            buy: 0.0,
            sell: 0.0,
        }
    }
}

/// A validated rebalancing problem.
///
/// Construction checks that holdings are nonnegative with positive total,
/// the dividend balance is nonnegative, targets are nonnegative and sum to
/// one (inputs within `1e-9` of one are renormalized, anything further off
/// is rejected), and that every value is finite.
#[derive(Debug, Clone)]
pub struct RebalanceProblem {
    holdings_prev: Vec<f64>,
    dividends: f64,
    targets: Vec<f64>,
    rates: CostRates,
    wealth_prev: f64,
}

impl RebalanceProblem {
    pub fn new(
        holdings_prev: Vec<f64>,
        dividends: f64,
        targets: Vec<f64>,
        rates: CostRates,
    ) -> Result<Self> {
        if holdings_prev.len() != targets.len() {
            return Err(Error::LengthMismatch {
                holdings: holdings_prev.len(),
                targets: targets.len(),
            });
        }
        for (index, &value) in holdings_prev.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: "holdings",
                });
            }
            if value < 0.0 {
                return Err(Error::NegativeHolding { index, value });
            }
        }
        if !dividends.is_finite() {
            return Err(Error::NonFinite {
                context: "dividends",
            });
        }
        if dividends < 0.0 {
            return Err(Error::NegativeDividends { value: dividends });
        }
        let wealth_prev: f64 = holdings_prev.iter().sum();
        if !(wealth_prev > 0.0) {
            return Err(Error::NonPositiveWealth {
                wealth: wealth_prev,
            });
        }
        let mut targets = targets;
        let mut sum = 0.0;
        for (index, &value) in targets.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { context: "targets" });
            }
            if value < 0.0 {
                return Err(Error::NegativeTarget { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::TargetSumOutOfTolerance { sum });
        }
        if sum != 1.0 {
            for value in &mut targets {
                *value /= sum;
            }
        }
        Ok(RebalanceProblem {
            holdings_prev,
            dividends,
            targets,
            rates,
            wealth_prev,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn holdings_prev(&self) -> &[f64] {
        &self.holdings_prev
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dividends(&self) -> f64 {
        self.dividends
    }

    pub fn rates(&self) -> CostRates {
        self.rates
    }

    /// Pre-trade wealth `V`, the sum of pre-trade holdings (exclusive of
    /// the dividend balance).
    pub fn wealth_prev(&self) -> f64 {
        self.wealth_prev
    }

    /// Weight ratio `c_i = w_i / pi_i` for each stock, zero where the
    /// target weight is zero.
    fn weight_ratios(&self) -> Vec<f64> {
        self.holdings_prev
            .iter()
            .zip(&self.targets)
            .map(|(&h, &pi)| {
                if pi > 0.0 {
                    (h / self.wealth_prev) / pi
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Dividend balance per unit of pre-trade wealth, with the net proceeds of
/// liquidating every zero-target position folded in.
pub fn normalized_dividend(problem: &RebalanceProblem) -> f64 {
    let liquidated: f64 = problem
        .holdings_prev
        .iter()
        .zip(&problem.targets)
        .filter(|(_, &pi)| pi == 0.0)
        .map(|(&h, _)| h)
        .sum();
    (problem.dividends + (1.0 - problem.rates.sell) * liquidated) / problem.wealth_prev
}

/// Piecewise-linear structure of the self-financing residual, evaluated at
/// every weight-ratio breakpoint.
#[derive(Debug, Clone)]
pub struct BreakpointState {
    /// Weight ratio `c_i` per stock (zero where the target is zero).
    pub weight_ratios: Vec<f64>,
    /// Dividend balance per unit of wealth, including zero-target proceeds.
    pub normalized_dividend: f64,
    /// Residual gap at each stock's own breakpoint: the value the
    /// normalized dividend would have to take for the scale to land
    /// exactly on that stock's weight ratio.
    pub gap_values: Vec<f64>,
    /// Pivot stock: the one with the largest gap not exceeding the
    /// normalized dividend (ties resolved to the smallest index).
    pub pivot_index: usize,
    /// Cost-inflated target mass at or below the pivot ratio.
    pub buy_mass: f64,
    /// Cost-deflated target mass strictly above the pivot ratio.
    pub sell_mass: f64,
    /// Cost-inflated ratio-weighted target mass at or below the pivot.
    pub buy_value: f64,
    /// Cost-deflated pre-trade weight mass strictly above the pivot.
    pub sell_value: f64,
}

impl BreakpointState {
    /// Closed-form scale implied by the pivot segment.
    pub fn scale(&self) -> f64 {
        (self.buy_value + self.sell_value + self.normalized_dividend)
            / (self.buy_mass + self.sell_mass)
    }
}

/// Sorted distinct breakpoints with prefix aggregates, shared by the
/// analytic solver and the full breakpoint report.
struct Breakpoints {
    /// Distinct weight-ratio values, ascending.
    values: Vec<f64>,
    /// Smallest original stock index carrying each value.
    first_index: Vec<usize>,
    /// Cumulative target mass through each value.
    target_cum: Vec<f64>,
    /// Cumulative ratio-weighted target mass through each value.
    value_cum: Vec<f64>,
    /// Cumulative pre-trade weight mass through each value.
    prev_cum: Vec<f64>,
}

impl Breakpoints {
    fn build(problem: &RebalanceProblem, ratios: &[f64]) -> Breakpoints {
        let mut order: Vec<usize> = (0..ratios.len()).collect();
        order.sort_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(a.cmp(&b)));

        let mut values = Vec::new();
        let mut first_index = Vec::new();
        let mut target_cum = Vec::new();
        let mut value_cum = Vec::new();
        let mut prev_cum = Vec::new();
        let (mut a, mut b, mut p) = (0.0, 0.0, 0.0);
        for &i in &order {
            let ratio = ratios[i];
            let target = problem.targets[i];
            a += target;
            b += ratio * target;
            p += problem.holdings_prev[i] / problem.wealth_prev;
            if values.last() == Some(&ratio) {
                let last = values.len() - 1;
                target_cum[last] = a;
                value_cum[last] = b;
                prev_cum[last] = p;
            } else {
                values.push(ratio);
                first_index.push(i);
                target_cum.push(a);
                value_cum.push(b);
                prev_cum.push(p);
            }
        }
        Breakpoints {
            values,
            first_index,
            target_cum,
            value_cum,
            prev_cum,
        }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn target_total(&self) -> f64 {
        *self.target_cum.last().expect("at least one breakpoint")
    }

    fn value_total(&self) -> f64 {
        *self.value_cum.last().expect("at least one breakpoint")
    }

    fn prev_total(&self) -> f64 {
        *self.prev_cum.last().expect("at least one breakpoint")
    }

    /// Residual gap at breakpoint `k`: cost-inflated buys minus
    /// cost-deflated sells if the scale were pinned to `values[k]`.
    fn gap(&self, k: usize, rates: CostRates) -> f64 {
        let x = self.values[k];
        let buys = x * self.target_cum[k] - self.value_cum[k];
        let sells =
            (self.value_total() - self.value_cum[k]) - x * (self.target_total() - self.target_cum[k]);
        (1.0 + rates.buy) * buys - (1.0 - rates.sell) * sells
    }

    /// Pivot search: start at the largest ratio not exceeding one, then
    /// walk down while the gap overshoots the normalized dividend and up
    /// while the next gap still fits. Gaps are strictly increasing across
    /// distinct ratios, so the walk lands on the unique pivot.
    fn pivot(&self, dhat: f64, rates: CostRates) -> usize {
        let mut k = match self.values.partition_point(|&v| v <= 1.0) {
            0 => 0,
            n => n - 1,
        };
        while k > 0 && self.gap(k, rates) > dhat {
            k -= 1;
        }
        while k + 1 < self.len() && self.gap(k + 1, rates) <= dhat {
            k += 1;
        }
        k
    }

    fn state(&self, k: usize, rates: CostRates) -> (f64, f64, f64, f64) {
        let buy_mass = (1.0 + rates.buy) * self.target_cum[k];
        let sell_mass = (1.0 - rates.sell) * (self.target_total() - self.target_cum[k]);
        let buy_value = (1.0 + rates.buy) * self.value_cum[k];
        let sell_value = (1.0 - rates.sell) * (self.prev_total() - self.prev_cum[k]);
        (buy_mass, sell_mass, buy_value, sell_value)
    }
}

/// Evaluates the residual structure at every breakpoint and locates the
/// pivot segment containing the self-financing scale.
pub fn breakpoint_gaps(problem: &RebalanceProblem) -> BreakpointState {
    let ratios = problem.weight_ratios();
    let dhat = normalized_dividend(problem);
    let rates = problem.rates;
    let points = Breakpoints::build(problem, &ratios);

    let mut by_value = vec![0.0; points.len()];
    for k in 0..points.len() {
        by_value[k] = points.gap(k, rates);
    }
    let gap_values = ratios
        .iter()
        .map(|&r| {
            let k = points.values.partition_point(|&v| v < r);
            by_value[k]
        })
        .collect();

    let k = points.pivot(dhat, rates);
    let (buy_mass, sell_mass, buy_value, sell_value) = points.state(k, rates);
    BreakpointState {
        weight_ratios: ratios,
        normalized_dividend: dhat,
        gap_values,
        pivot_index: points.first_index[k],
        buy_mass,
        sell_mass,
        buy_value,
        sell_value,
    }
}

/// Closed-form solve of the self-financing scale via the pivot segment.
pub fn solve_scale_analytic(problem: &RebalanceProblem) -> f64 {
    let ratios = problem.weight_ratios();
    let dhat = normalized_dividend(problem);
    let rates = problem.rates;
    let points = Breakpoints::build(problem, &ratios);
    let k = points.pivot(dhat, rates);
    let (buy_mass, sell_mass, buy_value, sell_value) = points.state(k, rates);
    (buy_value + sell_value + dhat) / (buy_mass + sell_mass)
}

/// Residual of the self-financing equation at a candidate scale, computed
/// directly from the problem arrays.
fn residual(problem: &RebalanceProblem, ratios: &[f64], dhat: f64, c: f64) -> f64 {
    let mut buys = 0.0;
    let mut sells = 0.0;
    for (&ratio, &target) in ratios.iter().zip(&problem.targets) {
        if target == 0.0 {
            continue;
        }
        if c >= ratio {
            buys += (c - ratio) * target;
        } else {
            sells += (ratio - c) * target;
        }
    }
    (1.0 + problem.rates.buy) * buys - (1.0 - problem.rates.sell) * sells - dhat
}

/// Bisection solve of the self-financing scale.
///
/// The residual is nonpositive at the smallest weight ratio and grows
/// without bound, so a sign change is bracketed by doubling an upper bound
/// that starts at `max(1, max_i c_i)`. Bisection then narrows the bracket
/// to a relative width of `1e-13`. Bracketing is reported as failed after
/// 64 doublings, which no valid problem reaches.
pub fn solve_scale_numeric(problem: &RebalanceProblem) -> Result<f64> {
    let ratios = problem.weight_ratios();
    let dhat = normalized_dividend(problem);

    let mut lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if residual(problem, &ratios, dhat, lo) == 0.0 {
        return Ok(lo);
    }
    let mut hi = ratios.iter().copied().fold(1.0, f64::max);
    let mut doublings = 0;
    loop {
        let r = residual(problem, &ratios, dhat, hi);
        if r == 0.0 {
            return Ok(hi);
        }
        if r > 0.0 {
            break;
        }
        hi *= 2.0;
        doublings += 1;
        if doublings > 64 {
            return Err(Error::BracketFailure);
        }
    }
    while hi - lo > 1e-13 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(problem, &ratios, dhat, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of a rebalance: post-trade holdings, realized costs, and the
/// resulting wealth.
#[derive(Debug, Clone)]
pub struct RebalanceOutcome {
    /// Post-trade holdings, `scale * wealth_prev * target` per stock.
    pub holdings_new: Vec<f64>,
    /// Self-financing scale applied to the targets.
    pub scale: f64,
    /// Currency bought, summed over stocks increased by the trade.
    pub buys: f64,
    /// Currency sold, summed over stocks decreased by the trade.
    pub sells: f64,
    /// Realized transaction costs `tc_buy * buys + tc_sell * sells`.
    pub transaction_costs: f64,
    /// Post-trade wealth, the sum of post-trade holdings.
    pub wealth_new: f64,
}

/// Executes a rebalance: solves the scale analytically, forms post-trade
/// holdings, and tallies costs.
pub fn rebalance(problem: &RebalanceProblem) -> RebalanceOutcome {
    let scale = solve_scale_analytic(problem);
    let factor = scale * problem.wealth_prev;
    let holdings_new: Vec<f64> = problem.targets.iter().map(|&pi| factor * pi).collect();
    let mut buys = 0.0;
    let mut sells = 0.0;
    for (&new, &old) in holdings_new.iter().zip(&problem.holdings_prev) {
        if new >= old {
            buys += new - old;
        } else {
            sells += old - new;
        }
    }
    let transaction_costs = problem.rates.buy * buys + problem.rates.sell * sells;
    let wealth_new = holdings_new.iter().sum();
    RebalanceOutcome {
        holdings_new,
        scale,
        buys,
        sells,
        transaction_costs,
        wealth_new,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(
        holdings: &[f64],
        dividends: f64,
        targets: &[f64],
        buy: f64,
        sell: f64,
    ) -> RebalanceProblem {
        RebalanceProblem::new(
            holdings.to_vec(),
            dividends,
            targets.to_vec(),
            CostRates::new(buy, sell).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn normalized_dividend_without_liquidation_is_cash_over_wealth() {
        let p = problem(&[600.0, 400.0], 10.0, &[0.5, 0.5], 0.01, 0.01);
        assert!((normalized_dividend(&p) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn normalized_dividend_folds_in_liquidated_positions() {
        let p = problem(&[600.0, 400.0], 0.0, &[1.0, 0.0], 0.01, 0.01);
        assert!((normalized_dividend(&p) - 0.396).abs() < 1e-15);
    }

    #[test]
    fn normalized_dividend_is_zero_without_cash_or_liquidation() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.5, 0.5], 0.01, 0.01);
        assert_eq!(normalized_dividend(&p), 0.0);
    }

    #[test]
    fn breakpoints_of_identity_problem_are_flat() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.6, 0.4], 0.01, 0.01);
        let state = breakpoint_gaps(&p);
        for &ratio in &state.weight_ratios {
            assert!((ratio - 1.0).abs() < 1e-15);
        }
        for &gap in &state.gap_values {
            assert!(gap.abs() < 1e-15);
        }
        assert_eq!(state.pivot_index, 0);
    }

    #[test]
    fn breakpoint_gaps_match_hand_values() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.5, 0.5], 0.01, 0.01);
        let state = breakpoint_gaps(&p);
        assert!((state.weight_ratios[0] - 1.2).abs() < 1e-12);
        assert!((state.weight_ratios[1] - 0.8).abs() < 1e-12);
        assert!((state.gap_values[0] - 0.202).abs() < 1e-12);
        assert!((state.gap_values[1] - (-0.198)).abs() < 1e-12);
        assert_eq!(state.pivot_index, 1);
        assert!((state.scale() - 0.998).abs() < 1e-12);
    }

    #[test]
    fn analytic_scale_is_one_without_costs_or_cash() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.5, 0.5], 0.0, 0.0);
        assert!((solve_scale_analytic(&p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_scale_matches_hand_value() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.5, 0.5], 0.01, 0.01);
        assert!((solve_scale_analytic(&p) - 0.998).abs() < 1e-12);
    }

    #[test]
    fn frictionless_scale_reinvests_dividends_exactly() {
        let p = problem(&[600.0, 400.0], 10.0, &[0.5, 0.5], 0.0, 0.0);
        assert!((solve_scale_analytic(&p) - 1.01).abs() < 1e-15);
    }

    #[test]
    fn numeric_scale_agrees_on_hand_examples() {
        for (holdings, div, targets, tc) in [
            (vec![600.0, 400.0], 0.0, vec![0.5, 0.5], 0.01),
            (vec![600.0, 400.0], 10.0, vec![0.5, 0.5], 0.0),
            (vec![600.0, 400.0], 0.0, vec![1.0, 0.0], 0.01),
        ] {
            let p = RebalanceProblem::new(
                holdings,
                div,
                targets,
                CostRates::uniform(tc).unwrap(),
            )
            .unwrap();
            let analytic = solve_scale_analytic(&p);
            let numeric = solve_scale_numeric(&p).unwrap();
            assert!(
                (analytic - numeric).abs() <= 1e-9 * analytic.abs().max(1.0),
                "analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn numeric_scale_handles_degenerate_single_position() {
        // Everything already sits in the only targeted asset, so no trade
        // is needed and the scale is exactly one.
        let p = problem(&[1000.0, 0.0], 0.0, &[1.0, 0.0], 0.01, 0.01);
        assert_eq!(solve_scale_numeric(&p).unwrap(), 1.0);
        assert!((solve_scale_analytic(&p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn concentrating_into_one_asset_pays_costs_on_both_legs() {
        // Move (w, 1-w) fully into asset 1: the scale solves
        // (1 + tc_buy) * (c - w) = (1 - tc_sell) * (1 - w).
        let (w, buy, sell) = (0.3, 0.01, 0.02);
        let p = problem(&[300.0, 700.0], 0.0, &[1.0, 0.0], buy, sell);
        let expected = w + (1.0 - sell) * (1.0 - w) / (1.0 + buy);
        let analytic = solve_scale_analytic(&p);
        assert!((analytic - expected).abs() < 1e-12);
        let numeric = solve_scale_numeric(&p).unwrap();
        assert!((analytic - numeric).abs() <= 1e-9 * analytic.max(1.0));
    }

    #[test]
    fn scale_lands_exactly_on_a_breakpoint_when_dividends_match_its_gap() {
        let holdings = vec![200.0, 300.0, 100.0, 400.0];
        let targets = vec![0.3, 0.2, 0.25, 0.25];
        let rates = CostRates::new(0.01, 0.015).unwrap();
        let probe =
            RebalanceProblem::new(holdings.clone(), 0.0, targets.clone(), rates).unwrap();
        let state = breakpoint_gaps(&probe);
        let (pivot, &gap) = state
            .gap_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(gap > 0.0, "fixture needs a positive gap");
        let dividends = gap * probe.wealth_prev();
        let p = RebalanceProblem::new(holdings, dividends, targets, rates).unwrap();
        let expected = state.weight_ratios[pivot];
        let analytic = solve_scale_analytic(&p);
        let numeric = solve_scale_numeric(&p).unwrap();
        assert!((analytic - expected).abs() <= 1e-9 * expected);
        assert!((numeric - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn rebalance_matches_hand_trade() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.5, 0.5], 0.01, 0.01);
        let out = rebalance(&p);
        assert!((out.holdings_new[0] - 499.0).abs() < 1e-9);
        assert!((out.holdings_new[1] - 499.0).abs() < 1e-9);
        assert!((out.transaction_costs - 2.0).abs() < 1e-9);
        assert!((out.wealth_new - 998.0).abs() < 1e-9);
    }

    #[test]
    fn identity_rebalance_trades_nothing() {
        let p = problem(&[600.0, 400.0], 0.0, &[0.6, 0.4], 0.01, 0.01);
        let out = rebalance(&p);
        assert_eq!(out.transaction_costs, 0.0);
        assert_eq!(out.holdings_new, vec![600.0, 400.0]);
        assert_eq!(out.wealth_new, 1000.0);
    }

    #[test]
    fn frictionless_rebalance_reinvests_dividends_in_full() {
        let p = problem(&[600.0, 400.0], 10.0, &[0.5, 0.5], 0.0, 0.0);
        let out = rebalance(&p);
        assert_eq!(out.transaction_costs, 0.0);
        assert!((out.holdings_new[0] - 505.0).abs() < 1e-12);
        assert!((out.holdings_new[1] - 505.0).abs() < 1e-12);
        assert!((out.wealth_new - 1010.0).abs() < 1e-12);
    }

    #[test]
    fn construction_rejects_invalid_inputs() {
        let rates = CostRates::new(0.01, 0.01).unwrap();
        assert!(matches!(
            RebalanceProblem::new(vec![0.0, 0.0], 0.0, vec![0.5, 0.5], rates),
            Err(Error::NonPositiveWealth { .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![-1.0, 2.0], 0.0, vec![0.5, 0.5], rates),
            Err(Error::NegativeHolding { index: 0, .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![1.0, 2.0], -0.5, vec![0.5, 0.5], rates),
            Err(Error::NegativeDividends { .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![1.0, 2.0], 0.0, vec![0.7, 0.5], rates),
            Err(Error::TargetSumOutOfTolerance { .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![1.0, 2.0], 0.0, vec![0.0, 0.0], rates),
            Err(Error::TargetSumOutOfTolerance { .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![1.0, 2.0], 0.0, vec![1.5, -0.5], rates),
            Err(Error::NegativeTarget { index: 1, .. })
        ));
        assert!(matches!(
            RebalanceProblem::new(vec![1.0], 0.0, vec![0.5, 0.5], rates),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(CostRates::new(1.0, 0.0), Err(_)));
        assert!(matches!(CostRates::new(0.0, -0.1), Err(_)));
    }

    #[test]
    fn targets_within_tolerance_are_renormalized() {
        let rates = CostRates::zero();
        let p = RebalanceProblem::new(
            vec![500.0, 500.0],
            0.0,
            vec![0.5 + 4e-10, 0.5 + 4e-10],
            rates,
        )
        .unwrap();
        let sum: f64 = p.targets().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    /// Random problems with occasional zero holdings and zero targets.
    fn arb_problem() -> impl Strategy<Value = RebalanceProblem> {
        (
            2usize..40,
            any::<u64>(),
            0.0f64..0.05,
            0.0f64..0.05,
            0.0f64..0.1,
        )
            .prop_map(|(d, seed, buy, sell, div_frac)| {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut holdings = vec![0.0; d];
                let mut targets = vec![0.0; d];
                loop {
                    let mut total = 0.0;
                    for h in &mut holdings {
                        *h = if rng.gen_bool(0.2) {
                            0.0
                        } else {
                            rng.gen_range(0.0..100.0)
                        };
                        total += *h;
                    }
                    if total > 1.0 {
                        break;
                    }
                }
                loop {
                    let mut total = 0.0;
                    for t in &mut targets {
                        *t = if rng.gen_bool(0.15) {
                            0.0
                        } else {
                            rng.gen_range(0.0..1.0)
                        };
                        total += *t;
                    }
                    if total > 1e-6 {
                        for t in &mut targets {
                            *t /= total;
                        }
                        break;
                    }
                }
                let wealth: f64 = holdings.iter().sum();
                RebalanceProblem::new(
                    holdings,
                    div_frac * wealth,
                    targets,
                    CostRates::new(buy, sell).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn rebalance_is_self_financing(p in arb_problem()) {
            let out = rebalance(&p);
            let wealth = p.wealth_prev();
            let residual = (1.0 + p.rates().buy) * out.buys
                - (1.0 - p.rates().sell) * out.sells
                - p.dividends();
            prop_assert!(residual.abs() <= 1e-9 * wealth);
            let expected = wealth + p.dividends() - out.transaction_costs;
            prop_assert!((out.wealth_new - expected).abs() <= 1e-9 * wealth);
        }

        #[test]
        fn analytic_and_numeric_scales_agree(p in arb_problem()) {
            let analytic = solve_scale_analytic(&p);
            let numeric = solve_scale_numeric(&p).unwrap();
            prop_assert!((analytic - numeric).abs() <= 1e-9 * analytic.abs().max(1.0));
        }

        #[test]
        fn gaps_rank_like_weight_ratios(p in arb_problem()) {
            let state = breakpoint_gaps(&p);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| state.weight_ratios[a].total_cmp(&state.weight_ratios[b]));
            for pair in order.windows(2) {
                prop_assert!(state.gap_values[pair[0]] <= state.gap_values[pair[1]] + 1e-12);
            }
        }

        #[test]
        fn scale_respects_ratio_bounds(p in arb_problem()) {
            let state = breakpoint_gaps(&p);
            let scale = solve_scale_analytic(&p);
            let lo = state.weight_ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = state
                .weight_ratios
                .iter()
                .copied()
                .fold(1.0 + state.normalized_dividend, f64::max);
            prop_assert!(scale >= lo - 1e-12);
            prop_assert!(scale <= hi + 1e-12);
        }

        #[test]
        fn residual_sides_are_monotone_in_scale(p in arb_problem()) {
            // The buy side of the self-financing equation must not fall and
            // the sell side must not rise as the scale grows.
            let ratios: Vec<f64> = p
                .holdings_prev()
                .iter()
                .zip(p.targets())
                .map(|(&h, &pi)| if pi > 0.0 { h / p.wealth_prev() / pi } else { 0.0 })
                .collect();
            let side = |c: f64| {
                let mut buys = 0.0;
                let mut sells = 0.0;
                for (&r, &t) in ratios.iter().zip(p.targets()) {
                    buys += (c - r).max(0.0) * t;
                    sells += (r - c).max(0.0) * t;
                }
                (
                    (1.0 + p.rates().buy) * buys,
                    (1.0 - p.rates().sell) * sells,
                )
            };
            let top = ratios.iter().copied().fold(1.0, f64::max) + 1.0;
            let mut prev = side(0.0);
            for step in 1..=32 {
                let c = top * step as f64 / 32.0;
                let cur = side(c);
                prop_assert!(cur.0 >= prev.0 - 1e-12);
                prop_assert!(cur.1 <= prev.1 + 1e-12);
                prev = cur;
            }
        }

        #[test]
        fn post_trade_weights_hit_targets(p in arb_problem()) {
            let out = rebalance(&p);
            for (&h, &pi) in out.holdings_new.iter().zip(p.targets()) {
                prop_assert!((h - pi * out.wealth_new).abs() <= 1e-12 * out.wealth_new);
            }
        }
    }
}
