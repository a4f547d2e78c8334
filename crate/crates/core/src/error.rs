//! Error type shared across the crate.

use chrono::NaiveDate;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- rebalancing problems ----
    #[error("cost rate {rate} outside [0, 1)")]
    CostRateOutOfRange { rate: f64 },
    #[error("holdings ({holdings}) and targets ({targets}) differ in length")]
    LengthMismatch { holdings: usize, targets: usize },
    #[error("pre-trade wealth must be positive (got {wealth})")]
    NonPositiveWealth { wealth: f64 },
    #[error("holdings[{index}] is negative ({value})")]
    NegativeHolding { index: usize, value: f64 },
    #[error("dividend balance must be nonnegative (got {value})")]
    NegativeDividends { value: f64 },
    #[error("target[{index}] is negative ({value})")]
    NegativeTarget { index: usize, value: f64 },
    #[error("target weights sum to {sum}, outside 1 +/- 1e-9")]
    TargetSumOutOfTolerance { sum: f64 },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("no sign change found while bracketing the rebalance scale")]
    BracketFailure,

    // ---- market data ----
    #[error("{path}:{line}: {reason}")]
    Csv {
        path: String,
        line: u64,
        reason: String,
    },
    #[error("previous-day capitalization must be positive (got {value})")]
    NonPositiveCap { value: f64 },
    #[error("accrual window mismatch: {reason}")]
    WindowMismatch { reason: String },
    #[error("dataset invariant violated: {reason}")]
    InvalidDataset { reason: String },

    // ---- weight generators ----
    #[error("weight vector is empty")]
    EmptyWeights,
    #[error("weights[{index}] is invalid ({value})")]
    InvalidWeight { index: usize, value: f64 },
    #[error("selection needs at least {required} stocks, found {available}")]
    TooFewStocks { required: usize, available: usize },
    #[error("entropy weights undefined: weight mass concentrated in a single stock")]
    DegenerateEntropy,
    #[error("diversity target for stock {index} is negative ({value}); widen the smoothing window or lower alpha")]
    NegativeDiversityWeight { index: usize, value: f64 },
    #[error("diversity target for {stock} is negative ({value}); widen the smoothing window or lower alpha")]
    NegativeDiversityWeightForStock { stock: String, value: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    // ---- engine & reporting ----
    /// A lower-level failure stamped with the trading date it surfaced on.
    /// The cause is folded into the message instead of hanging off
    /// `source()`, so the full story prints wherever the error is shown.
    #[error("{date}: {cause}")]
    AtDate { date: NaiveDate, cause: Box<Error> },
    #[error("misaligned series: {reason}")]
    MisalignedPaths { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the trading date on which a lower-level error surfaced.
    pub fn at_date(self, date: NaiveDate) -> Error {
        Error::AtDate {
            date,
            cause: Box::new(self),
        }
    }
}
