//! Crate-wide error type.
//!
//! Every failure carries a stable machine-readable code (see [`Error::code`])
//! so the CLI can emit single-line `error[Code]: ...` diagnostics, and splits
//! into two exit classes: usage/configuration problems (exit 2) and
//! statistical or data problems (exit 1).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A (unit, period) cell appeared more than once in the input CSV.
    #[error("duplicate cell for unit `{unit}` period {period}")]
    DuplicateCell { unit: String, period: i64 },

    /// A CSV row could not be parsed (ragged, bad number, bad header, ...).
    #[error("malformed row at line {line}: {detail}")]
    MalformedRow { line: u64, detail: String },

    /// A (unit, period) combination required for a balanced panel is missing.
    #[error("incomplete panel: unit `{unit}` has no observation for period {period}")]
    IncompletePanel { unit: String, period: i64 },

    /// A value parsed as NaN or infinity.
    #[error("non-finite value for unit `{unit}` period {period}")]
    NonFiniteValue { unit: String, period: i64 },

    /// The panel has too few periods for the requested operation.
    #[error("panel has {t} period(s); the operation needs at least {need}")]
    PanelTooShort { t: usize, need: usize },

    /// An explicit or derived sample split is unusable.
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    /// A column is constant across units, so it cannot be standardized.
    #[error("attribute {dim} is constant across units and cannot be standardized")]
    DegenerateAttribute { dim: usize },

    /// Fewer distinct points than requested clusters.
    #[error("only {distinct} distinct point(s); cannot seed {g} clusters")]
    TooFewDistinctPoints { distinct: usize, g: usize },

    /// A group referenced by the test has no members on the testing sample.
    #[error("group {group} is empty on the testing sample")]
    EmptyGroupInP { group: usize },

    /// A variance block is exactly zero (all residuals vanish).
    #[error("variance block for group {group} is singular (all residuals zero)")]
    SingularVariance { group: usize },

    /// A pooled long-run variance estimate came out non-positive.
    #[error("pooled variance estimate is not positive")]
    NonPositiveVariance,

    /// The contrast-projected variance matrix is not positive definite.
    #[error("contrast variance matrix is numerically singular; cannot invert")]
    SingularContrastVariance,

    /// A contrast or test was requested with fewer than two groups.
    #[error("need at least two groups, got {g}")]
    NeedTwoGroups { g: usize },

    /// A leading-group contrast was requested for more groups than exist.
    #[error("cannot contrast the leading {g_large} groups of {g}")]
    InvalidSubset { g_large: usize, g: usize },

    /// Fewer than two fitted clusters meet the proportion threshold.
    #[error("only {found} cluster(s) meet the proportion threshold; need at least 2")]
    TooFewLargeClusters { found: usize },

    /// The testing sample is too short for the requested lag depth.
    #[error("testing sample has {p} period(s); need more than {m} for {m} lag(s)")]
    InsufficientPSample { p: usize, m: usize },

    /// The lagged regressor is constant; the slope is unidentified.
    #[error("degenerate regressor: the lagged series is constant")]
    DegenerateRegressor,

    /// A p-value outside [0, 1] was supplied to a combiner.
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),

    /// An argument is outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    DomainError(String),

    /// An experiment configuration is invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Too few cross-sectional units survive filtering.
    #[error("only {n} unit(s) after filtering; need at least {need}")]
    InsufficientUnits { n: usize, need: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used as the CLI diagnostic prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateCell { .. } => "DuplicateCell",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::IncompletePanel { .. } => "IncompletePanel",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::PanelTooShort { .. } => "PanelTooShort",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::DegenerateAttribute { .. } => "DegenerateAttribute",
            Error::TooFewDistinctPoints { .. } => "TooFewDistinctPoints",
            Error::EmptyGroupInP { .. } => "EmptyGroupInP",
            Error::SingularVariance { .. } => "SingularVariance",
            Error::NonPositiveVariance => "NonPositiveVariance",
            Error::SingularContrastVariance => "SingularContrastVariance",
            Error::NeedTwoGroups { .. } => "NeedTwoGroups",
            Error::InvalidSubset { .. } => "InvalidSubset",
            Error::TooFewLargeClusters { .. } => "TooFewLargeClusters",
            Error::InsufficientPSample { .. } => "InsufficientPSample",
            Error::DegenerateRegressor => "DegenerateRegressor",
            Error::InvalidPValue(_) => "InvalidPValue",
            Error::DomainError(_) => "DomainError",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InsufficientUnits { .. } => "InsufficientUnits",
            Error::Io(_) => "Io",
        }
    }

    /// True for configuration/usage-class errors (CLI exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }

    /// True for errors caused by a degenerate random draw, which a Monte
    /// Carlo runner may answer by redrawing the replication.
    pub fn is_degenerate_draw(&self) -> bool {
        matches!(
            self,
            Error::SingularVariance { .. }
                | Error::NonPositiveVariance
                | Error::SingularContrastVariance
                | Error::TooFewDistinctPoints { .. }
                | Error::EmptyGroupInP { .. }
                | Error::TooFewLargeClusters { .. }
                | Error::DegenerateRegressor
        )
    }
}
