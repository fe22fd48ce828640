use thiserror::Error;

/// Errors raised by walklab operations.
///
/// Variants split into two families: validation failures (bad parameters,
/// violated hypotheses, unmet preconditions) and resource failures (a
/// window, horizon or evaluation budget that would be exceeded). Callers
/// that need to map errors to process exit codes use [`WalkError::is_budget`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("stability index alpha = 1 is excluded (alpha != 1 restriction)")]
    AlphaOne,

    #[error("invalid step law: {hypothesis} violated: {detail}")]
    InvalidLaw {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("kernel path unavailable for heavy-tailed law '{0}' (sampling only)")]
    HeavyTailKernel(String),

    #[error("unsupported stability index {0}: limiting density only implemented for alpha = 2")]
    UnsupportedAlpha(f64),

    #[error("kernel window overflow: {required} sites needed, limit {limit}")]
    WindowOverflow { required: usize, limit: usize },

    #[error("budget exceeded: {what} requires {required}, budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("empty sample")]
    EmptySample,

    #[error("not enough points for a fit: {got} (need {need})")]
    TooFewPoints { got: usize, need: usize },

    #[error("incomplete segment: need positions up to time {needed}, got {got}")]
    IncompleteSegment { needed: u64, got: u64 },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("chain is not transient: spectral radius {0} >= 1")]
    NonTransient(f64),

    #[error("trial index {0} present in both ensembles")]
    OverlappingTrials(u64),
}

impl WalkError {
    /// True for errors caused by a resource limit rather than invalid input.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            WalkError::WindowOverflow { .. }
                | WalkError::BudgetExceeded { .. }
                | WalkError::Overflow(_)
        )
    }
}

pub type Result<T, E = WalkError> = std::result::Result<T, E>;
