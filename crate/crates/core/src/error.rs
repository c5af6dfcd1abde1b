use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid Pauli letter {letter:?} (expected one of I, X, Y, Z)")]
    InvalidPauli { letter: char },

    #[error("zero coefficient on term {axes:?}")]
    ZeroCoefficient { axes: String },

    #[error("coefficient {text:?} is not a finite real number")]
    NonRealCoefficient { text: String },

    #[error("axes string {axes:?} has length {got}, expected {expected}")]
    InconsistentLength {
        axes: String,
        expected: usize,
        got: usize,
    },

    #[error("no terms found in input")]
    EmptyInput,

    #[error("Hamiltonian is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{n} qubits exceeds the dense-rendering cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("time must be positive, got {0}")]
    InvalidTime(f64),

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("truncation order {order} exceeds the cap of {cap}")]
    OrderCapExceeded { order: usize, cap: usize },

    #[error("table size m = {m} exceeds the budget of {budget} entries; lower the truncation order or the number of terms")]
    TableBudgetExceeded { m: u128, budget: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("segment {segment}: kept probability {kept:.6e} is below the floor {floor}")]
    KeptProbabilityFloor {
        segment: usize,
        kept: f64,
        floor: f64,
    },

    #[error("segment normalization s = {0} exceeds 2")]
    NormalizationAboveTwo(f64),

    #[error("{what} did not converge within {limit}")]
    NonConvergence { what: &'static str, limit: usize },

    #[error("discretization steps M = {m} exceeds the cap of {cap}")]
    StepCapExceeded { m: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Errors that signal a violated internal invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::KeptProbabilityFloor { .. }
                | Error::NormalizationAboveTwo(_)
                | Error::NonConvergence { .. }
        )
    }
}
