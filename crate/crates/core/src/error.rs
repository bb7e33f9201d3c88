use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("{sites} sites requested but dense {what} is limited to {max} sites")]
    TooManySites {
        sites: usize,
        max: usize,
        what: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("Hamiltonian does not commute with the number operator (max element {deviation:e})")]
    NotConserved { deviation: f64 },

    #[error("number operator must be diagonal in the product basis")]
    NumberOperatorNotDiagonal,

    #[error("state {state} has non-integer excitation number {expectation}")]
    BandAssignment { state: usize, expectation: f64 },

    #[error("excitation number {n} out of range for {n_sites} sites")]
    ExcitationOutOfRange { n: usize, n_sites: usize },

    #[error("transition requires |K'| = |K| + 1 (got {from} -> {to})")]
    NotAdjacentBands { from: usize, to: usize },

    #[error("vanishing denominator in the transition amplitude (k = {k}, k' = {k_prime})")]
    SingularTransition { k: f64, k_prime: f64 },

    #[error("Bose-Einstein factor needs a positive transition energy, got {0}")]
    NonPositiveFrequency(f64),

    #[error("site index {site} out of range for a ring of {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },

    #[error("conflicting configuration: {0}")]
    Conflict(String),

    #[error("steady-state solve failed: Liouvillian is singular beyond the trace constraint")]
    SingularSolve,

    #[error("steady state is not unique (uniqueness gap {gap:e}, residual {residual:e})")]
    NonUnique { gap: f64, residual: f64 },

    #[error("steady state has eigenvalue {min_eigenvalue:e}, below the positivity floor")]
    PositivityViolation { min_eigenvalue: f64 },

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("eigendecomposition did not converge")]
    Eigendecomposition,
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
