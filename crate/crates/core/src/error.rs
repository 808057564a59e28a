use thiserror::Error;

/// Errors raised by the exact-arithmetic pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An output factor vanished identically at an orbit point (the point hit the base locus).
    #[error("indeterminacy: output factor {factor} vanishes{}", step_suffix(*.step))]
    Indeterminacy { factor: usize, step: Option<usize> },

    /// A map declared `total` produced a zero factor vector.
    #[error("regularity violated for total map: output factor {factor} vanishes{}", step_suffix(*.step))]
    RegularityViolation { factor: usize, step: Option<usize> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A configured budget (terms, bits, iterations) was exhausted.
    #[error("resource limit: {0}")]
    Resource(String),

    /// An exact operation received a spectrum with irrational or complex eigenvalues.
    #[error("spectrum is not exact over the rationals")]
    InexactSpectrum,

    #[error("divisor class is not in the Krylov span")]
    NotInSpan,

    #[error("domain error: {0}")]
    Domain(String),

    /// An a-priori inequality failed; indicates an arithmetic bug.
    #[error("assertion failure: {0}")]
    AssertionFailure(String),

    /// A canonical height component could not be separated from zero.
    #[error("ambiguous zero in block {block}, component {component}: |value| = {value:e}, error bound = {error_bound:e}")]
    AmbiguousZero {
        block: usize,
        component: usize,
        value: f64,
        error_bound: f64,
    },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("maps do not commute: {0}")]
    Commutativity(String),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(n) => format!(" at orbit index {n}"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches an orbit index to indeterminacy errors raised by a single evaluation.
    pub fn at_step(self, n: usize) -> Self {
        match self {
            Error::Indeterminacy { factor, .. } => Error::Indeterminacy {
                factor,
                step: Some(n),
            },
            Error::RegularityViolation { factor, .. } => Error::RegularityViolation {
                factor,
                step: Some(n),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
