use thiserror::Error;

/// Which half of a field pair an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// The Dirichlet component `u`.
    U,
    /// The Neumann component `v`.
    V,
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Component::U => f.write_str("u (Dirichlet component)"),
            Component::V => f.write_str("v (Neumann component)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("invalid limit parameters: {0}")]
    InvalidLimit(String),

    #[error("field shape {found:?} does not match domain shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("power overflow in {what}: p*log|x| = {exponent:.3} exceeds 700; renormalize the fields")]
    Scale { what: &'static str, exponent: f64 },

    #[error("inadmissible field pair: {0}")]
    Admissibility(String),

    #[error("degenerate field pair: {0} is flat (zero gradient energy)")]
    FlatComponent(Component),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("solver stagnated after {iterations} iterations (quotient {quotient:.6e}, residual {residual:.3e})")]
    Stagnation {
        iterations: usize,
        quotient: f64,
        residual: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
