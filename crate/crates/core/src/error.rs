use cohdeals_linprog::LpError;
use thiserror::Error;

/// Good deal or arbitrage exhibited when a pricing condition fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Portfolio weights `h` on the traded assets.
    pub portfolio: Vec<f64>,
    /// `u(<h, S1 - S0>)` for a good deal, expected gain for an arbitrage.
    pub value: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    GoodDeal,
    Arbitrage,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    /// Malformed input: dimensions, mismatched spaces, empty sets.
    #[error("structural error: {0}")]
    Structural(String),
    /// Parameter outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are well formed but mutually inconsistent.
    #[error("model error: {0}")]
    Model(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("pricing condition violated ({:?}), portfolio {:?}", .0.kind, .0.portfolio)]
    Violated(Box<Violation>),
}

impl From<LpError> for CoreError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Numerical(m) => CoreError::Numerical(m),
            other => CoreError::Structural(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
