use thiserror::Error;

/// Errors raised by the analytic engines, the Fock-space oracle and the optimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its allowed range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid mode selection: {0}")]
    InvalidModes(String),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("malformed state: {0}")]
    MalformedState(String),

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("success probability is zero; photon cost is undefined")]
    ZeroProbability,

    #[error("entanglement chain cannot be solved: {0}")]
    Unsolvable(String),

    #[error("invalid addition chain: {0}")]
    InvalidChain(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("no feasible plan: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "(0, 1)",
        })
    }
}
