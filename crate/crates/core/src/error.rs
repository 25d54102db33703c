use thiserror::Error;

use crate::expr::ExprError;

/// Errors raised by the model, solvers and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("coefficient `{name}` is not positive at t = {t} (value {value})")]
    NonPositiveCoefficient {
        name: &'static str,
        t: f64,
        value: f64,
    },

    #[error("initial history is not admissible: {0}")]
    InadmissibleHistory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "step h = {h} exceeds the smallest delay {min_delay} observed at t = {t}; \
         choose h <= {min_delay}"
    )]
    StepTooLarge { h: f64, min_delay: f64, t: f64 },

    #[error("integration span {span} is not a whole number of steps of size {h}")]
    NonIntegralSpan { span: f64, h: f64 },

    #[error("log-state overflow (exp out of range) at t = {t}")]
    Overflow { t: f64 },

    #[error("non-finite value encountered at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("t = {t} lies outside the trajectory domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("nonpositive denominator in {0}")]
    NonPositiveDenominator(&'static str),

    #[error("lag map s - delay(s) is not increasing near s = {s}")]
    NonMonotoneLag { s: f64 },

    #[error("grid span {span} is shorter than the tail length {required} needed for the requested tail tolerance")]
    GridTooShort { span: f64, required: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
}

impl Error {
    /// Whether the error stems from invalid input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Expr(ExprError::Syntax { .. })
                | Error::Expr(ExprError::UnknownIdentifier { .. })
                | Error::Expr(ExprError::BadExponent { .. })
                | Error::NonPositiveCoefficient { .. }
                | Error::InadmissibleHistory(_)
                | Error::InvalidArgument(_)
                | Error::StepTooLarge { .. }
                | Error::NonIntegralSpan { .. }
                | Error::NonPositiveDenominator(_)
                | Error::NonMonotoneLag { .. }
                | Error::GridTooShort { .. }
                | Error::GridTooCoarse(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
