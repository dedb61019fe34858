use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid coefficient spec: {0}")]
    InvalidSpec(String),
    #[error("linear case excluded: D does not depend on u")]
    LinearCase,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("condition `{0}` is not satisfied by the equation")]
    ConditionViolated(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("reality condition violated: {0}")]
    Reality(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        /// Levels computed before the abort.
        field: Box<crate::numeric::Field>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
