use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("not on the probability simplex: {0}")]
    NotOnSimplex(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("gradient undefined at ({x1}, {x2}): point lies on a kink")]
    NonDifferentiablePoint { x1: f64, x2: f64 },
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("baseline metric {index} is zero")]
    ZeroBaseline { index: usize },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }
}
