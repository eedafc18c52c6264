use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("unknown or removed constraint row #{0}")]
    UnknownRow(usize),
    #[error("`{0}` is not a valid LP-format identifier")]
    InvalidName(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFiniteCoefficient(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExportError {
    #[error("integer variable `{0}` has an infinite bound")]
    UnboundedInteger(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImportError {
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: cannot parse `{text}` as a number")]
    BadNumber { line: usize, text: String },
    #[error("line {line}: expected `name value`")]
    Malformed { line: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("integer variable `{0}` must have finite bounds")]
    UnboundedInteger(String),
    #[error("non-finite problem data: {0}")]
    NonFinite(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}
