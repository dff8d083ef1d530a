use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable `{0}` is not assigned in the context")]
    MissingAssignment(String),
    #[error("value index {value} is out of range for variable `{variable}`")]
    ValueOutOfRange { variable: String, value: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown value `{value}` for variable `{variable}`")]
    UnknownValue { variable: String, value: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("leaf locator {0:?} does not name a leaf")]
    InvalidLocator(Vec<usize>),
    #[error("no arc {from} -> {to}")]
    NoSuchArc { from: String, to: String },
    #[error("reversing {from} -> {to} would create a cycle")]
    WouldCreateCycle { from: String, to: String },
    #[error("CPT of `{0}` is tabular; a tree is required")]
    NotATree(String),
    #[error("in-slice dependency graph is cyclic")]
    CyclicSlice,
    #[error("enumeration needs {contexts} contexts, above the cap of {cap}")]
    TooLarge { contexts: u128, cap: u128 },
    #[error("networks range over different variables")]
    MismatchedVariables,
    #[error("evidence has zero probability")]
    ZeroEvidenceProbability,
    #[error("all trial weights are zero")]
    AllZeroWeights,
    #[error("CPT evaluation read unsampled variable `{variable}` at slice {time}")]
    UnsampledRead { variable: String, time: usize },
    #[error("query variable `{variable}` was not sampled at slice {time}")]
    UnsampledQuery { variable: String, time: usize },
    #[error("invalid network:\n{0}")]
    Validation(ValidationReport),
    #[error("{0}")]
    Invalid(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
