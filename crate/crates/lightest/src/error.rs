use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rule arity {arity} exceeds the configured maximum {max}")]
    ArityExceeded { arity: usize, max: usize },

    #[error("malformed derivation: {0}")]
    MalformedDerivation(String),

    #[error("statement budget exceeded: {statements} statements expanded, frontier size {frontier}")]
    BudgetExceeded { statements: usize, frontier: usize },

    #[error(
        "priority regression: popped {statement} at priority {priority} after priority {previous}"
    )]
    PriorityRegression {
        statement: String,
        priority: f64,
        previous: f64,
    },

    #[error("cyclic problem, one cycle: {}", cycle.join(" -> "))]
    CyclicProblem { cycle: Vec<String> },

    #[error("statement {0} has no entry in the solution set")]
    NotDerived(String),

    #[error("unsupported weight function: {0}")]
    UnsupportedWeightFn(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
