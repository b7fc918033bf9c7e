use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state {state:?} lies outside the modelling region")]
    OutOfRegion { state: Vec<f64> },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("fixture `{fixture}` requires parameter `{param}`")]
    MissingParameter { fixture: String, param: String },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error("too many rules ({rules}) for {what}; limit is {limit}")]
    TooManyRules {
        what: &'static str,
        rules: usize,
        limit: usize,
    },

    #[error("variable `{0}` has no value in the assignment")]
    MissingAssignment(String),

    #[error("constraint references undeclared variable `{0}`")]
    UndeclaredVariable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("no feasible bracket: condition is not feasible at lower end {lo}")]
    NoFeasibleBracket { lo: f64 },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
