use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge {nominator} -> {nominee} references unknown subject `{missing}`")]
    UnknownEdgeEndpoint {
        nominator: String,
        nominee: String,
        missing: String,
    },

    #[error("self-nomination by `{0}`")]
    SelfEdge(String),

    #[error("subject `{0}` has no community label")]
    MissingCommunity(String),

    #[error("subject `{0}` listed with more than one community label")]
    DuplicateCommunity(String),

    #[error("unknown subject `{0}`")]
    UnknownSubject(String),

    #[error("degenerate split: single group")]
    DegenerateSplit,

    #[error("need at least {needed} subjects, got {got}")]
    TooFewSubjects { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("input too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("constant input: {0}")]
    ConstantInput(String),

    #[error("panel invalid: {0}")]
    InvalidPanel(String),

    #[error("table stage is {found}, expected {expected}")]
    WrongStage { expected: String, found: String },

    #[error("region `{0}` has zero variance across dyads")]
    ZeroVarianceRegion(String),

    #[error("data-quality abort: region `{region}` is missing {missing} of {total} dyads")]
    DataQuality {
        region: String,
        missing: usize,
        total: usize,
    },

    #[error("degenerate response `{0}`: zero variance")]
    DegenerateResponse(String),

    #[error("design is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),

    #[error("need at least {needed} rows for {k} coefficients, got {got}")]
    TooFewRows { needed: usize, k: usize, got: usize },

    #[error("matrix not positive definite")]
    NotPositiveDefinite,

    #[error("optimizer did not converge in {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("factor `{factor}` has no level `{level}` in the fit")]
    MissingLevel { factor: String, level: String },

    #[error("contrast `{0}` weights do not sum to zero")]
    UnbalancedContrast(String),

    #[error("probability out of range: {0}")]
    InvalidProbability(f64),

    #[error("infeasible degree sequence: {0}")]
    InfeasibleDegrees(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("rating for subject `{subject}` item {item} out of range 1..=5: {value}")]
    RatingOutOfRange { subject: String, item: usize, value: i64 },
}
