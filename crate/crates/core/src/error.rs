use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("no stable steady-state branch among {roots} root(s)")]
    NoStableBranch { roots: usize },

    #[error("branch index {index} out of range ({count} branch(es))")]
    BranchOutOfRange { index: usize, count: usize },

    #[error("pole at resonance: denominator vanishes at delta_p = {probe_detuning}")]
    PoleAtResonance { probe_detuning: f64 },

    #[error(
        "indeterminate form at delta_p = {probe_detuning}: X and the coupling part of Y vanish with nonzero couplings"
    )]
    IndeterminateForm { probe_detuning: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("singular linear system (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("linearized system is unstable (max Re lambda = {abscissa:e})")]
    UnstableSystem { abscissa: f64 },

    #[error("integrator step too coarse: halving h changed amplitudes by {change:e} (relative)")]
    StepTooCoarse { change: f64 },

    #[error("integration needs {needed} steps, above the budget of {budget}")]
    StepBudgetExceeded { needed: u64, budget: u64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("degenerate fitting segment: {0}")]
    DegenerateSegment(String),

    #[error("window count changed across the family: {counts:?}")]
    WindowCountChanged { counts: Vec<usize> },

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("at grid index {index}: {source}")]
    AtPoint { index: usize, source: Box<Error> },
}

impl Error {
    /// Strips grid-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl serde::Serialize for Error {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
