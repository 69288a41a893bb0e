use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsatisfiable split: {0}")]
    UnsatisfiableSplit(String),
    #[error("oracle protocol violation: {0}")]
    Protocol(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("learner error: {0}")]
    Learner(String),
    #[error("query context error: {0}")]
    Context(String),
    #[error("statistics error: {0}")]
    Statistics(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
