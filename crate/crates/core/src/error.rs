use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlockError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlockError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("numerical error at t={t}: {msg}")]
    Numerical { t: f64, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("event mask selects no paths")]
    EmptyMask,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("bad index set: {0}")]
    BadIndex(String),
    #[error("wrong scenario: {0}")]
    WrongScenario(String),
    #[error("path {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<FlockError>,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl FlockError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FlockError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FlockError::Config(msg.into())
    }
}

impl From<std::io::Error> for FlockError {
    fn from(e: std::io::Error) -> Self {
        FlockError::Io(e.to_string())
    }
}
