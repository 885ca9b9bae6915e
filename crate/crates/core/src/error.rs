use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag, used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singular(_) => "singular",
            Error::Graph(_) => "graph",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
