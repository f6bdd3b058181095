use thiserror::Error;

/// Errors raised by the filters, models, metric and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trajectory window")]
    EmptyWindow,

    #[error("value {0} outside the unit interval")]
    Domain(f64),

    #[error("beta moment matching degenerate (u = {u}, v = {v}, k_beta = {k_beta})")]
    BetaDegenerate { u: f64, v: f64, k_beta: f64 },

    #[error("track component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("range singularity: target at the sensor origin")]
    RangeSingularity,

    #[error("measurement outside model support: {0:?}")]
    OutsideSupport(Vec<f64>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("scan time {scan} does not match filter time {filter}")]
    TimeMismatch { scan: usize, filter: usize },

    #[error("innovation covariance is not positive definite")]
    SingularInnovation,

    #[error("trajectory ends at time {end} beyond the metric horizon {horizon}")]
    Horizon { end: usize, horizon: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown export format `{0}`")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    TomlParse(#[from] toml::de::Error),

    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn in_component(self, index: usize) -> Self {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
