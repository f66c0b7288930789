use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no homoclinic orbit for a = 1/2 (heteroclinic case)")]
    NoHomoclinic,
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("angle undefined: trajectory passes through the center at t = {t}")]
    AngleUndefined { t: f64 },
    #[error("ambiguous turn count: {0}")]
    AmbiguousTurnCount(String),
    #[error("index {index} outside the switching window")]
    IndexOutOfWindow { index: i64 },
    #[error("q not found: {0}")]
    QNotFound(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("path error: {0}")]
    Path(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("threshold violation: epsilon = {epsilon} is not below epsilon* = {eps_star}")]
    ThresholdViolation { epsilon: f64, eps_star: f64 },
    #[error("invalid itinerary: {0}")]
    InvalidItinerary(String),
    #[error("realization failed: {reason} (surviving parameter interval [{lo}, {hi}])")]
    RealizationFailed { reason: String, lo: f64, hi: f64 },
    #[error("fixed point not found: {0}")]
    FixedPointNotFound(String),
    #[error("localization violated by {excess:e} at x = {x}")]
    Localization { x: f64, excess: f64 },
    #[error("connection not found: {0}")]
    ConnectionNotFound(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
