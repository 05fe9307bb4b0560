use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trajectory leaves the arena at t = {t:.3} s ({x:.3}, {y:.3})")]
    OutsideArena { t: f64, x: f64, y: f64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("non-finite filter state")]
    NonFiniteState,

    #[error("no active anchors for correction")]
    NoActiveAnchors,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("pose ({x:.3}, {y:.3}) outside the heatmap grid")]
    OutsideGrid { x: f64, y: f64 },

    #[error("layout fingerprint mismatch: model {model}, data {data}")]
    LayoutMismatch { model: String, data: String },

    #[error("datasets use different layouts: {first} and {other}")]
    MixedLayouts { first: String, other: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
