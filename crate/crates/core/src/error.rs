use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("form is outside the trimmed space of order {order}: {detail}")]
    DegreePattern { order: usize, detail: String },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("near-singular block for directions {directions:?}: smallest pivot ratio {ratio:e}")]
    SingularBlock { directions: Vec<usize>, ratio: f64 },

    #[error("point {0:?} lies outside the mesh")]
    PointOutsideMesh(Vec<f64>),

    #[error("unknown form catalog id {0}")]
    UnknownForm(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
