use thiserror::Error;

use crate::bounds::BoundsError;
use crate::geometry::GeometryError;
use crate::synth::SynthError;
use crate::validate::ValidateError;

/// Any failure of the end-to-end pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("bounds: {0}")]
    Bounds(#[from] BoundsError),
    #[error("synthesis: {0}")]
    Synth(#[from] SynthError),
    #[error("validation: {0}")]
    Validate(#[from] ValidateError),
    #[error("invalid problem spec: {0}")]
    Spec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
