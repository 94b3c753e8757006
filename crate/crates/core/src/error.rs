use std::path::PathBuf;

use crate::kitti::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("point cloud is in the {found:?} frame, expected {expected:?}")]
    Frame { expected: Frame, found: Frame },

    #[error("degenerate 2D box: {0}")]
    DegenerateBox(String),

    #[error("invalid heuristic parameters: {0}")]
    InvalidParams(String),

    #[error("histogram weights have already been smeared")]
    SmearTwice,

    #[error("histogram weights have not been smeared yet")]
    NotSmeared,

    #[error("frustum contains no points")]
    EmptyFrustum,

    #[error("RoI center {c} lies outside the frustum interval [{near}, {far}]")]
    InvalidCenter { c: f64, near: f64, far: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
