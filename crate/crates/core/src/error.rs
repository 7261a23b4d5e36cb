use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("box size must be strictly positive, got {0:?}")]
    NonPositiveSize([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown object code {0}")]
    UnknownCode(u32),
    #[error("unknown object identifier `{0}`")]
    UnknownIdentifier(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("cell size must be positive, got {0}")]
    ZeroCellSize(f64),
    #[error("floor extent must be positive, got ({0}, {1})")]
    BadExtent(f64, f64),
}
