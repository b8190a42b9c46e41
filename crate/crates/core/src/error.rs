use alloc::string::String;

use crate::template::TemplateError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("overlapping views: {0}")]
    Overlap(String),
    #[error("allocation of {0} elements failed")]
    Alloc(usize),
    #[error("expression error: {0}")]
    Expr(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("registry: {0}")]
    Registry(String),
}
