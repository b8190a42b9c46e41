use std::fmt;

use portten_core::codegen::KernelSource;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A kernel that failed to build, with the compiler's diagnostic verbatim and
/// the full source it was given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileError {
    pub backend: String,
    pub diagnostic: String,
    pub source: KernelSource,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "building `{}` failed on {}:", self.source.entry_point, self.backend)?;
        writeln!(f, "{}", self.diagnostic)?;
        writeln!(f, "--- source (options: {:?}) ---", self.source.build_options)?;
        write!(f, "{}", self.source.text)
    }
}

impl std::error::Error for CompileError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] portten_core::Error),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{0}")]
    Validation(String),
    #[error("model spec line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layer {index}: {message}")]
    Chain { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 3 for backend, build and allocation failures,
    /// 2 for everything the caller can fix by changing its input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Backend(_) | Error::Compile(_) | Error::Core(portten_core::Error::Alloc(_)) => 3,
            _ => 2,
        }
    }
}
