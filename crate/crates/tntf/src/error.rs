//! Error type shared across the crate.

use std::fmt;
use std::io;
use std::path::PathBuf;

#[derive(Debug)]
pub enum Error {
    /// File could not be opened, read, or written.
    Io { path: PathBuf, source: io::Error },
    /// Not a supported image format (PGM P2/P5 with maxval <= 255, or 8-bit grayscale PNG).
    UnsupportedFormat(String),
    /// The file matched a known format but its contents are invalid or truncated.
    MalformedImage(String),
    /// Image header declares a zero width or height.
    ZeroDimensions,
    /// A filter, after dilation, does not fit inside the image.
    FilterTooLarge {
        span: (usize, usize),
        image: (usize, usize),
    },
    /// Two inputs that must agree in shape or length do not.
    ShapeMismatch(String),
    /// Coefficient pyramid does not match the filter banks it is paired with.
    PyramidMismatch(String),
    /// A scalar argument is outside its admissible range.
    InvalidParameter(String),
    /// Solver configuration violates a step-size or mode constraint.
    InvalidConfig(String),
    /// A non-finite value appeared in the solver iterates.
    Diverged { iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "i/o error on {}: {}", path.display(), source),
            Error::UnsupportedFormat(msg) => write!(f, "unsupported format: {msg}"),
            Error::MalformedImage(msg) => write!(f, "malformed image: {msg}"),
            Error::ZeroDimensions => write!(f, "image has zero width or height"),
            Error::FilterTooLarge { span, image } => write!(
                f,
                "dilated filter span {}x{} exceeds image {}x{}",
                span.0, span.1, image.0, image.1
            ),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::PyramidMismatch(msg) => write!(f, "pyramid/bank mismatch: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::Diverged { iteration } => {
                write!(f, "solver diverged (non-finite value) at iteration {iteration}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
