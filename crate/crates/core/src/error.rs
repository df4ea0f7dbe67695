use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A triplet or index lies outside the matrix shape.
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Factorization requested above the configured size cap.
    Capacity {
        size: usize,
        cap: usize,
    },
    /// LU pivot below the singularity threshold at the given elimination step.
    Singular {
        step: usize,
    },
    NotSymmetric,
    NotPositiveDefinite,
    /// Krylov breakdown (negative curvature in CG, indefinite preconditioner in MINRES).
    Breakdown(&'static str),
    DegenerateElement(usize),
    InvalidArgument(String),
    /// Riesz-map CG did not reach its tolerance.
    RieszNotConverged,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IndexOutOfRange {
                row,
                col,
                nrows,
                ncols,
            } => write!(
                f,
                "index ({row}, {col}) out of range for a {nrows}x{ncols} matrix"
            ),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Capacity { size, cap } => {
                write!(f, "dimension {size} exceeds factorization cap {cap}")
            }
            Error::Singular { step } => write!(f, "matrix is numerically singular (step {step})"),
            Error::NotSymmetric => f.write_str("matrix is not symmetric"),
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
            Error::Breakdown(what) => write!(f, "Krylov breakdown: {what}"),
            Error::DegenerateElement(e) => write!(f, "element {e} has non-positive volume"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::RieszNotConverged => f.write_str("Riesz-map solve did not converge"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
