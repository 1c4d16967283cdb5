use core::fmt;

use crate::grid::{GridError, GridShape};

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Grid(GridError),
    /// Field length does not match the grid.
    FieldSize { shape: GridShape, expected: u64, got: usize },
    NanValue { vertex: u64 },
    /// Split counts that do not fit the grid.
    InvalidLayout { splits: [usize; 3], shape: GridShape },
    /// Internal invariant violated; carries a short description.
    Invariant(&'static str),
}

impl From<GridError> for Error {
    fn from(e: GridError) -> Self {
        Error::Grid(e)
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Grid(e) => e.fmt(f),
            Error::FieldSize { shape, expected, got } => {
                write!(f, "field has {got} values but grid {shape} has {expected} vertices")
            }
            Error::NanValue { vertex } => write!(f, "NaN value at vertex {vertex}"),
            Error::InvalidLayout { splits, shape } => write!(
                f,
                "layout {}x{}x{} does not fit grid {shape}",
                splits[0], splits[1], splits[2]
            ),
            Error::Invariant(what) => write!(f, "internal invariant violated: {what}"),
        }
    }
}

impl core::error::Error for Error {}
