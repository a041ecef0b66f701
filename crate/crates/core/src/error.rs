use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Cell coordinates `(row, column)`, zero based.
pub type Cell = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input text could not be read as a rectangular numeric grid.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Input parsed but violates a table invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    /// Argument outside the domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that requires strictly positive posterior counts met zero cells.
    #[error(
        "posterior has zero cells at {}; use a prior with positive pseudo-counts (jeffreys, perks, uniform)",
        format_cells(.cells)
    )]
    ZeroCells { cells: Vec<Cell> },

    /// Probability matrix not on the simplex, or with a zero entry where one is forbidden.
    #[error("invalid probability matrix: {0}")]
    Probability(String),

    /// Leading-order variance vanishes, so standardized moments are undefined.
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    /// Moment inputs outside what the requested fit can represent.
    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("moment matching did not converge (best relative residual {best_residual:e})")]
    NonConvergence { best_residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by the numeric state of valid inputs, as opposed
    /// to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroCells { .. }
                | Error::Degenerate(_)
                | Error::InvalidMoments(_)
                | Error::NonConvergence { .. }
                | Error::Domain(_)
                | Error::Probability(_)
        )
    }
}

fn format_cells(cells: &[Cell]) -> String {
    const SHOWN: usize = 8;
    let mut out: Vec<String> = cells
        .iter()
        .take(SHOWN)
        .map(|(i, j)| format!("({i},{j})"))
        .collect();
    if cells.len() > SHOWN {
        out.push(format!("... ({} total)", cells.len()));
    }
    out.join(", ")
}
