use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The periodic lattice is too small for the spread of the walk.
    #[error("aliasing guard tripped at t={time}: 8*sigma = {spread:.1} >= M = {size}")]
    Aliasing {
        time: usize,
        spread: f64,
        size: usize,
    },

    /// A power-law fit was requested over a window with too few usable points.
    #[error(
        "fit window [{t_min}, {t_max}] holds {points} usable points, need at least {required}"
    )]
    FitWindow {
        t_min: f64,
        t_max: f64,
        points: usize,
        required: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
