use thiserror::Error;

/// Errors raised by the simulation and fitting layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not Hermitian (max deviation {deviation:e} GHz)")]
    NotHermitian { deviation: f64 },

    #[error(
        "state tracking is ambiguous at B = {field} T (best overlap {overlap:.3}); \
         refine the grid to a step of at most {suggested_step:e} T"
    )]
    TrackingAmbiguity {
        field: f64,
        overlap: f64,
        suggested_step: f64,
    },

    #[error("no interior gap minimum for levels ({0}, {1}) in the search range")]
    CrossingNotFound(usize, usize),

    #[error("no spin-orbit constant in [{lo}, {hi}] GHz puts the crossing at {target} T")]
    CalibrationFailed { target: f64, lo: f64, hi: f64 },

    #[error("no laser dephasing rate gives a {target} MHz dip (reachable {narrowest} to {widest} MHz)")]
    LaserCalibrationFailed { target: f64, narrowest: f64, widest: f64 },

    #[error("eigensystems come from different field configurations")]
    ConfigurationMismatch,

    #[error("no usable lambda system: {0}")]
    NoLambda(String),

    #[error("steady state is not unique (generator kernel dimension > 1)")]
    NonUniqueSteadyState,

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("trace has no interior minimum")]
    NoDip,

    #[error("underdetermined fit: {points} points for {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("damping exceeded {0:e} without a decreasing step")]
    DampingOverflow(f64),

    #[error("field {0} T is not a grid point of the level diagram")]
    NotOnGrid(f64),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    /// True for failures of the numerics on valid input (solver, tracking,
    /// calibration, fit); false for bad input, configuration or I/O.
    pub fn is_numeric(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::NotOnGrid(_)
                | Error::Underdetermined { .. }
                | Error::ConfigurationMismatch
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
