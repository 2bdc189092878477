use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("energy {energy} is within {window} of a tangent pole of the intercept function")]
    TangentPole { energy: f64, window: f64 },

    #[error("energy {energy_khz} kHz is within the exclusion window of a model pole")]
    ModelPole { energy_khz: f64 },

    #[error("pole inside requested range: {0}")]
    PoleInRange(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("no fit candidate: {0}")]
    NoCandidate(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time step {dt} s violates Nyquist for max frequency {f_max} Hz; need dt <= {suggested} s")]
    Nyquist { dt: f64, f_max: f64, suggested: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::TangentPole { .. } => "tangent_pole",
            Error::ModelPole { .. } => "model_pole",
            Error::PoleInRange(_) => "pole_in_range",
            Error::Solver(_) => "solver",
            Error::Fit(_) => "fit",
            Error::NoCandidate(_) => "no_candidate",
            Error::Index { .. } => "index",
            Error::InvalidInput(_) => "invalid_input",
            Error::Nyquist { .. } => "nyquist",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code per the CLI contract: 2 usage/config, 3
    /// numerical/solver, 4 no fit found.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) | Error::Index { .. } => 2,
            Error::NoCandidate(_) | Error::Fit(_) => 4,
            _ => 3,
        }
    }
}
