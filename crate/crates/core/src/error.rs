use thiserror::Error;

/// Errors raised by the simulation and numerics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse law specification `{spec}`: {reason}")]
    LawSpec { spec: String, reason: String },

    #[error("margin exceeded: {0}")]
    MarginExceeded(String),

    #[error("margin insufficient: {0}")]
    MarginInsufficient(String),

    #[error("deep-interior site {site:?} left unmatched")]
    InteriorUnsaturated { site: Vec<i64> },

    #[error("region of {sites} sites exceeds the exhaustive cap of {cap}")]
    RegionTooLarge { sites: usize, cap: usize },

    #[error("truncated mean diverges for tail exponent alpha = {alpha}")]
    DivergentMean { alpha: f64 },

    #[error("hole product did not reach tolerance {tolerance:e} before the cutoff K = {cutoff}")]
    NonconvergentProduct { tolerance: f64, cutoff: i64 },

    #[error("no successes in {trials} trials; the event is below the Monte Carlo resolution")]
    AllMisses { trials: u64 },

    #[error("window too small: {flagged} of {trials} trials had |M(0)| beyond half the core")]
    WindowTooSmall { flagged: u64, trials: u64 },

    #[error("tail unresolvable: {0}")]
    Unresolvable(String),

    #[error("degenerate fit: {usable} usable points, at least 3 required")]
    DegenerateFit { usable: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::LawSpec { .. } => "LawSpec",
            Error::MarginExceeded(_) => "MarginExceeded",
            Error::MarginInsufficient(_) => "MarginInsufficient",
            Error::InteriorUnsaturated { .. } => "InteriorUnsaturated",
            Error::RegionTooLarge { .. } => "RegionTooLarge",
            Error::DivergentMean { .. } => "DivergentMean",
            Error::NonconvergentProduct { .. } => "NonconvergentProduct",
            Error::AllMisses { .. } => "AllMisses",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
            Error::Unresolvable(_) => "Unresolvable",
            Error::DegenerateFit { .. } => "DegenerateFit",
            Error::Unsupported(_) => "Unsupported",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
