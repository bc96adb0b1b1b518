use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("root index {0} must be odd and at least 3")]
    EvenRootIndex(i64),
    #[error("exponent must be an integer")]
    NonIntegerExponent,
    #[error("integer exponent {0} exceeds the limit of 64 in magnitude")]
    ExponentTooLarge(i64),
    #[error("expression is undefined at ({x}, {y})")]
    UndefinedPoint { x: f64, y: f64 },
    #[error("derivative is indeterminate at ({x}, {y})")]
    IndeterminateJet { x: f64, y: f64 },
    #[error("sampled quantity changes sign; split the arc first")]
    SignChange,
    #[error("need at least 3 usable samples, got {0}")]
    TooFewSamples(usize),
    #[error("power fit residual {residual:.3e} exceeds ceiling {ceiling:.3e}")]
    NoisyFit { residual: f64, ceiling: f64 },
    #[error("invalid arc: {0}")]
    InvalidArc(String),
    #[error("invalid sample schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("arc leaves the wedge at y = {y}")]
    OutsideWedge { y: f64 },
    #[error("nash fiber over {ray} is unresolved: {reason}")]
    UnresolvedFiber { ray: String, reason: String },
    #[error("track lost after slice y = {last_y}")]
    TrackLost { last_y: f64 },
    #[error("slope changes sign inside the piece at y = {y}")]
    MixedSign { y: f64 },
    #[error("partition failed: {0}")]
    PartitionFailure(String),
    #[error("mesh refinement budget exceeded")]
    RefinementBudgetExceeded,
    #[error("mesh region does not connect the requested points")]
    Disconnected,
    #[error("arcs are degenerate (gap {gap:.3e}) at y = {y}")]
    DegenerateGap { y: f64, gap: f64 },
    #[error("slope changes sign on the region; rotation chart needs a monotone piece")]
    NotMonotone,
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("pieces do not cover the circle of directions: {0}")]
    IncompleteCover(String),
    #[error("beta value {0} is below 1")]
    BadBeta(String),
    #[error("spec file line {line}: {message}")]
    SpecFile { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, used as a short label in reports and tables.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::EvenRootIndex(_) => "EvenRootIndex",
            Error::NonIntegerExponent => "NonIntegerExponent",
            Error::ExponentTooLarge(_) => "ExponentTooLarge",
            Error::UndefinedPoint { .. } => "UndefinedPoint",
            Error::IndeterminateJet { .. } => "IndeterminateJet",
            Error::SignChange => "SignChange",
            Error::TooFewSamples(_) => "TooFewSamples",
            Error::NoisyFit { .. } => "NoisyFit",
            Error::InvalidArc(_) => "InvalidArc",
            Error::InvalidSchedule(_) => "InvalidSchedule",
            Error::InvalidSurface(_) => "InvalidSurface",
            Error::OutsideWedge { .. } => "OutsideWedge",
            Error::UnresolvedFiber { .. } => "UnresolvedFiber",
            Error::TrackLost { .. } => "TrackLost",
            Error::MixedSign { .. } => "MixedSign",
            Error::PartitionFailure(_) => "PartitionFailure",
            Error::RefinementBudgetExceeded => "RefinementBudgetExceeded",
            Error::Disconnected => "Disconnected",
            Error::DegenerateGap { .. } => "DegenerateGap",
            Error::NotMonotone => "NotMonotone",
            Error::HypothesisFailed(_) => "HypothesisFailed",
            Error::IncompleteCover(_) => "IncompleteCover",
            Error::BadBeta(_) => "BadBeta",
            Error::SpecFile { .. } => "SpecFile",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
