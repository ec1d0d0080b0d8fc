use thiserror::Error;

/// Every failure the library can report.
///
/// Variant names double as the structured error names printed by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NotBalanced: N = {n} is not divisible by K = {k}")]
    NotBalanced { n: usize, k: usize },
    #[error("ProbabilityOutOfRange: {name} = {value} must lie strictly inside (0, 1)")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("DegenerateVariance: sigma = {sigma}")]
    DegenerateVariance { sigma: f64 },
    #[error("NoFeasibleSolution: {reason}")]
    NoFeasibleSolution { reason: String },
    #[error("InvalidK: {reason}")]
    InvalidK { reason: String },
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ConvergenceFailure: eigensolver did not converge")]
    ConvergenceFailure,
    #[error("DomainError: function undefined at {at}")]
    DomainError { at: f64 },
    #[error("BranchCut: m_sc is undefined on the real segment [-2, 2] (z = {re})")]
    BranchCut { re: f64 },
    #[error("SingularShift: z = {re}{im:+}i is within {distance:e} of the spectrum")]
    SingularShift { re: f64, im: f64, distance: f64 },
    #[error("GridTooCoarse: grid of {grid_n} intervals cannot resolve order {ell} (need >= 8 * ell)")]
    GridTooCoarse { grid_n: usize, ell: usize },
    #[error("POutOfRange: p = {p} must lie strictly inside (0, 1)")]
    POutOfRange { p: f64 },
    #[error("GammaOutOfRange: gamma = {gamma} {reason}")]
    GammaOutOfRange { gamma: f64, reason: &'static str },
    #[error("SeriesNotConverged: increments still above tolerance at order {l_max}")]
    SeriesNotConverged { l_max: usize },
    #[error("Tau2Zero: tau_2(f) = {tau2:e} vanishes")]
    Tau2Zero { tau2: f64 },
    #[error("LogDomain: x = {x} >= gamma + 1/gamma = {limit}")]
    LogDomain { x: f64, limit: f64 },
    #[error("KurtosisSingularity: |1 - 2p| = {gap:e} too small (p = {p})")]
    KurtosisSingularity { p: f64, gap: f64 },
    #[error(
        "DegenerateSpectrum: eigenvalue {eigenvalue} >= gamma + 1/gamma = {limit} \
         (StrongSignal: outlier regime, use PCA instead)"
    )]
    DegenerateSpectrum { eigenvalue: f64, limit: f64 },
    #[error("InvalidHypotheses: K1 = {k1} must be smaller than K2 = {k2}")]
    InvalidHypotheses { k1: usize, k2: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Format: {0}")]
    Format(String),
    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// Structured name of the variant, e.g. `"DegenerateSpectrum"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotBalanced { .. } => "NotBalanced",
            Error::ProbabilityOutOfRange { .. } => "ProbabilityOutOfRange",
            Error::DegenerateVariance { .. } => "DegenerateVariance",
            Error::NoFeasibleSolution { .. } => "NoFeasibleSolution",
            Error::InvalidK { .. } => "InvalidK",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ConvergenceFailure => "ConvergenceFailure",
            Error::DomainError { .. } => "DomainError",
            Error::BranchCut { .. } => "BranchCut",
            Error::SingularShift { .. } => "SingularShift",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::POutOfRange { .. } => "POutOfRange",
            Error::GammaOutOfRange { .. } => "GammaOutOfRange",
            Error::SeriesNotConverged { .. } => "SeriesNotConverged",
            Error::Tau2Zero { .. } => "Tau2Zero",
            Error::LogDomain { .. } => "LogDomain",
            Error::KurtosisSingularity { .. } => "KurtosisSingularity",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::InvalidHypotheses { .. } => "InvalidHypotheses",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
