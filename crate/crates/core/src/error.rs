use thiserror::Error;

/// Failure modes of the construction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate extremum at x = {x}: |V''| = {curvature:e} below threshold")]
    DegenerateExtremum { x: f64, curvature: f64 },

    #[error("energy {energy} is not above max V = {e_max}")]
    EnergyNotAboveMax { energy: f64, e_max: f64 },

    #[error("quadrature tolerance not met after {evaluations} evaluations (est. error {est_error:e})")]
    ToleranceNotMet { evaluations: usize, est_error: f64 },

    #[error("gauge P = {p} is not above the critical gauge {p_crit}")]
    GaugeNotSupercritical { p: f64, p_crit: f64 },

    #[error("dispersion root not bracketed in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("gamma = {0} is outside the open interval (0, 2π)")]
    GammaOutOfRange(f64),

    #[error("amplitude collapsed (A <= 0) at x = {x}")]
    AmplitudeCollapse { x: f64 },

    #[error("step budget exceeded: {steps} steps requested")]
    StepBudgetExceeded { steps: usize },

    #[error("return map has a fixed point on the circle |Z| = {r}")]
    RootOnCircle { r: f64 },

    #[error("no winding certificate: winding != 1 for every tested radius")]
    NoCertificate,

    #[error("Newton iteration for the fixed point did not converge (|G| = {residual:e})")]
    NewtonDiverged { residual: f64 },

    #[error("periodicity residual {residual:e} exceeds {limit:e}")]
    PeriodicityNotMet { residual: f64, limit: f64 },

    #[error("grid of {grid_size} points is too coarse, need at least {required}")]
    GridTooCoarse { grid_size: usize, required: usize },

    #[error("Fourier cutoff {0} exceeds the dense budget")]
    CutoffTooLarge(usize),

    #[error("assembled operator matrix is not Hermitian")]
    NonHermitianDetected,

    #[error("no Bloch candidate near E = {target}: every nearby eigenstate has a vanishing amplitude")]
    NoBlochCandidate { target: f64 },

    #[error("golden mismatch: {}", .0.join(", "))]
    GoldenMismatch(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BlochError {
    fn from(err: std::io::Error) -> Self {
        BlochError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for BlochError {
    fn from(err: serde_json::Error) -> Self {
        BlochError::Config(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BlochError>;
