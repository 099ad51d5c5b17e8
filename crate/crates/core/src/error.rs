use thiserror::Error;

/// Errors produced by state construction, QFI evaluation and optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state vector has zero norm")]
    ZeroNorm,

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("block structures do not match: {0}")]
    StructureMismatch(String),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("mixture weights must be nonnegative and sum to 1 (sum = {0})")]
    WeightNormalization(f64),

    #[error("extrapolation fit needs at least 3 points, got {0}")]
    TooFewFitPoints(usize),

    #[error("degenerate design matrix in extrapolation fit")]
    DegenerateFit,

    #[error("fit point (n = {n}, delta_phi = {delta_phi}) lies below the mean-photon bound transform")]
    FitPointBelowBound { n: u32, delta_phi: f64 },

    #[error("photon number {0} below the direct cap must be an integer")]
    NonIntegerPhotonNumber(f64),

    #[error("extrapolation fit was built for eta = {fit_eta}, requested eta = {requested}")]
    FitEtaMismatch { fit_eta: f64, requested: f64 },
}
