use thiserror::Error;

/// Which non-resonance hypothesis a pair of targets violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceKind {
    /// `k_i` and `k_j` coincide (within margin).
    EqualQuasimomenta,
    /// `k_i + k_j` is within margin of `pi`.
    SumIsPi,
    /// `k_i` itself is within margin of `pi/2`.
    HalfPi,
}

impl std::fmt::Display for ResonanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ResonanceKind::EqualQuasimomenta => "k_i = k_j",
            ResonanceKind::SumIsPi => "k_i + k_j = pi",
            ResonanceKind::HalfPi => "k_i = pi/2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },

    #[error("state became non-finite at x = {x}")]
    NonFiniteState { x: f64 },

    #[error("lambda = {lambda} lies in a spectral gap (|trace/2| - 1 = {excess:.3e})")]
    InGap { lambda: f64, excess: f64 },

    #[error("lambda = {lambda} is too close to a band edge (k = {k}, margin {margin})")]
    BandEdge { lambda: f64, k: f64, margin: f64 },

    #[error("monodromy eigenvector is ill-conditioned at lambda = {lambda}")]
    DegenerateEigenvector { lambda: f64 },

    #[error("band scan too coarse near lambda = {lambda}; reduce the scan step")]
    ScanTooCoarse { lambda: f64 },

    #[error("angle unwrapping jump of {jump:.3} rad at x = {x}; grid too coarse")]
    UnwrapJump { x: f64, jump: f64 },

    #[error("solution vector is zero at x = {x}")]
    ZeroSolution { x: f64 },

    #[error("targets {i} and {j} are resonant ({kind})")]
    ResonantPair { i: usize, j: usize, kind: ResonanceKind },

    #[error("envelope 2C/(a-b) = {ratio:.4} exceeds k = {k:.4}; increase a - b")]
    EnvelopeTooLarge { ratio: f64, k: f64 },

    #[error("piece of length {length} is too short for taper width {taper}")]
    PieceTooShort { length: f64, taper: f64 },

    #[error("a - b = {separation} is below the required separation {required}")]
    InsufficientSeparation { separation: f64, required: f64 },

    #[error("horizon x_max = {x_max} reached before every target received a piece")]
    HorizonTooShort { x_max: f64 },

    #[error("envelope h(x) = {h:.4} below required {required:.4} at x = {x}")]
    EnvelopeViolation { x: f64, h: f64, required: f64 },

    #[error("pieces overlap near x = {x}")]
    OverlapDetected { x: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("frequency a = {a} is within 1e-3 of 2*pi*Z")]
    ResonantFrequency { a: f64 },

    #[error("decay too slow: fitted slope {slope:.3} > {limit}")]
    DecayTooSlow { slope: f64, limit: f64 },

    #[error("stability violated: ratio {ratio:.4} at x = {x} (initial phase {phase:.4})")]
    StabilityViolated { ratio: f64, x: f64, phase: f64 },

    #[error("lower bound violated at x = {x}: R ratio {ratio:.6e} < bound {bound:.6e}")]
    BoundViolated { x: f64, ratio: f64, bound: f64 },

    #[error("inconclusive tail: only {cycles} complete cycles")]
    InconclusiveTail { cycles: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
