use thiserror::Error;

pub type Result<T, E = QuditError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuditError {
    #[error("spin quantum number {0} is not a non-negative half-integer")]
    InvalidSpin(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown atom spec `{0}`")]
    UnknownSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "excited manifold resolvent is singular: minimum detuning {delta_min:.6e} rad/s \
         is within the floor {floor:.6e} rad/s"
    )]
    SingularExcitedManifold { delta_min: f64, floor: f64 },

    #[error("level tracking lost between {b_lo} G and {b_hi} G (overlap {overlap:.3})")]
    TrackingLost { b_lo: f64, b_hi: f64, overlap: f64 },

    #[error("ambiguous manifold assignment: {0}")]
    AmbiguousCharacter(String),

    #[error("magic-angle coefficients are degenerate (|δs^x − δs^z| = {0:.3e})")]
    DegenerateCoefficients(f64),

    #[error("phase profile gaps are not pairwise distinct and nonzero: {0}")]
    DistinctnessViolation(String),

    #[error("operating point is infeasible: {0}")]
    Infeasible(String),

    #[error("initial state is not normalized (norm {0:.6e})")]
    NotNormalized(f64),

    #[error("frequency fit failed: {0}")]
    FitFailed(String),

    #[error("empty input: {0}")]
    Empty(String),
}
