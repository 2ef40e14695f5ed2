use alloc::string::String;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("mode k = 0 is excluded (constant mode never bifurcates)")]
    ZeroMode,

    #[error("degenerate kinetics: Φ(ū,v̄)·h'(ū) = {0}")]
    DegenerateKinetics(f64),

    #[error(
        "supplied derivative {which} disagrees with finite differences at (u, v) = ({u}, {v})"
    )]
    DerivativeMismatch { which: &'static str, u: f64, v: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix (zero pivot in column {0})")]
    Singular(usize),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("no sign change of the linearization determinant in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("located root {found} disagrees with closed form {expected} (relative {rel:e})")]
    ClosedFormMismatch { found: f64, expected: f64, rel: f64 },

    #[error("simplicity condition fails: ū = j²k²D1D2(π/L)⁴ at j = {j}")]
    NotSimple { j: u32 },

    #[error("pitchfork coefficient is singular: {0}")]
    PitchforkSingular(String),

    #[error("only linear kinetics Φ = u, h = βu are supported here")]
    UnsupportedKinetics,

    #[error("time step {dt:e} violates the advection bound; use dt ≤ {suggested:e}")]
    StepRejected { dt: f64, suggested: f64 },

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("non-finite values encountered")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, Error>;
