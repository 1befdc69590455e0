use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("broadside-singular geometry: APC and target share the same range coordinate")]
    SingularGeometry,

    #[error("target outside range gate: delay {delay_s:.9e} s not inside [{start_s:.9e}, {end_s:.9e}] s")]
    OutsideRangeGate { delay_s: f64, start_s: f64, end_s: f64 },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("trajectories do not share a time axis")]
    TimeAxisMismatch,

    #[error("grid violates Nyquist sampling: {0}")]
    Nyquist(String),

    #[error("already baseband")]
    AlreadyBaseband,

    #[error("ambiguity not eliminated")]
    AmbiguityNotEliminated,

    #[error("spectrum not aligned")]
    NotAligned,

    #[error("image already carries corrections; autofocus expects raw backprojection output")]
    NotRawImage,

    #[error("range dimension {len} is not divisible by factor {factor}")]
    NonDividingFactor { len: usize, factor: usize },

    #[error("insufficient scatterers: no range bin above the energy floor")]
    InsufficientScatterers,

    #[error("empty support mask at threshold {0} dB")]
    EmptySupport(f64),

    #[error("all-zero image")]
    ZeroImage,

    #[error("no dominant peak: peak is {0:.1} dB above the image median (needs 10 dB)")]
    NoDominantPeak(f64),

    #[error("k_y must be positive everywhere (found {0})")]
    NonPositiveKy(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
