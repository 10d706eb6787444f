use alloc::boxed::Box;
use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown phantom `{0}` (valid names: two-bars, s-shaped, diagonal)")]
    UnknownPhantom(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("contrast map carries no permittivity/conductivity maps")]
    MissingMaterialMaps,
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("field point coincides with the line source")]
    SourceCoincident,
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    /// The state equation is factored once per frequency, so a singular
    /// system affects every view of that frequency.
    #[error("singular state equation at frequency index {freq} (views 0..{views})")]
    SingularSystem { freq: usize, views: usize },
    #[error("dataset already carries noise (snr = {0} dB)")]
    AlreadyNoisy(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("frequency {freq} Hz is not resolvable with dt = {dt} s (Nyquist {nyquist} Hz)")]
    Unresolvable { freq: f64, dt: f64, nyquist: f64 },
    #[error("radargram mismatch: {0}")]
    RadargramMismatch(String),
    #[error("region `{0}` contains no cells")]
    EmptyRegion(&'static str),
    #[error("sweep row ({strategy}, snr {snr_db} dB, seed {seed}): {source}")]
    SweepRow {
        strategy: &'static str,
        snr_db: f64,
        seed: u64,
        source: Box<Error>,
    },
    #[error("{strategy}: {source}")]
    Strategy {
        strategy: &'static str,
        source: Box<Error>,
    },
}
