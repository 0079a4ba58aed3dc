use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {key}: {reason}")]
    InvalidConfig { key: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("position ({x:.3}, {y:.3}) lies outside the service area")]
    OutOfBounds { x: f64, y: f64 },

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("Doppler shift {doppler_hz:.1} Hz is not small against the {scs_hz:.0} Hz subcarrier spacing")]
    DopplerTooLarge { doppler_hz: f64, scs_hz: f64 },

    #[error("pilot length {pilot_len} is shorter than the {users} users; pilot contamination is not modelled")]
    PilotContamination { pilot_len: usize, users: usize },

    #[error("channel has zero expected norm; precoder is undefined")]
    DegenerateChannel,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("GLRT is undefined: all sensing responses are zero")]
    UndefinedTest,

    #[error("sensing SNR is undefined: total response rank is zero")]
    UndefinedSnr,

    #[error("invalid false-alarm probability {0}")]
    InvalidPfa(f64),

    #[error("empty sample set")]
    EmptySamples,

    #[error("trial {trial} of sweep point `{sweep}`: {source}")]
    Trial {
        trial: usize,
        sweep: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(key: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key,
            reason: reason.into(),
        }
    }
}
