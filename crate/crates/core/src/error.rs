use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("slot depth {slot_depth_m} m severs a section of height {section_height_m} m")]
    SeveredSection {
        slot_depth_m: f64,
        section_height_m: f64,
    },

    #[error("degenerate kinematics: {0}")]
    DegenerateKinematics(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("timestamps not strictly increasing at line {line}")]
    Sequencing { line: u64 },

    #[error("trace too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("no impact detected: {0}")]
    NoImpact(String),

    #[error("force and kinematic clocks do not overlap")]
    Synchronization,

    #[error("campaign state corrupted: {0}")]
    StateCorruption(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("missing measurement: {0}")]
    MissingMeasurement(String),

    #[error("campaign not complete")]
    NotReady,

    #[error("height search exhausted: {0}")]
    SearchExhausted(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("target {target_n} N is at or below the functional floor of {floor_n} N")]
    InfeasibleTarget { target_n: f64, floor_n: f64 },

    #[error("integration unstable: {0}")]
    Stability(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
