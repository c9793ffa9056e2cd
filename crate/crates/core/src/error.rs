use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model parse error: {0}")]
    Parse(String),

    #[error("invalid channel {channel}: {message}")]
    InvalidChannel { channel: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown record `{0}`")]
    UnknownRecord(String),

    #[error("dimension mismatch: expected {expected}, got {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generator is not ergodic: stationary null space has dimension {null_dim}")]
    NonErgodic { null_dim: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("tilted rate overflow on channel {channel}: exponent {exponent:.3} exceeds 700, use a smaller counting field")]
    Overflow { channel: usize, exponent: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("channel {channel} has positive rate but no conjugate channel (reservoir `{reservoir}`, filter `{filter}`)")]
    UnpairedChannel {
        channel: usize,
        reservoir: String,
        filter: String,
    },

    #[error("simulation: {0}")]
    Simulation(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonErgodic { .. }
                | Error::Singular(_)
                | Error::Overflow { .. }
                | Error::Eigen(_)
                | Error::Simulation(_)
        )
    }
}
