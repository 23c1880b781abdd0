use std::fmt;

use thiserror::Error;

use crate::model::TagId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("population size must be at least 1")]
    EmptyPopulation,

    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("slots per frame {0} is not a power of two in [2, 65536]")]
    InvalidSlotsPerFrame(u32),

    #[error("frame index {0} outside the 16-bit schedule horizon [1, 65535]")]
    FrameIndexOutOfRange(u32),

    #[error("schedule mismatch: tag {tag} has no component in frame {frame}, slot {slot}")]
    ScheduleMismatch { tag: TagId, frame: u32, slot: u32 },

    #[error("inter-frame SIC exceeded {limit} iterations")]
    NonTermination { limit: usize },

    #[error("no complete cycles among {0} samples")]
    NoCompleteCycles(usize),

    #[error("empty sample set")]
    EmptySamples,

    #[error("percentile level {0} outside (0, 1)")]
    InvalidQuantile(f64),

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single violated [`ProtocolConfig`](crate::ProtocolConfig) invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    SlotsNotPowerOfTwo(u32),
    SlotsOutOfRange(u32),
    GammaNotPositive(f64),
    BetaOutOfRange(f64),
    SnrNotFinite(f64),
    KFactorNotFinite(f64),
    MaxFramesZero,
    MaxFramesBeyondHorizon(u32),
}

impl ConfigViolation {
    /// Name of the offending config field.
    pub fn field(&self) -> &'static str {
        match self {
            Self::SlotsNotPowerOfTwo(_) | Self::SlotsOutOfRange(_) => "K",
            Self::GammaNotPositive(_) => "gamma",
            Self::BetaOutOfRange(_) => "beta",
            Self::SnrNotFinite(_) => "snr_db",
            Self::KFactorNotFinite(_) => "k_factor_db",
            Self::MaxFramesZero | Self::MaxFramesBeyondHorizon(_) => "max_frames",
        }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SlotsNotPowerOfTwo(k) => write!(f, "K not a power of two ({k})"),
            Self::SlotsOutOfRange(k) => write!(f, "K out of [2, 65536] ({k})"),
            Self::GammaNotPositive(g) => write!(f, "gamma not positive ({g})"),
            Self::BetaOutOfRange(b) => write!(f, "beta out of [0,1] ({b})"),
            Self::SnrNotFinite(s) => write!(f, "snr_db not finite ({s})"),
            Self::KFactorNotFinite(k) => write!(f, "k_factor_db not finite ({k})"),
            Self::MaxFramesZero => write!(f, "max_frames must be at least 1"),
            Self::MaxFramesBeyondHorizon(m) => {
                write!(f, "max_frames exceeds the 16-bit frame counter ({m})")
            }
        }
    }
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}
