//! Protocol and experiment configuration, loadable from flat TOML files.
//!
//! ```toml
//! K = 128                 # slots per frame, power of two
//! gamma = 2.0             # capture SINR threshold, linear
//! beta = 0.0              # fraction of a cancelled component left behind
//! channel = "rician"      # "rayleigh" | "rician"
//! k_factor_db = 3.0       # Rician K-factor
//! snr_db = 20.0           # mean per-tag SNR
//! fading = "per-frame"    # "per-frame" | "per-cycle"
//! max_frames = 200        # optional; default 10 * ceil(I / K) + 50
//! interleaver_seed = "0x5EEDCAFEF00D0001"
//! ```
//!
//! An experiment file holds the same keys plus `I_values`, `replications`,
//! `modes`, `channels`, `base_seed` and optionally `out_dir`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelKind, ChannelModel, Fading};
use crate::error::{ConfigViolation, Error, Result};
use crate::hash::{DEFAULT_INTERLEAVER_SEED, MAX_FRAME_INDEX};
use crate::model::ReceiverMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    #[serde(rename = "K", alias = "slots_per_frame")]
    pub slots_per_frame: u32,
    pub gamma: f64,
    pub beta: f64,
    pub channel: ChannelKind,
    pub k_factor_db: f64,
    pub snr_db: f64,
    pub fading: Fading,
    pub max_frames: Option<u32>,
    #[serde(serialize_with = "hex_u64", deserialize_with = "flexible_u64")]
    pub interleaver_seed: u64,
}

const PROTOCOL_KEYS: &[&str] = &[
    "K",
    "slots_per_frame",
    "gamma",
    "beta",
    "channel",
    "k_factor_db",
    "snr_db",
    "fading",
    "max_frames",
    "interleaver_seed",
];

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            slots_per_frame: 128,
            gamma: 2.0,
            beta: 0.0,
            channel: ChannelKind::Rician,
            k_factor_db: 3.0,
            snr_db: 20.0,
            fading: Fading::PerFrame,
            max_frames: None,
            interleaver_seed: DEFAULT_INTERLEAVER_SEED,
        }
    }
}

impl ProtocolConfig {
    /// Checks every invariant and names each one that fails.
    pub fn validate(&self) -> std::result::Result<(), Vec<ConfigViolation>> {
        let mut errors = Vec::new();
        let k = self.slots_per_frame;
        if !k.is_power_of_two() {
            errors.push(ConfigViolation::SlotsNotPowerOfTwo(k));
        } else if !(2..=1 << 16).contains(&k) {
            errors.push(ConfigViolation::SlotsOutOfRange(k));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            errors.push(ConfigViolation::GammaNotPositive(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            errors.push(ConfigViolation::BetaOutOfRange(self.beta));
        }
        if !self.snr_db.is_finite() {
            errors.push(ConfigViolation::SnrNotFinite(self.snr_db));
        }
        if !self.k_factor_db.is_finite() {
            errors.push(ConfigViolation::KFactorNotFinite(self.k_factor_db));
        }
        match self.max_frames {
            Some(0) => errors.push(ConfigViolation::MaxFramesZero),
            Some(m) if m > MAX_FRAME_INDEX => errors.push(ConfigViolation::MaxFramesBeyondHorizon(m)),
            _ => {}
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidConfig)
    }

    /// Frame cap for a population of `population` tags.
    pub fn max_frames_for(&self, population: usize) -> u32 {
        self.max_frames.unwrap_or_else(|| {
            let k = self.slots_per_frame.max(1) as usize;
            (10 * population.div_ceil(k) + 50).min(MAX_FRAME_INDEX as usize) as u32
        })
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel::new(self.channel, self.k_factor_db, self.snr_db)
    }

    /// Noise power; the whole model is normalised to unit noise.
    pub fn noise_power(&self) -> f64 {
        1.0
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        reject_unknown(&table, PROTOCOL_KEYS)?;
        let cfg: ProtocolConfig = table.try_into()?;
        cfg.ensure_valid()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// A sweep over population sizes, receivers and channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub config: ProtocolConfig,
    #[serde(rename = "I_values", alias = "populations")]
    pub populations: Vec<usize>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "all_modes")]
    pub modes: Vec<ReceiverMode>,
    /// Channels to sweep; empty means the config's `channel`.
    #[serde(default)]
    pub channels: Vec<ChannelKind>,
    #[serde(default, serialize_with = "hex_u64", deserialize_with = "flexible_u64")]
    pub base_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

const EXPERIMENT_KEYS: &[&str] =
    &["I_values", "populations", "replications", "modes", "channels", "base_seed", "out_dir"];

fn one() -> usize {
    1
}

fn all_modes() -> Vec<ReceiverMode> {
    ReceiverMode::ALL.to_vec()
}

impl ExperimentSpec {
    pub fn new(config: ProtocolConfig, populations: Vec<usize>, replications: usize) -> Self {
        ExperimentSpec {
            config,
            populations,
            replications,
            modes: all_modes(),
            channels: Vec::new(),
            base_seed: 0,
            out_dir: None,
        }
    }

    /// Channels actually swept, deduplicated in a stable order.
    pub fn effective_channels(&self) -> Vec<ChannelKind> {
        if self.channels.is_empty() {
            vec![self.config.channel]
        } else {
            self.channels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.config.ensure_valid()?;
        if self.populations.is_empty() || self.populations.contains(&0) {
            return Err(Error::Malformed("I_values must be a nonempty list of positive sizes".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Malformed("modes must not be empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Malformed("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        let known: Vec<&str> = PROTOCOL_KEYS.iter().chain(EXPERIMENT_KEYS).copied().collect();
        reject_unknown(&table, &known)?;
        let spec: ExperimentSpec = table.try_into()?;
        spec.ensure_valid()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn reject_unknown(table: &toml::Table, known: &[&str]) -> Result<()> {
    match table.keys().find(|k| !known.contains(&k.as_str())) {
        Some(key) => Err(Error::Malformed(format!("unknown config key `{key}`"))),
        None => Ok(()),
    }
}

fn hex_u64<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("0x{v:016X}"))
}

/// Accepts a non-negative integer or a decimal / `0x`-prefixed string.
fn flexible_u64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    struct V;

    impl Visitor<'_> for V {
        type Value = u64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a 64-bit unsigned integer or hex string")
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<u64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<u64, E> {
            u64::try_from(v).map_err(|_| E::custom("negative seed"))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<u64, E> {
            let t = v.trim().replace('_', "");
            let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => t.parse(),
            };
            parsed.map_err(|_| E::custom(format!("invalid seed `{v}`")))
        }
    }

    d.deserialize_any(V)
}
