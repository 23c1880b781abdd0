//! Block-fading power gains for Rayleigh and Rician channels.
//!
//! Only the received power `|g|^2` is produced, since the receiver operates
//! in the power domain. Noise is normalised to unit power, so the mean
//! received power equals the linear SNR.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Rayleigh,
    Rician,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Rician => "rician",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            "rician" | "rice" => Ok(ChannelKind::Rician),
            other => Err(Error::Malformed(format!("channel kind `{other}`"))),
        }
    }
}

/// Whether a tag sees a fresh fade in every frame or one fade for the whole cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    #[default]
    PerFrame,
    PerCycle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// Line-of-sight to scattered power ratio in dB; ignored for Rayleigh.
    pub k_factor_db: f64,
    pub mean_power: f64,
}

/// One fading realisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainDraw {
    pub power: f64,
}

impl ChannelModel {
    pub fn new(kind: ChannelKind, k_factor_db: f64, snr_db: f64) -> Self {
        ChannelModel { kind, k_factor_db, mean_power: 10f64.powf(snr_db / 10.0) }
    }

    pub fn rayleigh(mean_power: f64) -> Self {
        ChannelModel { kind: ChannelKind::Rayleigh, k_factor_db: 0.0, mean_power }
    }

    pub fn rician(k_factor_db: f64, mean_power: f64) -> Self {
        ChannelModel { kind: ChannelKind::Rician, k_factor_db, mean_power }
    }

    pub fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> GainDraw {
        let power = match self.kind {
            ChannelKind::Rayleigh => {
                let e: f64 = Exp1.sample(rng);
                self.mean_power * e
            }
            ChannelKind::Rician => {
                let k = 10f64.powf(self.k_factor_db / 10.0);
                let los = (k / (k + 1.0) * self.mean_power).sqrt();
                let theta = rng.random::<f64>() * TAU;
                // CN(0, mean/(K+1)): each quadrature carries half the variance
                let sigma = (self.mean_power / (k + 1.0) / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let i = los * theta.cos() + sigma * re;
                let q = los * theta.sin() + sigma * im;
                i * i + q * q
            }
        };
        GainDraw { power }
    }
}

/// Received power of a tag's transmission in a frame.
pub trait GainSource {
    fn power(&self, tag_index: usize, frame_index: u32) -> f64;
}

/// Gains drawn from an independent stream per `(cycle seed, tag, frame)`,
/// so any receiver replaying the same cycle sees the same fades.
#[derive(Clone, Debug)]
pub struct KeyedGains {
    model: ChannelModel,
    seed: u64,
    fading: Fading,
}

impl KeyedGains {
    pub fn new(model: ChannelModel, seed: u64, fading: Fading) -> Self {
        KeyedGains { model, seed, fading }
    }
}

impl GainSource for KeyedGains {
    fn power(&self, tag_index: usize, frame_index: u32) -> f64 {
        let frame = match self.fading {
            Fading::PerFrame => frame_index,
            Fading::PerCycle => 0,
        };
        let key = derive_seed(&[self.seed, tag_index as u64, frame as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        self.model.draw_gain(&mut rng).power
    }
}

/// The same power for every transmission.
#[derive(Clone, Copy, Debug)]
pub struct ConstantGain(pub f64);

impl GainSource for ConstantGain {
    fn power(&self, _tag_index: usize, _frame_index: u32) -> f64 {
        self.0
    }
}

impl<F: Fn(usize, u32) -> f64> GainSource for F {
    fn power(&self, tag_index: usize, frame_index: u32) -> f64 {
        self(tag_index, frame_index)
    }
}
