//! Domain types shared across the simulator.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A 128-bit tag identifier, the message each tag transmits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TagId(pub u128);

impl TagId {
    pub const BITS: usize = 128;

    /// Bit `n` counted from the most significant end.
    pub fn bit(self, n: usize) -> bool {
        debug_assert!(n < Self::BITS);
        (self.0 >> (Self::BITS - 1 - n)) & 1 == 1
    }

    pub fn to_be_bytes(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }
}

impl fmt::Debug for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagId({:032x})", self.0)
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for TagId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches("0x");
        if s.is_empty() || s.len() > 32 {
            return Err(Error::Malformed(format!("tag id `{s}`")));
        }
        u128::from_str_radix(s, 16).map(TagId).map_err(|_| Error::Malformed(format!("tag id `{s}`")))
    }
}

impl Serialize for TagId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The set of tags taking part in one reading cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagPopulation {
    tags: Vec<TagId>,
}

impl TagPopulation {
    /// Draws `size` distinct uniformly random IDs. Collisions are re-drawn.
    pub fn generate(size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyPopulation);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(size);
        let mut tags = Vec::with_capacity(size);
        while tags.len() < size {
            let id = TagId(rng.random::<u128>());
            if seen.insert(id) {
                tags.push(id);
            }
        }
        Ok(TagPopulation { tags })
    }

    /// Wraps an explicit ID list; rejects empty or duplicated lists.
    pub fn from_ids(tags: Vec<TagId>) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let distinct: HashSet<_> = tags.iter().collect();
        if distinct.len() != tags.len() {
            return Err(Error::Malformed("duplicate tag id in population".into()));
        }
        Ok(TagPopulation { tags })
    }

    pub fn tags(&self) -> &[TagId] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Receiver structure used to decode the transmission frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverMode {
    Capture,
    Sic,
    Isic,
}

impl ReceiverMode {
    pub const ALL: [ReceiverMode; 3] = [ReceiverMode::Capture, ReceiverMode::Sic, ReceiverMode::Isic];

    pub fn as_str(self) -> &'static str {
        match self {
            ReceiverMode::Capture => "capture",
            ReceiverMode::Sic => "sic",
            ReceiverMode::Isic => "isic",
        }
    }
}

impl fmt::Display for ReceiverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "capture" => Ok(ReceiverMode::Capture),
            "sic" => Ok(ReceiverMode::Sic),
            "isic" => Ok(ReceiverMode::Isic),
            other => Err(Error::Malformed(format!("receiver mode `{other}`"))),
        }
    }
}

/// One tag's contribution to a slot: its ID and received power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub tag: TagId,
    pub power: f64,
}

/// The received superposition in one slot, in the power domain.
///
/// Components are kept ordered strongest first, equal powers by ascending
/// tag ID, so the head is always the next SIC candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotState {
    components: Vec<Component>,
    pub residual_power: f64,
    pub noise_power: f64,
}

impl SlotState {
    pub fn new(noise_power: f64) -> Self {
        SlotState { components: Vec::new(), residual_power: 0.0, noise_power }
    }

    /// Builds a slot from `(tag, power)` pairs with the given noise floor.
    pub fn with_components<I>(noise_power: f64, components: I) -> Self
    where
        I: IntoIterator<Item = (TagId, f64)>,
    {
        let mut slot = SlotState::new(noise_power);
        for (tag, power) in components {
            slot.add(tag, power);
        }
        slot
    }

    /// Adds a component. A tag already present is left untouched.
    pub fn add(&mut self, tag: TagId, power: f64) {
        debug_assert!(power >= 0.0);
        if self.contains(tag) {
            return;
        }
        let pos = self.components.partition_point(|c| stronger_first(c, &Component { tag, power }).is_lt());
        self.components.insert(pos, Component { tag, power });
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn contains(&self, tag: TagId) -> bool {
        self.components.iter().any(|c| c.tag == tag)
    }

    pub fn power_of(&self, tag: TagId) -> Option<f64> {
        self.components.iter().find(|c| c.tag == tag).map(|c| c.power)
    }

    /// Removes `tag`, leaving `beta` times its power behind as residual
    /// interference. Returns the removed power, or `None` if absent.
    pub fn cancel(&mut self, tag: TagId, beta: f64) -> Option<f64> {
        let pos = self.components.iter().position(|c| c.tag == tag)?;
        let c = self.components.remove(pos);
        self.residual_power += beta * c.power;
        Some(c.power)
    }

    /// Sum of all component powers except the one at `skip`, in stored order.
    pub(crate) fn interference_excluding(&self, skip: usize) -> f64 {
        self.components.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, c)| c.power).sum::<f64>()
            + self.residual_power
            + self.noise_power
    }
}

fn stronger_first(a: &Component, b: &Component) -> std::cmp::Ordering {
    b.power.total_cmp(&a.power).then(a.tag.cmp(&b.tag))
}

/// One transmission frame as retained by the reader; a node of the ISIC graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// 1-based frame index within the cycle.
    pub index: u32,
    pub slots: Vec<SlotState>,
    /// Tags decoded from this frame's slots.
    pub decoded_here: BTreeSet<TagId>,
    /// Tags removed from this frame by inter-frame cancellation, in order.
    pub cancelled_here: Vec<TagId>,
}

impl FrameRecord {
    pub fn new(index: u32, slots_per_frame: usize, noise_power: f64) -> Self {
        FrameRecord {
            index,
            slots: vec![SlotState::new(noise_power); slots_per_frame],
            decoded_here: BTreeSet::new(),
            cancelled_here: Vec::new(),
        }
    }

    /// Whether `tag` has already been taken out of this frame, either by
    /// decoding or by cancellation.
    pub fn is_resolved(&self, tag: TagId) -> bool {
        self.decoded_here.contains(&tag) || self.cancelled_here.contains(&tag)
    }

    /// Every tag that transmitted in this frame and still has a component.
    pub fn pending_tags(&self) -> impl Iterator<Item = TagId> + '_ {
        self.slots.iter().flat_map(|s| s.components().iter().map(|c| c.tag))
    }
}

/// How a tag was first decoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Strongest signal of its slot, decoded without any prior cancellation.
    Capture,
    /// Decoded within its slot after cancelling stronger signals of the same slot.
    IntraSic,
    /// Decoded after cancelling signals recovered in other frames.
    Isic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeEvent {
    pub tag: TagId,
    /// Frame after whose transmission the tag was decoded and acknowledged.
    pub decoded_in: u32,
    /// Frame whose slot actually yielded the decode.
    pub transmitted_in: u32,
    pub mechanism: Mechanism,
}

/// Outcome of one reading cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    /// Frames used; equals the frame cap when the cycle is incomplete.
    pub frames: u32,
    pub complete: bool,
    /// Unacknowledged tags after each frame's acknowledgment.
    pub residual_trace: Vec<u32>,
    /// Number of IDs listed in each acknowledgment frame.
    pub ack_sizes: Vec<u32>,
    pub decode_log: Vec<DecodeEvent>,
    pub seed: u64,
}

/// Folds a list of words into one well-mixed 64-bit seed (splitmix64 finaliser).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
