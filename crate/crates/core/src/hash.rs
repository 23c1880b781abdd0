//! Deterministic slot selection.
//!
//! A tag's slot in frame `r` is derived from its 128-bit ID followed by `r`
//! as a 16-bit big-endian word. The 144-bit string is permuted by the
//! interleaver of frame `r`, run through CRC-16/CCITT-FALSE, and the
//! `log2 K` most significant CRC bits give the 0-based slot index.
//!
//! Every interleaver is a Fisher-Yates shuffle of the identity driven by a
//! 64-bit LCG (multiplier 6364136223846793005, increment 1442695040888963407).
//! For `i` from `n - 1` down to `1` the state is advanced first and then
//! `j = (state >> 32) % (i + 1)` is swapped with `i`. Permuted bit `i` is
//! input bit `permutation[i]`; bits are packed into bytes MSB-first.
//!
//! The LCG of frame `r` starts from `splitmix64(seed ^ r)`, where `seed` is
//! the configured interleaver seed. All tags share the interleaver of a
//! frame.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{splitmix64, TagId};

pub const ID_BITS: usize = 128;
pub const FRAME_INDEX_BITS: usize = 16;
pub const HASH_INPUT_BITS: usize = ID_BITS + FRAME_INDEX_BITS;
const HASH_INPUT_BYTES: usize = HASH_INPUT_BITS / 8;

pub const DEFAULT_INTERLEAVER_SEED: u64 = 0x5EED_CAFE_F00D_0001;
pub const MAX_FRAME_INDEX: u32 = u16::MAX as u32;

const LCG_MULTIPLIER: u64 = 6364136223846793005;
const LCG_INCREMENT: u64 = 1442695040888963407;

const CRC_POLY: u16 = 0x1021;
const CRC_INIT: u16 = 0xFFFF;

const CRC_TABLE: [u16; 256] = crc_table();

const fn crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut n = 0;
    while n < 256 {
        let mut reg = (n as u16) << 8;
        let mut b = 0;
        while b < 8 {
            reg = if reg & 0x8000 != 0 { (reg << 1) ^ CRC_POLY } else { reg << 1 };
            b += 1;
        }
        table[n] = reg;
        n += 1;
    }
    table
}

/// CRC-16/CCITT-FALSE over whole bytes.
pub fn crc16(data: &[u8]) -> u16 {
    data.iter().fold(CRC_INIT, |reg, &byte| (reg << 8) ^ CRC_TABLE[((reg >> 8) as u8 ^ byte) as usize])
}

/// CRC-16/CCITT-FALSE over an arbitrary bit sequence, one bit at a time.
pub fn crc16_bits(bits: &[bool]) -> u16 {
    bits.iter().fold(CRC_INIT, |reg, &bit| {
        let feedback = (reg & 0x8000 != 0) ^ bit;
        let reg = reg << 1;
        if feedback {
            reg ^ CRC_POLY
        } else {
            reg
        }
    })
}

/// A bit permutation shared by all tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    permutation: Vec<usize>,
}

impl Interleaver {
    pub fn build(length: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..length).collect();
        let mut state = seed;
        for i in (1..length).rev() {
            state = state.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT);
            let j = ((state >> 32) % (i as u64 + 1)) as usize;
            permutation.swap(i, j);
        }
        Interleaver { permutation }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        self.permutation.iter().all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
    }

    /// `out[i] = bits[permutation[i]]`.
    pub fn apply<T: Copy>(&self, bits: &[T]) -> Vec<T> {
        assert_eq!(bits.len(), self.permutation.len());
        self.permutation.iter().map(|&p| bits[p]).collect()
    }
}

/// LCG seed of the interleaver used in frame `frame_index`.
pub fn frame_interleaver_seed(seed: u64, frame_index: u32) -> u64 {
    splitmix64(seed ^ frame_index as u64)
}

/// 144 permuted bits: `hi` holds output bits 0..128, `lo` bits 128..144,
/// each MSB-first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Permuted {
    hi: u128,
    lo: u16,
}

impl Permuted {
    fn bit(position: usize) -> Permuted {
        if position < ID_BITS {
            Permuted { hi: 1u128 << (ID_BITS - 1 - position), lo: 0 }
        } else {
            Permuted { hi: 0, lo: 1u16 << (HASH_INPUT_BITS - 1 - position) }
        }
    }

    fn xor(self, other: Permuted) -> Permuted {
        Permuted { hi: self.hi ^ other.hi, lo: self.lo ^ other.lo }
    }

    fn crc(self) -> u16 {
        let mut bytes = [0u8; HASH_INPUT_BYTES];
        bytes[..16].copy_from_slice(&self.hi.to_be_bytes());
        bytes[16..].copy_from_slice(&self.lo.to_be_bytes());
        crc16(&bytes)
    }
}

/// One frame's interleaver and the permuted image of every input bit.
#[derive(Clone, Debug)]
struct FrameMap {
    interleaver: Interleaver,
    // image[b]: output position of input bit b, as a one-hot word
    image: [Permuted; HASH_INPUT_BITS],
    // permuted frame-index bits of this frame
    frame_part: Permuted,
}

impl FrameMap {
    fn build(seed: u64, frame: u16) -> Self {
        let interleaver = Interleaver::build(HASH_INPUT_BITS, frame_interleaver_seed(seed, frame as u32));
        let mut image = [Permuted::default(); HASH_INPUT_BITS];
        for (out, &src) in interleaver.permutation().iter().enumerate() {
            image[src] = Permuted::bit(out);
        }
        let frame_part = (0..FRAME_INDEX_BITS)
            .filter(|n| (frame >> (FRAME_INDEX_BITS - 1 - n)) & 1 == 1)
            .fold(Permuted::default(), |acc, n| acc.xor(image[ID_BITS + n]));
        FrameMap { interleaver, image, frame_part }
    }

    fn hash(&self, tag: TagId) -> u16 {
        let mut acc = self.frame_part;
        let mut rest = tag.0;
        while rest != 0 {
            let lead = rest.leading_zeros() as usize;
            acc = acc.xor(self.image[lead]);
            rest &= !(1u128 << (ID_BITS - 1 - lead));
        }
        acc.crc()
    }
}

/// The slot-selection function `h(tag, frame)`. Per-frame interleavers are
/// built on first use and cached.
#[derive(Clone, Debug)]
pub struct SlotHasher {
    seed: u64,
    frames: Vec<OnceLock<Box<FrameMap>>>,
}

impl SlotHasher {
    pub fn new(seed: u64) -> Self {
        SlotHasher { seed, frames: (0..MAX_FRAME_INDEX).map(|_| OnceLock::new()).collect() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn frame_map(&self, frame: u16) -> &FrameMap {
        self.frames[frame as usize - 1].get_or_init(|| Box::new(FrameMap::build(self.seed, frame)))
    }

    /// Interleaver applied in frame `frame_index`.
    pub fn interleaver(&self, frame_index: u32) -> Result<&Interleaver> {
        Ok(&self.frame_map(check_frame(frame_index)?).interleaver)
    }

    /// Raw 16-bit hash for `(tag, frame)`.
    pub fn hash(&self, tag: TagId, frame_index: u32) -> Result<u16> {
        Ok(self.frame_map(check_frame(frame_index)?).hash(tag))
    }

    /// 0-based slot in `[0, slots_per_frame)` chosen by `tag` in frame `frame_index`.
    pub fn select_slot(&self, tag: TagId, frame_index: u32, slots_per_frame: u32) -> Result<u32> {
        let width = slot_bits(slots_per_frame)?;
        Ok(truncate(self.hash(tag, frame_index)?, width))
    }

    /// Slot list for frames `1..=horizon`.
    pub fn precompute_schedule(&self, tag: TagId, slots_per_frame: u32, horizon: u32) -> Result<SlotSchedule> {
        let mut schedule = SlotSchedule::empty(tag, slots_per_frame)?;
        schedule.extend_to(self, horizon)?;
        Ok(schedule)
    }
}

/// A tag's pre-computed slot positions. Entry `r - 1` is the slot for frame `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotSchedule {
    tag: TagId,
    slots_per_frame: u32,
    slots: Vec<u32>,
}

impl SlotSchedule {
    pub fn empty(tag: TagId, slots_per_frame: u32) -> Result<Self> {
        slot_bits(slots_per_frame)?;
        Ok(SlotSchedule { tag, slots_per_frame, slots: Vec::new() })
    }

    /// Grows the schedule so that it covers frames `1..=horizon`.
    pub fn extend_to(&mut self, hasher: &SlotHasher, horizon: u32) -> Result<()> {
        if horizon > MAX_FRAME_INDEX {
            return Err(Error::FrameIndexOutOfRange(horizon));
        }
        let width = slot_bits(self.slots_per_frame)?;
        for r in self.slots.len() as u32 + 1..=horizon {
            self.slots.push(truncate(hasher.frame_map(r as u16).hash(self.tag), width));
        }
        Ok(())
    }

    pub fn tag(&self) -> TagId {
        self.tag
    }

    pub fn horizon(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    /// Slot for 1-based frame `r`, if within the computed horizon.
    pub fn slot(&self, r: u32) -> Option<u32> {
        r.checked_sub(1).and_then(|i| self.slots.get(i as usize)).copied()
    }
}

fn check_frame(frame_index: u32) -> Result<u16> {
    match frame_index {
        1..=MAX_FRAME_INDEX => Ok(frame_index as u16),
        _ => Err(Error::FrameIndexOutOfRange(frame_index)),
    }
}

fn slot_bits(slots_per_frame: u32) -> Result<u32> {
    if slots_per_frame.is_power_of_two() && (2..=1 << 16).contains(&slots_per_frame) {
        Ok(slots_per_frame.trailing_zeros())
    } else {
        Err(Error::InvalidSlotsPerFrame(slots_per_frame))
    }
}

fn truncate(crc: u16, width: u32) -> u32 {
    (crc as u32) >> (16 - width)
}
