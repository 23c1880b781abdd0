//! Golden-vector files for the slot hash.
//!
//! Plain text, `#` lines are comments. The header names the interleaver seed;
//! each record is `tag_id_hex frame_index slots_per_frame expected_slot`:
//!
//! ```text
//! # slot-hash golden vectors
//! # interleaver_seed 0x5EEDCAFEF00D0001
//! # columns: tag_id_hex frame_index slots_per_frame expected_slot
//! 0123456789abcdef0123456789abcdef 1 128 2
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hash::{SlotHasher, DEFAULT_INTERLEAVER_SEED, MAX_FRAME_INDEX};
use crate::model::{TagId, TagPopulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoldenVector {
    pub tag: TagId,
    pub frame_index: u32,
    pub slots_per_frame: u32,
    pub slot: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenFile {
    pub interleaver_seed: u64,
    pub vectors: Vec<GoldenVector>,
}

impl GoldenFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut vectors = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(hex) = comment.trim().strip_prefix("interleaver_seed") {
                    let hex = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
                    seed = Some(
                        u64::from_str_radix(hex, 16)
                            .map_err(|_| Error::Malformed(format!("line {}: bad seed", n + 1)))?,
                    );
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Malformed(format!("line {}: `{line}`", n + 1));
            let [tag, r, k, slot] = fields[..] else { return Err(bad()) };
            vectors.push(GoldenVector {
                tag: tag.parse()?,
                frame_index: r.parse().map_err(|_| bad())?,
                slots_per_frame: k.parse().map_err(|_| bad())?,
                slot: slot.parse().map_err(|_| bad())?,
            });
        }
        Ok(GoldenFile { interleaver_seed: seed.unwrap_or(DEFAULT_INTERLEAVER_SEED), vectors })
    }

    /// Canonical text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# slot-hash golden vectors\n");
        let _ = writeln!(out, "# interleaver_seed 0x{:016X}", self.interleaver_seed);
        out.push_str("# columns: tag_id_hex frame_index slots_per_frame expected_slot\n");
        for v in &self.vectors {
            let _ = writeln!(out, "{} {} {} {}", v.tag, v.frame_index, v.slots_per_frame, v.slot);
        }
        out
    }

    /// Recomputes every expected slot with this implementation.
    pub fn recompute(&self) -> Result<GoldenFile> {
        let hasher = SlotHasher::new(self.interleaver_seed);
        let vectors = self
            .vectors
            .iter()
            .map(|v| Ok(GoldenVector { slot: hasher.select_slot(v.tag, v.frame_index, v.slots_per_frame)?, ..*v }))
            .collect::<Result<_>>()?;
        Ok(GoldenFile { interleaver_seed: self.interleaver_seed, vectors })
    }

    /// Generates `count` vectors from random IDs, cycling through frame
    /// sizes and frame indices.
    pub fn generate(interleaver_seed: u64, count: usize, id_seed: u64) -> Result<Self> {
        const KS: [u32; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 1024, 65536];
        const FRAMES: [u32; 11] = [1, 2, 3, 5, 8, 13, 100, 255, 256, 4096, MAX_FRAME_INDEX];
        let ids = TagPopulation::generate(count.max(1), id_seed)?;
        let hasher = SlotHasher::new(interleaver_seed);
        let vectors = ids
            .tags()
            .iter()
            .take(count)
            .enumerate()
            .map(|(n, &tag)| {
                let (r, k) = (FRAMES[n % FRAMES.len()], KS[(n * 7) % KS.len()]);
                Ok(GoldenVector { tag, frame_index: r, slots_per_frame: k, slot: hasher.select_slot(tag, r, k)? })
            })
            .collect::<Result<_>>()?;
        Ok(GoldenFile { interleaver_seed, vectors })
    }
}

/// Outcome of checking a golden file against this implementation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub checked: usize,
    pub mismatches: Vec<(GoldenVector, u32)>,
    /// Re-rendering the recomputed vectors reproduces the input bytes.
    pub byte_identical: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.byte_identical
    }
}

pub fn verify(text: &str) -> Result<Verification> {
    let file = GoldenFile::parse(text)?;
    let recomputed = file.recompute()?;
    let mismatches = file
        .vectors
        .iter()
        .zip(&recomputed.vectors)
        .filter(|(a, b)| a.slot != b.slot)
        .map(|(a, b)| (*a, b.slot))
        .collect();
    Ok(Verification { checked: file.vectors.len(), mismatches, byte_identical: recomputed.render() == text })
}
