//! Exhaustive inter-frame successive interference cancellation.
//!
//! Every stored frame is a node on a chain `1 - 2 - ... - r̄`. Once a tag is
//! decoded anywhere, its slot in every other frame is known through the
//! slot hash, so its component can be cancelled there and the slot
//! re-decoded. The engine sweeps backward from `r̄` to `1` and forward from
//! `1` to `r̄`, carrying the set of detected-but-not-yet-cancelled tags as
//! messages, and repeats the sweep pair while the previous one produced any
//! new detection.
//!
//! Message rules, with `τ` the sweep index and `D_r` the tags newly decoded
//! at node `r`:
//!
//! ```text
//! B(r→r-1, τ) = D_r ∪ B(r+1→r, τ) ∪ [F(r→r+1, τ-1) \ (F(r-1→r, τ-1) ∪ B(r→r-1, τ-1))]
//! F(r→r+1, τ) = D_r ∪ F(r-1→r, τ) ∪ [B(r→r-1, τ)   \ (B(r+1→r, τ)   ∪ F(r→r+1, τ-1))]
//! ```
//!
//! The bracketed terms hand over tags that arrived from the opposite
//! direction without re-sending what the neighbour already has.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::hash::SlotHasher;
use crate::model::{FrameRecord, TagId};
use crate::receiver::sic_in_place;

/// Reader-side knowledge of where a tag transmitted in a given frame.
pub trait SlotLookup {
    fn slot_of(&self, tag: TagId, frame_index: u32) -> Result<u32>;
}

/// Reconstructs slot positions from the shared slot hash.
#[derive(Clone, Copy, Debug)]
pub struct HashedSlots<'a> {
    pub hasher: &'a SlotHasher,
    pub slots_per_frame: u32,
}

impl SlotLookup for HashedSlots<'_> {
    fn slot_of(&self, tag: TagId, frame_index: u32) -> Result<u32> {
        self.hasher.select_slot(tag, frame_index, self.slots_per_frame)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Backward,
    Forward,
}

/// Tags passed between neighbouring frame nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsicMessage {
    pub direction: Direction,
    pub from: u32,
    pub to: u32,
    pub content: BTreeSet<TagId>,
}

impl IsicMessage {
    pub fn backward(from: u32, content: BTreeSet<TagId>) -> Self {
        IsicMessage { direction: Direction::Backward, from, to: from - 1, content }
    }

    pub fn forward(from: u32, content: BTreeSet<TagId>) -> Self {
        IsicMessage { direction: Direction::Forward, from, to: from + 1, content }
    }

    fn empty(direction: Direction, from: u32) -> Self {
        let to = match direction {
            Direction::Backward => from.saturating_sub(1),
            Direction::Forward => from + 1,
        };
        IsicMessage { direction, from, to, content: BTreeSet::new() }
    }
}

/// Detection record emitted for tracing: sweep, direction, node, tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub tau: u32,
    pub direction: Direction,
    pub frame: u32,
    pub tag: TagId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IsicOutcome {
    /// Tags newly decoded during the invocation, with the frame that yielded
    /// them, in detection order. Includes the seed detections.
    pub detections: Vec<(TagId, u32)>,
    /// Number of completed sweep pairs.
    pub iterations: u32,
    /// Message entries that reached a node where the tag was already gone.
    pub redundant_deliveries: u64,
}

impl IsicOutcome {
    pub fn decoded(&self) -> BTreeSet<TagId> {
        self.detections.iter().map(|&(t, _)| t).collect()
    }
}

/// Decoder parameters shared by every node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeParams {
    pub gamma: f64,
    pub beta: f64,
}

/// One node update: cancel every incoming tag still present in `frame`,
/// re-run SIC on the slots that changed, and return the tags decoded here
/// for the first time anywhere.
pub fn isic_node(
    frame: &mut FrameRecord,
    incoming: &IsicMessage,
    lookup: &impl SlotLookup,
    params: DecodeParams,
    decoded_anywhere: &HashSet<TagId>,
) -> Result<BTreeSet<TagId>> {
    let mut redundant = 0;
    node_update(frame, &incoming.content, lookup, params, decoded_anywhere, &mut redundant)
}

fn node_update(
    frame: &mut FrameRecord,
    incoming: &BTreeSet<TagId>,
    lookup: &impl SlotLookup,
    params: DecodeParams,
    decoded_anywhere: &HashSet<TagId>,
    redundant: &mut u64,
) -> Result<BTreeSet<TagId>> {
    let mut touched = BTreeSet::new();
    for &tag in incoming {
        if frame.is_resolved(tag) {
            *redundant += 1;
            continue;
        }
        let slot = lookup.slot_of(tag, frame.index)?;
        let present = frame.slots.get_mut(slot as usize).and_then(|s| s.cancel(tag, params.beta)).is_some();
        if !present {
            return Err(Error::ScheduleMismatch { tag, frame: frame.index, slot });
        }
        frame.cancelled_here.push(tag);
        touched.insert(slot as usize);
    }

    let mut fresh = BTreeSet::new();
    for slot in touched {
        for tag in sic_in_place(&mut frame.slots[slot], params.gamma, params.beta) {
            frame.decoded_here.insert(tag);
            if !decoded_anywhere.contains(&tag) {
                fresh.insert(tag);
            }
        }
    }
    Ok(fresh)
}

/// Runs the exhaustive backward/forward message passing over `frames`
/// (`frames[r - 1]` is frame `r`, the last one is the current frame `r̄`).
///
/// `initial` holds the tags intra-frame SIC just decoded in frame `r̄`.
/// `decoded_anywhere` must contain every tag decoded before this call plus
/// `initial`; it is updated with the new detections. `population` bounds the
/// number of sweeps.
pub fn exhaustive_isic(
    frames: &mut [FrameRecord],
    initial: &BTreeSet<TagId>,
    decoded_anywhere: &mut HashSet<TagId>,
    lookup: &impl SlotLookup,
    params: DecodeParams,
    population: usize,
    mut trace: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<IsicOutcome> {
    let rbar = frames.len();
    let mut outcome =
        IsicOutcome { detections: initial.iter().map(|&t| (t, rbar as u32)).collect(), ..Default::default() };
    decoded_anywhere.extend(initial.iter().copied());
    if initial.is_empty() || rbar < 2 {
        return Ok(outcome);
    }

    let r_top = rbar as u32;
    // backward[r] = B(r→r-1), forward[r] = F(r→r+1); index 0 unused
    let blank = |dir| (0..=r_top).map(|r| IsicMessage::empty(dir, r)).collect::<Vec<_>>();
    let mut prev_backward = blank(Direction::Backward);
    let mut prev_forward = blank(Direction::Forward);
    let mut seed = initial.clone();
    let mut pending = initial.len();
    let mut tau: u32 = 1;

    while pending > 0 {
        if tau as usize > population {
            return Err(Error::NonTermination { limit: population });
        }
        let mut found = 0usize;
        let mut backward = blank(Direction::Backward);
        let mut forward = blank(Direction::Forward);
        backward[rbar] = IsicMessage::backward(r_top, std::mem::take(&mut seed));

        let mut node =
            |r: u32, incoming: &BTreeSet<TagId>, dir, decoded: &mut HashSet<TagId>, out: &mut IsicOutcome| {
                let fresh = node_update(
                    &mut frames[r as usize - 1],
                    incoming,
                    lookup,
                    params,
                    decoded,
                    &mut out.redundant_deliveries,
                )?;
                for &tag in &fresh {
                    decoded.insert(tag);
                    out.detections.push((tag, r));
                    if let Some(t) = trace.as_mut() {
                        t(TraceEvent { tau, direction: dir, frame: r, tag });
                    }
                }
                Ok::<_, Error>(fresh)
            };

        for r in (2..r_top).rev() {
            let ru = r as usize;
            let d = node(r, &backward[ru + 1].content, Direction::Backward, decoded_anywhere, &mut outcome)?;
            found += d.len();
            let mut content = d;
            content.extend(backward[ru + 1].content.iter().copied());
            content.extend(
                prev_forward[ru]
                    .content
                    .iter()
                    .filter(|t| !prev_forward[ru - 1].content.contains(t) && !prev_backward[ru].content.contains(t)),
            );
            backward[ru] = IsicMessage::backward(r, content);
        }

        let d1 = node(1, &backward[2].content, Direction::Backward, decoded_anywhere, &mut outcome)?;
        found += d1.len();
        forward[1] = IsicMessage::forward(1, d1);

        for r in 2..r_top {
            let ru = r as usize;
            let d = node(r, &forward[ru - 1].content, Direction::Forward, decoded_anywhere, &mut outcome)?;
            found += d.len();
            let mut content = d;
            content.extend(forward[ru - 1].content.iter().copied());
            content.extend(
                backward[ru]
                    .content
                    .iter()
                    .filter(|t| !backward[ru + 1].content.contains(t) && !prev_forward[ru].content.contains(t)),
            );
            forward[ru] = IsicMessage::forward(r, content);
        }

        let d_top = node(r_top, &forward[rbar - 1].content, Direction::Forward, decoded_anywhere, &mut outcome)?;
        found += d_top.len();
        seed = d_top;

        prev_backward = backward;
        prev_forward = forward;
        pending = found;
        tau += 1;
        outcome.iterations += 1;
    }
    Ok(outcome)
}

/// Global fixed point of "cancel every decoded tag from every frame, then
/// re-decode every slot", computed by brute force on copies of `frames`.
///
/// Only meaningful with perfect cancellation, where the fixed point does not
/// depend on cancellation order; the residual fraction is forced to zero.
pub fn fixpoint_oracle(frames: &[FrameRecord], gamma: f64) -> BTreeSet<TagId> {
    let mut frames = frames.to_vec();
    let mut decoded = BTreeSet::new();
    loop {
        let before = decoded.len();
        for frame in &mut frames {
            for slot in &mut frame.slots {
                for &tag in &decoded {
                    slot.cancel(tag, 0.0);
                }
                decoded.extend(sic_in_place(slot, gamma, 0.0));
            }
        }
        if decoded.len() == before {
            return decoded;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    const A: TagId = TagId(0xA);
    const B: TagId = TagId(0xB);
    const C: TagId = TagId(0xC);
    const P: DecodeParams = DecodeParams { gamma: 2.0, beta: 0.0 };

    /// Explicit slot table: (tag, frame) -> slot.
    #[derive(Default)]
    struct Table(HashMap<(TagId, u32), u32>);

    impl SlotLookup for Table {
        fn slot_of(&self, tag: TagId, frame_index: u32) -> Result<u32> {
            Ok(*self.0.get(&(tag, frame_index)).expect("tag not scheduled"))
        }
    }

    /// Builds frame `index` with 4 slots from (tag, slot, power) triples and
    /// records the positions in `table`.
    fn frame(index: u32, table: &mut Table, tx: &[(TagId, u32, f64)]) -> FrameRecord {
        let mut f = FrameRecord::new(index, 4, 1.0);
        for &(tag, slot, power) in tx {
            f.slots[slot as usize].add(tag, power);
            table.0.insert((tag, index), slot);
        }
        f
    }

    fn intra_sic(f: &mut FrameRecord) -> BTreeSet<TagId> {
        let mut out = BTreeSet::new();
        for slot in &mut f.slots {
            out.extend(sic_in_place(slot, P.gamma, P.beta));
        }
        f.decoded_here.extend(out.iter().copied());
        out
    }

    #[test]
    fn empty_incoming_changes_nothing() {
        let mut t = Table::default();
        let mut f = frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]);
        let before = f.clone();
        let msg = IsicMessage::backward(2, BTreeSet::new());
        let got = isic_node(&mut f, &msg, &t, P, &HashSet::new()).unwrap();
        assert!(got.is_empty());
        assert_eq!(f, before);
    }

    #[test]
    fn node_cancellation_frees_partner() {
        let mut t = Table::default();
        let mut f = frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]);
        let msg = IsicMessage::backward(2, [A].into());
        let got = isic_node(&mut f, &msg, &t, P, &[A].into()).unwrap();
        assert_eq!(got, [B].into());
        assert_eq!(f.cancelled_here, vec![A]);
        assert!(f.decoded_here.contains(&B));

        // second delivery of A is a no-op
        let again = isic_node(&mut f, &msg, &t, P, &[A, B].into()).unwrap();
        assert!(again.is_empty());
        assert_eq!(f.cancelled_here, vec![A]);
    }

    #[test]
    fn node_reports_schedule_mismatch() {
        let mut t = Table::default();
        let mut f = frame(1, &mut t, &[(A, 0, 50.0)]);
        t.0.insert((B, 1), 2);
        let msg = IsicMessage::forward(0, [B].into());
        assert!(matches!(
            isic_node(&mut f, &msg, &t, P, &HashSet::new()),
            Err(Error::ScheduleMismatch { tag: B, frame: 1, slot: 2 })
        ));
    }

    #[test]
    fn single_frame_is_intra_sic_only() {
        let mut t = Table::default();
        let mut frames = vec![frame(1, &mut t, &[(A, 0, 50.0), (B, 1, 50.0)])];
        let init = intra_sic(&mut frames[0]);
        let mut decoded = HashSet::new();
        let out = exhaustive_isic(&mut frames, &init, &mut decoded, &t, P, 2, None).unwrap();
        assert_eq!(out.decoded(), init);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn empty_initial_exits_immediately() {
        let mut t = Table::default();
        let mut frames =
            vec![frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]), frame(2, &mut t, &[(A, 1, 50.0), (B, 1, 50.0)])];
        let before = frames.clone();
        let mut decoded = HashSet::new();
        let out = exhaustive_isic(&mut frames, &BTreeSet::new(), &mut decoded, &t, P, 2, None).unwrap();
        assert!(out.detections.is_empty());
        assert_eq!(frames, before);
    }

    #[test]
    fn two_frames_both_already_decoded() {
        let mut t = Table::default();
        let mut frames =
            vec![frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]), frame(2, &mut t, &[(A, 1, 50.0), (B, 2, 50.0)])];
        let oracle = fixpoint_oracle(&frames, P.gamma);
        let init = intra_sic(&mut frames[1]);
        assert_eq!(init, [A, B].into());
        let mut decoded = HashSet::new();
        let out = exhaustive_isic(&mut frames, &init, &mut decoded, &t, P, 2, None).unwrap();
        assert_eq!(out.decoded(), [A, B].into());
        assert_eq!(out.detections.len(), 2);
        assert_eq!(out.decoded(), oracle);
        assert!(frames[0].slots[0].is_empty());
    }

    #[test]
    fn two_frames_backward_then_forward_recovery() {
        let mut t = Table::default();
        let mut frames = vec![
            // C is weak in frame 1 and stays stuck there until it is cancelled
            frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0), (C, 0, 1.0)]),
            frame(2, &mut t, &[(A, 1, 50.0), (B, 2, 50.0), (C, 2, 50.0)]),
        ];
        let oracle = fixpoint_oracle(&frames, P.gamma);
        assert!(intra_sic(&mut frames[0]).is_empty());
        let init = intra_sic(&mut frames[1]);
        assert_eq!(init, [A].into());
        let mut decoded = HashSet::new();
        let mut events = Vec::new();
        let mut sink = |e: TraceEvent| events.push(e);
        let out = exhaustive_isic(&mut frames, &init, &mut decoded, &t, P, 3, Some(&mut sink)).unwrap();
        // A frees B in frame 1; B cancelled in frame 2 frees C
        assert_eq!(out.decoded(), [A, B, C].into());
        assert_eq!(out.detections, vec![(A, 2), (B, 1), (C, 2)]);
        assert_eq!(events[0], TraceEvent { tau: 1, direction: Direction::Backward, frame: 1, tag: B });
        assert_eq!(events[1], TraceEvent { tau: 1, direction: Direction::Forward, frame: 2, tag: C });
        assert_eq!(frames[1].cancelled_here, vec![B]);
        assert_eq!(frames[0].cancelled_here, vec![A, C]);
        assert_eq!(out.iterations, 2);
        assert_eq!(out.decoded(), oracle);
    }

    #[test]
    fn chain_across_three_frames_needs_two_sweeps() {
        let (d, e) = (TagId(0xD), TagId(0xE));
        let mut t = Table::default();
        let mut frames = vec![
            frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0), (C, 1, 50.0), (d, 1, 50.0), (e, 1, 50.0)]),
            frame(2, &mut t, &[(A, 1, 50.0), (B, 1, 50.0), (C, 0, 50.0), (d, 0, 50.0), (e, 1, 50.0)]),
            frame(3, &mut t, &[(A, 0, 50.0), (B, 1, 50.0), (C, 1, 50.0), (d, 2, 50.0), (e, 2, 50.0)]),
        ];
        let oracle = fixpoint_oracle(&frames, P.gamma);
        assert!(intra_sic(&mut frames[0]).is_empty());
        assert!(intra_sic(&mut frames[1]).is_empty());
        let init = intra_sic(&mut frames[2]);
        assert_eq!(init, [A].into());

        let mut decoded = HashSet::new();
        let out = exhaustive_isic(&mut frames, &init, &mut decoded, &t, P, 5, None).unwrap();
        assert_eq!(oracle, [A, B, C, d, e].into());
        assert_eq!(out.decoded(), oracle);
        assert_eq!(out.detections, vec![(A, 3), (B, 1), (e, 2), (C, 3), (d, 3)]);
        assert_eq!(out.iterations, 2);
        // every frame fully cleared, each tag removed at most once per frame
        for f in &frames {
            assert!(f.slots.iter().all(|s| s.is_empty()));
            let unique: HashSet<_> = f.cancelled_here.iter().collect();
            assert_eq!(unique.len(), f.cancelled_here.len());
        }
    }

    #[test]
    fn oracle_examples() {
        let mut t = Table::default();
        let singles = vec![frame(1, &mut t, &[(A, 0, 50.0), (B, 1, 50.0), (C, 2, 50.0)])];
        assert_eq!(fixpoint_oracle(&singles, 2.0), [A, B, C].into());

        let chain = vec![
            frame(1, &mut t, &[(A, 0, 50.0)]),
            frame(2, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]),
            frame(3, &mut t, &[(B, 0, 50.0), (C, 0, 50.0)]),
        ];
        assert_eq!(fixpoint_oracle(&chain, 2.0), [A, B, C].into());

        let deadlock =
            vec![frame(1, &mut t, &[(A, 0, 50.0), (B, 0, 50.0)]), frame(2, &mut t, &[(A, 3, 50.0), (B, 3, 50.0)])];
        assert!(fixpoint_oracle(&deadlock, 2.0).is_empty());
    }
}
