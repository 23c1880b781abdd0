//! Power-domain slot decoding.
//!
//! A component is decodable when its SINR, its power over the sum of every
//! other component plus residual interference plus noise, reaches `gamma`.

use crate::model::{SlotState, TagId};

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutcome {
    /// Decoded tags, strongest first.
    pub decoded: Vec<TagId>,
    /// The slot with the decoded components removed.
    pub updated_slot: SlotState,
}

/// SINR of `tag` within `slot`, or `None` if the tag has no component there.
pub fn sinr_of(slot: &SlotState, tag: TagId) -> Option<f64> {
    let idx = slot.components().iter().position(|c| c.tag == tag)?;
    Some(slot.components()[idx].power / slot.interference_excluding(idx))
}

fn head_decodable(slot: &SlotState, gamma: f64) -> Option<TagId> {
    let head = slot.components().first()?;
    (head.power / slot.interference_excluding(0) >= gamma).then_some(head.tag)
}

/// Capture receiver: decodes the strongest component if it clears `gamma`,
/// and nothing else.
pub fn capture_only_decode(slot: &SlotState, gamma: f64) -> DecodeOutcome {
    let mut updated_slot = slot.clone();
    let decoded = capture_in_place(&mut updated_slot, gamma).into_iter().collect();
    DecodeOutcome { decoded, updated_slot }
}

pub(crate) fn capture_in_place(slot: &mut SlotState, gamma: f64) -> Option<TagId> {
    let tag = head_decodable(slot, gamma)?;
    slot.cancel(tag, 0.0);
    Some(tag)
}

/// Successive interference cancellation within one slot: decode the
/// strongest, cancel it (leaving `beta` of its power), repeat until the
/// strongest remaining component falls below `gamma`.
pub fn sic_decode(slot: &SlotState, gamma: f64, beta: f64) -> DecodeOutcome {
    let mut updated_slot = slot.clone();
    let decoded = sic_in_place(&mut updated_slot, gamma, beta);
    DecodeOutcome { decoded, updated_slot }
}

pub(crate) fn sic_in_place(slot: &mut SlotState, gamma: f64, beta: f64) -> Vec<TagId> {
    let mut decoded = Vec::new();
    while let Some(tag) = head_decodable(slot, gamma) {
        slot.cancel(tag, beta);
        decoded.push(tag);
    }
    decoded
}

/// Removes `tag` from `slot` if present, leaving `beta` of its power as
/// residual. An absent tag leaves the slot unchanged.
pub fn cancel_component(slot: &SlotState, tag: TagId, beta: f64) -> SlotState {
    let mut out = slot.clone();
    out.cancel(tag, beta);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: TagId = TagId(1);
    const B: TagId = TagId(2);

    fn slot(powers: &[f64]) -> SlotState {
        SlotState::with_components(1.0, powers.iter().enumerate().map(|(i, &p)| (TagId(i as u128 + 1), p)))
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr_of(&slot(&[100.0]), A), Some(100.0));
        assert_eq!(sinr_of(&slot(&[100.0, 10.0]), A), Some(100.0 / 11.0));
        let mut s = slot(&[8.0]);
        s.residual_power = 3.0;
        assert_eq!(sinr_of(&s, A), Some(2.0));
        assert_eq!(sinr_of(&s, B), None);
    }

    #[test]
    fn capture_examples() {
        assert!(capture_only_decode(&SlotState::new(1.0), 2.0).decoded.is_empty());
        assert_eq!(capture_only_decode(&slot(&[100.0]), 2.0).decoded, vec![A]);
        assert!(capture_only_decode(&slot(&[100.0, 100.0]), 2.0).decoded.is_empty());
        // capture never attempts a second signal
        assert_eq!(capture_only_decode(&slot(&[100.0, 10.0]), 2.0).decoded, vec![A]);
    }

    #[test]
    fn sic_examples() {
        let out = sic_decode(&slot(&[100.0, 10.0]), 2.0, 0.0);
        assert_eq!(out.decoded, vec![A, B]);
        assert!(out.updated_slot.is_empty());

        assert!(sic_decode(&slot(&[100.0, 100.0]), 2.0, 0.0).decoded.is_empty());

        let out = sic_decode(&slot(&[100.0, 10.0]), 2.0, 0.5);
        assert_eq!(out.decoded, vec![A]);
        assert_eq!(out.updated_slot.residual_power, 50.0);
        assert_eq!(sinr_of(&out.updated_slot, B), Some(10.0 / 51.0));
    }

    #[test]
    fn sic_tie_breaks_by_tag_id() {
        let s = SlotState::with_components(1.0, [(TagId(9), 50.0), (TagId(4), 50.0), (TagId(7), 1000.0)]);
        // 1000/101 clears 2, then 50/51 does not
        assert_eq!(sic_decode(&s, 2.0, 0.0).decoded, vec![TagId(7)]);
        let s = SlotState::with_components(0.0, [(TagId(9), 50.0), (TagId(4), 50.0)]);
        assert_eq!(sic_decode(&s, 1.0, 0.0).decoded, vec![TagId(4), TagId(9)]);
    }

    #[test]
    fn cancel_examples() {
        let s = slot(&[100.0, 40.0]);
        let gone = cancel_component(&s, A, 0.0);
        assert!(!gone.contains(A));
        assert_eq!(gone.residual_power, 0.0);
        assert_eq!(cancel_component(&s, TagId(99), 0.3), s);
        let partial = cancel_component(&s, B, 0.1);
        assert!((partial.residual_power - 4.0).abs() < 1e-12);
        assert_eq!(partial.len(), 1);
    }

    /// Recomputes the decodable set by re-running the capture rule after
    /// every removal, from scratch each time.
    fn capture_rerun_oracle(powers: &[(TagId, f64)], noise: f64, gamma: f64) -> Vec<TagId> {
        let mut left: Vec<(TagId, f64)> = powers.to_vec();
        let mut out = Vec::new();
        loop {
            let total: f64 = left.iter().map(|c| c.1).sum();
            let hit = left.iter().enumerate().find(|(_, c)| c.1 / (total - c.1 + noise) >= gamma).map(|(i, _)| i);
            match hit {
                Some(i) => out.push(left.remove(i).0),
                None => return out,
            }
        }
    }

    fn grid_slot() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0]), 0..=6)
    }

    proptest! {
        #[test]
        fn sic_covers_capture(powers in grid_slot(), gamma in 0.5f64..8.0, beta in 0.0f64..=1.0) {
            let s = slot(&powers);
            let cap = capture_only_decode(&s, gamma).decoded;
            let sic = sic_decode(&s, gamma, beta).decoded;
            prop_assert!(cap.iter().all(|t| sic.contains(t)));
        }

        #[test]
        fn sic_matches_capture_rerun_oracle(powers in grid_slot(), gamma in prop::sample::select(vec![0.5, 1.0, 2.0, 4.0])) {
            let s = slot(&powers);
            let comps: Vec<_> = s.components().iter().map(|c| (c.tag, c.power)).collect();
            let mut got = sic_decode(&s, gamma, 0.0).decoded;
            let mut want = capture_rerun_oracle(&comps, 1.0, gamma);
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn decoding_is_scale_invariant(powers in grid_slot(), gamma in 0.5f64..8.0, exp in -20i32..20) {
            let scale = 2f64.powi(exp);
            let s = slot(&powers);
            let mut scaled = SlotState::with_components(scale, s.components().iter().map(|c| (c.tag, c.power * scale)));
            scaled.residual_power = s.residual_power * scale;
            prop_assert_eq!(sic_decode(&s, gamma, 0.0).decoded, sic_decode(&scaled, gamma, 0.0).decoded);
            prop_assert_eq!(capture_only_decode(&s, gamma).decoded, capture_only_decode(&scaled, gamma).decoded);
        }

        #[test]
        fn sic_order_non_increasing(powers in grid_slot(), gamma in 0.1f64..4.0) {
            let s = slot(&powers);
            let out = sic_decode(&s, gamma, 0.0);
            let p: Vec<f64> = out.decoded.iter().map(|t| s.power_of(*t).unwrap()).collect();
            prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(out.decoded.iter().all(|t| !out.updated_slot.contains(*t)));
        }

        #[test]
        fn cancel_removes_exactly_one(powers in grid_slot(), pick in 0usize..8, beta in 0.0f64..=1.0) {
            let s = slot(&powers);
            let tag = TagId(pick as u128 + 1);
            let out = cancel_component(&s, tag, beta);
            if s.contains(tag) {
                prop_assert_eq!(out.len(), s.len() - 1);
                prop_assert!(!out.contains(tag));
            } else {
                prop_assert_eq!(out, s);
            }
        }
    }
}
