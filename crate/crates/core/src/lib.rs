//! Pseudo-random framed slotted Aloha for RFID inventory.
//!
//! Tags pick their slot in every transmission frame with a deterministic hash
//! of their 128-bit ID and the frame index, so a reader that decodes a tag can
//! locate and cancel that tag's earlier transmissions. This crate simulates
//! reading cycles under three receiver structures:
//!
//! * capture-only: the strongest signal in a slot is decoded if its SINR
//!   clears the threshold,
//! * intra-frame SIC: successive interference cancellation within each slot,
//! * inter-frame SIC (ISIC): intra-frame SIC plus exhaustive backward/forward
//!   message passing that cancels decoded tags from all stored frames.
//!
//! The receiver works in the power domain: a slot is a list of received
//! component powers plus residual interference and unit noise.

pub mod channel;
pub mod config;
pub mod error;
pub mod golden;
pub mod hash;
pub mod isic;
pub mod metrics;
pub mod model;
pub mod receiver;
pub mod sim;

pub use channel::{ChannelKind, ChannelModel, Fading, GainDraw, GainSource, KeyedGains};
pub use config::{ExperimentSpec, ProtocolConfig};
pub use error::{ConfigViolation, Error, Result};
pub use hash::{crc16, Interleaver, SlotHasher, SlotSchedule, DEFAULT_INTERLEAVER_SEED};
pub use isic::{exhaustive_isic, fixpoint_oracle, isic_node, IsicMessage, IsicOutcome, SlotLookup};
pub use metrics::{percentile, residual_trace_aggregate, throughput, ThroughputPoint};
pub use model::{
    Component, CycleResult, DecodeEvent, FrameRecord, Mechanism, ReceiverMode, SlotState, TagId, TagPopulation,
};
pub use receiver::{cancel_component, capture_only_decode, sic_decode, sinr_of, DecodeOutcome};
pub use sim::{run_experiment, run_reading_cycle, AckFrame, CycleRow, ReadingCycle, ResultTable, Simulator};
