//! Reading-cycle orchestration.
//!
//! A cycle is a sequence of transmission frames, each followed by an
//! acknowledgment frame. In frame `r` every unacknowledged tag transmits in
//! its hashed slot with a fresh fade; the reader decodes the frame, in ISIC
//! mode also revisits every stored frame, and acknowledges all newly decoded
//! IDs, which then stay silent for the rest of the cycle.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, GainSource, KeyedGains};
use crate::config::{ExperimentSpec, ProtocolConfig};
use crate::error::{Error, Result};
use crate::hash::{SlotHasher, SlotSchedule};
use crate::isic::{exhaustive_isic, DecodeParams, HashedSlots, TraceEvent};
use crate::model::{derive_seed, CycleResult, DecodeEvent, FrameRecord, Mechanism, ReceiverMode, TagId, TagPopulation};
use crate::receiver::{capture_in_place, sic_in_place};

#[derive(Clone, Debug)]
pub struct TagState {
    pub id: TagId,
    /// Position in the population; keys the tag's channel stream.
    pub index: usize,
    pub acknowledged: bool,
    pub schedule: SlotSchedule,
}

/// Downlink acknowledgment following a transmission frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckFrame {
    pub frame_index: u32,
    /// Newly decoded IDs, ascending.
    pub acked_ids: Vec<TagId>,
}

/// A validated configuration together with its slot hash.
#[derive(Clone, Debug)]
pub struct Simulator {
    cfg: ProtocolConfig,
    hasher: SlotHasher,
}

impl Simulator {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        cfg.ensure_valid()?;
        let hasher = SlotHasher::new(cfg.interleaver_seed);
        Ok(Simulator { cfg, hasher })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn hasher(&self) -> &SlotHasher {
        &self.hasher
    }

    /// Starts a cycle with an explicit gain source.
    pub fn cycle<'a, G: GainSource>(
        &'a self,
        population: &TagPopulation,
        seed: u64,
        mode: ReceiverMode,
        gains: G,
    ) -> Result<ReadingCycle<'a, G>> {
        ReadingCycle::new(self, population, seed, mode, gains)
    }

    /// Runs a full cycle with channel gains keyed on `seed`.
    pub fn run_cycle(&self, population: &TagPopulation, seed: u64, mode: ReceiverMode) -> Result<CycleResult> {
        let gains = KeyedGains::new(self.cfg.channel_model(), seed, self.cfg.fading);
        let mut cycle = self.cycle(population, seed, mode, gains)?;
        cycle.run_to_end()?;
        Ok(cycle.into_result())
    }
}

/// State of one reading cycle in progress.
pub struct ReadingCycle<'a, G> {
    sim: &'a Simulator,
    mode: ReceiverMode,
    gains: G,
    seed: u64,
    tags: Vec<TagState>,
    frames: Vec<FrameRecord>,
    decoded: HashSet<TagId>,
    unacknowledged: usize,
    max_frames: u32,
    residual_trace: Vec<u32>,
    ack_sizes: Vec<u32>,
    decode_log: Vec<DecodeEvent>,
}

impl<'a, G: GainSource> ReadingCycle<'a, G> {
    fn new(sim: &'a Simulator, population: &TagPopulation, seed: u64, mode: ReceiverMode, gains: G) -> Result<Self> {
        if population.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let k = sim.cfg.slots_per_frame;
        let tags = population
            .tags()
            .iter()
            .enumerate()
            .map(|(index, &id)| Ok(TagState { id, index, acknowledged: false, schedule: SlotSchedule::empty(id, k)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReadingCycle {
            sim,
            mode,
            gains,
            seed,
            unacknowledged: tags.len(),
            tags,
            frames: Vec::new(),
            decoded: HashSet::new(),
            max_frames: sim.cfg.max_frames_for(population.len()),
            residual_trace: Vec::new(),
            ack_sizes: Vec::new(),
            decode_log: Vec::new(),
        })
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn tags(&self) -> &[TagState] {
        &self.tags
    }

    pub fn unacknowledged(&self) -> usize {
        self.unacknowledged
    }

    pub fn max_frames(&self) -> u32 {
        self.max_frames
    }

    pub fn is_finished(&self) -> bool {
        self.unacknowledged == 0 || self.frames.len() as u32 >= self.max_frames
    }

    /// Runs one transmission frame and its acknowledgment.
    pub fn run_frame(&mut self) -> Result<AckFrame> {
        if self.unacknowledged == 0 {
            return Err(Error::Malformed("no unacknowledged tags left to read".into()));
        }
        let cfg = &self.sim.cfg;
        let r = self.frames.len() as u32 + 1;
        let mut frame = FrameRecord::new(r, cfg.slots_per_frame as usize, cfg.noise_power());

        for tag in self.tags.iter_mut().filter(|t| !t.acknowledged) {
            tag.schedule.extend_to(&self.sim.hasher, r)?;
            let slot = tag.schedule.slot(r).expect("schedule extended to r");
            frame.slots[slot as usize].add(tag.id, self.gains.power(tag.index, r));
        }

        let mut fresh: Vec<DecodeEvent> = Vec::new();
        let event = |tag, mechanism| DecodeEvent { tag, decoded_in: r, transmitted_in: r, mechanism };
        for slot in &mut frame.slots {
            match self.mode {
                ReceiverMode::Capture => {
                    fresh.extend(capture_in_place(slot, cfg.gamma).map(|t| event(t, Mechanism::Capture)));
                }
                ReceiverMode::Sic | ReceiverMode::Isic => {
                    for (n, t) in sic_in_place(slot, cfg.gamma, cfg.beta).into_iter().enumerate() {
                        let m = if n == 0 { Mechanism::Capture } else { Mechanism::IntraSic };
                        fresh.push(event(t, m));
                    }
                }
            }
        }
        frame.decoded_here.extend(fresh.iter().map(|e| e.tag));
        self.decoded.extend(fresh.iter().map(|e| e.tag));
        self.frames.push(frame);

        if self.mode == ReceiverMode::Isic {
            let initial: BTreeSet<TagId> = fresh.iter().map(|e| e.tag).collect();
            let lookup = HashedSlots { hasher: &self.sim.hasher, slots_per_frame: cfg.slots_per_frame };
            let params = DecodeParams { gamma: cfg.gamma, beta: cfg.beta };
            let mut log_trace = |e: TraceEvent| {
                log::trace!("isic tau={} {:?} r={} tag={}", e.tau, e.direction, e.frame, e.tag);
            };
            let trace: Option<&mut dyn FnMut(TraceEvent)> =
                if log::log_enabled!(log::Level::Trace) { Some(&mut log_trace) } else { None };
            let outcome = exhaustive_isic(
                &mut self.frames,
                &initial,
                &mut self.decoded,
                &lookup,
                params,
                self.tags.len(),
                trace,
            )?;
            fresh.extend(outcome.detections.into_iter().filter(|(t, _)| !initial.contains(t)).map(
                |(tag, transmitted_in)| DecodeEvent { tag, decoded_in: r, transmitted_in, mechanism: Mechanism::Isic },
            ));
        }

        let mut acked_ids: Vec<TagId> = fresh.iter().map(|e| e.tag).collect();
        acked_ids.sort_unstable();
        for tag in self.tags.iter_mut().filter(|t| !t.acknowledged) {
            if acked_ids.binary_search(&tag.id).is_ok() {
                tag.acknowledged = true;
            }
        }
        self.unacknowledged -= acked_ids.len();
        self.residual_trace.push(self.unacknowledged as u32);
        self.ack_sizes.push(acked_ids.len() as u32);
        self.decode_log.extend(fresh);
        Ok(AckFrame { frame_index: r, acked_ids })
    }

    /// Runs frames until every tag is acknowledged or the frame cap is hit.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.run_frame()?;
        }
        Ok(())
    }

    pub fn into_result(self) -> CycleResult {
        CycleResult {
            frames: self.frames.len() as u32,
            complete: self.unacknowledged == 0,
            residual_trace: self.residual_trace,
            ack_sizes: self.ack_sizes,
            decode_log: self.decode_log,
            seed: self.seed,
        }
    }
}

/// Simulates one reading cycle of `population` under `mode`.
pub fn run_reading_cycle(
    cfg: &ProtocolConfig,
    population: &TagPopulation,
    seed: u64,
    mode: ReceiverMode,
) -> Result<CycleResult> {
    Simulator::new(cfg.clone())?.run_cycle(population, seed, mode)
}

/// One simulated cycle as reported in the result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub mode: ReceiverMode,
    pub channel: ChannelKind,
    pub slots_per_frame: u32,
    pub population: usize,
    pub replication: usize,
    pub seed: u64,
    pub frames: u32,
    pub complete: bool,
    pub residual_trace: Vec<u32>,
}

impl CycleRow {
    fn sort_key(&self) -> (ReceiverMode, ChannelKind, usize, usize) {
        (self.mode, self.channel, self.population, self.replication)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CycleRow>,
}

impl ResultTable {
    /// Sorts rows by (mode, channel, I, replication).
    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| r.sort_key());
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
        self.sort();
    }

    pub fn incomplete(&self) -> usize {
        self.rows.iter().filter(|r| !r.complete).count()
    }

    /// Rows for one (mode, channel, I) cell, in replication order.
    pub fn cell(&self, mode: ReceiverMode, channel: ChannelKind, population: usize) -> impl Iterator<Item = &CycleRow> {
        self.rows.iter().filter(move |r| r.mode == mode && r.channel == channel && r.population == population)
    }

    /// Distinct (mode, channel, I) cells, sorted.
    pub fn cells(&self) -> Vec<(ReceiverMode, ChannelKind, usize)> {
        let set: BTreeSet<_> = self.rows.iter().map(|r| (r.mode, r.channel, r.population)).collect();
        set.into_iter().collect()
    }
}

/// Seed of replication `replication` at population size `population`.
pub fn replication_seed(base_seed: u64, population: usize, replication: usize) -> u64 {
    base_seed ^ derive_seed(&[population as u64, replication as u64])
}

/// Runs `replications` cycles for every population size and receiver mode.
///
/// All modes of one (I, replication) pair share the population, the slot
/// schedules and the channel draws. Work is spread over the current rayon
/// pool; the output order does not depend on scheduling.
pub fn run_experiment(
    cfg: &ProtocolConfig,
    populations: &[usize],
    replications: usize,
    base_seed: u64,
    modes: &[ReceiverMode],
) -> Result<ResultTable> {
    if replications == 0 {
        return Err(Error::Malformed("replications must be at least 1".into()));
    }
    let sim = Simulator::new(cfg.clone())?;
    let jobs: Vec<(usize, usize)> =
        populations.iter().flat_map(|&i| (0..replications).map(move |rep| (i, rep))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(population, replication)| {
            let seed = replication_seed(base_seed, population, replication);
            let tags = TagPopulation::generate(population, seed)?;
            modes
                .iter()
                .map(|&mode| {
                    let result = sim.run_cycle(&tags, seed, mode)?;
                    Ok(CycleRow {
                        mode,
                        channel: cfg.channel,
                        slots_per_frame: cfg.slots_per_frame,
                        population,
                        replication,
                        seed,
                        frames: result.frames,
                        complete: result.complete,
                        residual_trace: result.residual_trace,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable { rows: rows.into_iter().flatten().collect() };
    table.sort();
    Ok(table)
}

/// Runs an experiment file: every channel × population × mode.
pub fn run_spec(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.ensure_valid()?;
    let mut table = ResultTable::default();
    for channel in spec.effective_channels() {
        let cfg = ProtocolConfig { channel, ..spec.config.clone() };
        table.extend(run_experiment(&cfg, &spec.populations, spec.replications, spec.base_seed, &spec.modes)?);
    }
    Ok(table)
}
