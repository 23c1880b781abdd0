#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use psaloha::isic::DecodeParams;
use psaloha::{
    exhaustive_isic, fixpoint_oracle, sic_decode, ChannelKind, ChannelModel, FrameRecord, GainSource, KeyedGains,
    ProtocolConfig, ReceiverMode, Result, Simulator, SlotLookup, TagId, TagPopulation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of one random oracle instance.
#[derive(Clone, Copy, Debug)]
pub struct Instance {
    pub channel: ChannelKind,
    pub slots_per_frame: u32,
    pub population: usize,
    pub frames: u32,
    pub seed: u64,
}

impl Instance {
    pub fn random(channel: ChannelKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Instance {
            channel,
            slots_per_frame: 1 << rng.random_range(1..=3),
            population: rng.random_range(1..=16),
            frames: rng.random_range(1..=6),
            seed,
        }
    }
}

/// Decoded-set mismatches between the engine and the fixed-point oracle.
#[derive(Debug, Default)]
pub struct OracleReport {
    pub checks: usize,
    pub mismatches: Vec<String>,
}

/// Runs an ISIC reading cycle frame by frame. After every frame the set of
/// acknowledged tags must equal the oracle's fixed point over the frames as
/// they were received.
pub fn oracle_via_simulator(inst: Instance, report: &mut OracleReport) -> Result<()> {
    let cfg = ProtocolConfig {
        slots_per_frame: inst.slots_per_frame,
        channel: inst.channel,
        max_frames: Some(inst.frames),
        ..Default::default()
    };
    let sim = Simulator::new(cfg.clone())?;
    let pop = TagPopulation::generate(inst.population, inst.seed)?;
    let gains = KeyedGains::new(cfg.channel_model(), inst.seed, cfg.fading);
    let mut cycle = sim.cycle(&pop, inst.seed, ReceiverMode::Isic, gains.clone())?;
    let mut received = Vec::new();
    while !cycle.is_finished() {
        let r = received.len() as u32 + 1;
        let mut frame = FrameRecord::new(r, inst.slots_per_frame as usize, cfg.noise_power());
        for t in cycle.tags().iter().filter(|t| !t.acknowledged) {
            let slot = sim.hasher().select_slot(t.id, r, inst.slots_per_frame)?;
            frame.slots[slot as usize].add(t.id, gains.power(t.index, r));
        }
        received.push(frame);
        cycle.run_frame()?;
        let engine: BTreeSet<TagId> = cycle.tags().iter().filter(|t| t.acknowledged).map(|t| t.id).collect();
        let oracle = fixpoint_oracle(&received, cfg.gamma);
        report.checks += 1;
        if engine != oracle {
            report.mismatches.push(format!("{inst:?} frame {r}: engine {engine:?} oracle {oracle:?}"));
        }
    }
    Ok(())
}

struct Table(HashMap<(TagId, u32), u32>);

impl SlotLookup for Table {
    fn slot_of(&self, tag: TagId, frame_index: u32) -> Result<u32> {
        Ok(*self.0.get(&(tag, frame_index)).expect("tag transmitted in frame"))
    }
}

/// Same check with uniformly random slots drawn independently of the hash,
/// driving the decoder directly.
pub fn oracle_via_table(inst: Instance, report: &mut OracleReport) -> Result<()> {
    let params = DecodeParams { gamma: 2.0, beta: 0.0 };
    let model = ChannelModel::new(inst.channel, 3.0, 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed ^ 0xA5A5);
    let tags: Vec<TagId> = (0..inst.population).map(|_| TagId(rng.random())).collect();
    let mut table = Table(HashMap::new());
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut received = Vec::new();
    let mut decoded: HashSet<TagId> = HashSet::new();
    for r in 1..=inst.frames {
        if decoded.len() == tags.len() {
            break;
        }
        let mut frame = FrameRecord::new(r, inst.slots_per_frame as usize, 1.0);
        for &t in tags.iter().filter(|t| !decoded.contains(t)) {
            let slot = rng.random_range(0..inst.slots_per_frame);
            table.0.insert((t, r), slot);
            frame.slots[slot as usize].add(t, model.draw_gain(&mut rng).power);
        }
        received.push(frame.clone());
        let mut initial = BTreeSet::new();
        for slot in &mut frame.slots {
            let out = sic_decode(slot, params.gamma, params.beta);
            initial.extend(out.decoded.iter().copied());
            *slot = out.updated_slot;
        }
        frame.decoded_here.extend(initial.iter().copied());
        frames.push(frame);
        exhaustive_isic(&mut frames, &initial, &mut decoded, &table, params, tags.len(), None)?;
        let engine: BTreeSet<TagId> = decoded.iter().copied().collect();
        let oracle = fixpoint_oracle(&received, params.gamma);
        report.checks += 1;
        if engine != oracle {
            report.mismatches.push(format!("{inst:?} frame {r}: engine {engine:?} oracle {oracle:?}"));
        }
    }
    Ok(())
}

/// Cumulative decoded count after each of `len` frames.
fn cumulative(population: usize, trace: &[u32], len: usize) -> Vec<usize> {
    (0..len).map(|i| population - trace.get(i).copied().unwrap_or(0) as usize).collect()
}

/// Runs the three receivers on one paired seed and lists every frame where
/// ISIC >= SIC >= capture fails, plus any violation of the M ordering.
pub fn dominance_violations(cfg: &ProtocolConfig, population: usize, seed: u64) -> Result<Vec<String>> {
    let sim = Simulator::new(cfg.clone())?;
    let pop = TagPopulation::generate(population, seed)?;
    let [cap, sic, isic] = ReceiverMode::ALL.map(|m| sim.run_cycle(&pop, seed, m));
    let (cap, sic, isic) = (cap?, sic?, isic?);
    let len = cap.frames.max(sic.frames).max(isic.frames) as usize;
    let [c, s, i] = [&cap, &sic, &isic].map(|r| cumulative(population, &r.residual_trace, len));
    let mut out = Vec::new();
    for r in 0..len {
        if !(i[r] >= s[r] && s[r] >= c[r]) {
            out.push(format!(
                "I={population} seed={seed} frame {}: isic {} sic {} capture {}",
                r + 1,
                i[r],
                s[r],
                c[r]
            ));
        }
    }
    if !(isic.frames <= sic.frames && sic.frames <= cap.frames) {
        out.push(format!("I={population} seed={seed}: M {} / {} / {}", isic.frames, sic.frames, cap.frames));
    }
    Ok(out)
}
