//! Throughput, reading-time percentiles, residual traces and CSV I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelKind;
use crate::error::{Error, Result};
use crate::model::ReceiverMode;
use crate::sim::{CycleRow, ResultTable};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Normalised throughput `P = I / (K * E[M])` for one population size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub population: usize,
    pub slots_per_frame: u32,
    pub samples: usize,
    pub mean_frames: f64,
    pub throughput: f64,
    /// Half-width of the 95% normal-approximation interval on `throughput`,
    /// propagated from the interval on the mean frame count.
    pub ci95: f64,
}

/// Throughput over the frame counts of complete cycles.
pub fn throughput(population: usize, slots_per_frame: u32, frames: &[u32]) -> Result<ThroughputPoint> {
    if frames.is_empty() {
        return Err(Error::NoCompleteCycles(0));
    }
    let n = frames.len() as f64;
    let mean = frames.iter().map(|&m| m as f64).sum::<f64>() / n;
    let p = population as f64 / (slots_per_frame as f64 * mean);
    let ci95 = if frames.len() > 1 {
        let var = frames.iter().map(|&m| (m as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        p * Z95 * (var / n).sqrt() / mean
    } else {
        0.0
    };
    Ok(ThroughputPoint { population, slots_per_frame, samples: frames.len(), mean_frames: mean, throughput: p, ci95 })
}

/// Nearest-rank percentile: the `ceil(q * n)`-th smallest sample.
pub fn percentile<T: Copy + Ord>(samples: &[T], q: f64) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantile(q));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // absorb representation error such as 0.98 * 50 = 49.000000000000004
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Per-frame mean of residual traces; shorter traces are padded with zeros.
pub fn residual_trace_aggregate<T: AsRef<[u32]>>(traces: &[T]) -> Vec<f64> {
    let len = traces.iter().map(|t| t.as_ref().len()).max().unwrap_or(0);
    let n = traces.len() as f64;
    (0..len).map(|i| traces.iter().map(|t| t.as_ref().get(i).copied().unwrap_or(0) as f64).sum::<f64>() / n).collect()
}

/// Aggregate metrics of one (mode, channel, I) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: ReceiverMode,
    pub channel: ChannelKind,
    pub slots_per_frame: u32,
    pub population: usize,
    pub cycles: usize,
    pub incomplete: usize,
    /// `None` when every cycle of the cell hit the frame cap.
    pub point: Option<ThroughputPoint>,
    /// 98th percentile of M over complete cycles.
    pub p98_frames: Option<u32>,
}

pub fn summarize_cell<'a>(rows: impl IntoIterator<Item = &'a CycleRow>) -> Option<SummaryRow> {
    let rows: Vec<&CycleRow> = rows.into_iter().collect();
    let first = rows.first()?;
    let complete: Vec<u32> = rows.iter().filter(|r| r.complete).map(|r| r.frames).collect();
    Some(SummaryRow {
        mode: first.mode,
        channel: first.channel,
        slots_per_frame: first.slots_per_frame,
        population: first.population,
        cycles: rows.len(),
        incomplete: rows.len() - complete.len(),
        point: throughput(first.population, first.slots_per_frame, &complete).ok(),
        p98_frames: percentile(&complete, 0.98).ok(),
    })
}

/// One summary row per (mode, channel, I) cell, in table order.
pub fn summarize(table: &ResultTable) -> Vec<SummaryRow> {
    table.cells().into_iter().filter_map(|(mode, channel, i)| summarize_cell(table.cell(mode, channel, i))).collect()
}

pub const CSV_HEADER: [&str; 9] =
    ["mode", "channel", "K", "I", "replication", "seed", "M", "complete", "residual_trace"];

/// Writes the raw per-cycle records, one row per cycle, in sorted order.
pub fn write_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut rows: Vec<&CycleRow> = table.rows.iter().collect();
    rows.sort_by_key(|r| (r.mode, r.channel, r.population, r.replication));
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::NonNumeric).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let trace = r.residual_trace.iter().map(u32::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.mode.as_str().to_string(),
            r.channel.as_str().to_string(),
            r.slots_per_frame.to_string(),
            r.population.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.frames.to_string(),
            r.complete.to_string(),
            trace,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    write_csv(table, BufWriter::new(File::create(path)?))
}

pub fn read_csv<R: Read>(input: R) -> Result<ResultTable> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Malformed("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Malformed(format!("missing column {}", CSV_HEADER[i])));
        let num = |i: usize| -> Result<u64> {
            field(i)?.parse().map_err(|_| Error::Malformed(format!("bad {} `{}`", CSV_HEADER[i], &rec[i])))
        };
        let trace = field(8)?;
        let residual_trace = if trace.is_empty() {
            Vec::new()
        } else {
            trace
                .split(';')
                .map(|v| v.parse().map_err(|_| Error::Malformed(format!("bad residual count `{v}`"))))
                .collect::<Result<Vec<u32>>>()?
        };
        rows.push(CycleRow {
            mode: field(0)?.parse()?,
            channel: field(1)?.parse()?,
            slots_per_frame: num(2)? as u32,
            population: num(3)? as usize,
            replication: num(4)? as usize,
            seed: num(5)?,
            frames: num(6)? as u32,
            complete: field(7)?.parse().map_err(|_| Error::Malformed(format!("bad complete flag `{}`", &rec[7])))?,
            residual_trace,
        });
    }
    Ok(ResultTable { rows })
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<ResultTable> {
    read_csv(BufReader::new(File::open(path)?))
}

pub const SUMMARY_HEADER: [&str; 10] =
    ["mode", "channel", "K", "I", "cycles", "incomplete", "mean_M", "P", "ci95", "p98_M"];

/// Writes one line per cell with throughput, interval and percentile.
pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            s.mode.as_str().to_string(),
            s.channel.as_str().to_string(),
            s.slots_per_frame.to_string(),
            s.population.to_string(),
            s.cycles.to_string(),
            s.incomplete.to_string(),
            opt(s.point.as_ref().map(|p| p.mean_frames.to_string())),
            opt(s.point.as_ref().map(|p| p.throughput.to_string())),
            opt(s.point.as_ref().map(|p| p.ci95.to_string())),
            opt(s.p98_frames.map(|m| m.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}
