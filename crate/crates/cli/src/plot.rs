use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plotters::prelude::*;
use psaloha::metrics::{residual_trace_aggregate, summarize};
use psaloha::{ChannelKind, ReceiverMode, ResultTable};

type Series = BTreeMap<(ReceiverMode, ChannelKind), Vec<(f64, f64)>>;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

/// Writes `<prefix>_throughput.svg`, `<prefix>_p98.svg` and
/// `<prefix>_residual.svg` and returns their paths.
pub fn render_all(table: &ResultTable, prefix: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        bail!("no rows to plot");
    }
    for mode in ReceiverMode::ALL {
        if !table.rows.iter().any(|r| r.mode == mode) {
            log::warn!("no `{mode}` rows; that receiver is missing from the plots");
        }
    }
    let summary = summarize(table);
    let mut throughput = Series::new();
    let mut p98 = Series::new();
    for s in &summary {
        if let Some(p) = &s.point {
            throughput.entry((s.mode, s.channel)).or_default().push((p.population as f64, p.throughput));
            if let Some(m) = s.p98_frames {
                p98.entry((s.mode, s.channel)).or_default().push((p.population as f64, m as f64));
            }
        }
    }
    let largest = table.rows.iter().map(|r| r.population).max().unwrap_or(0);
    let mut residual = Series::new();
    for (mode, channel, population) in table.cells() {
        if population != largest {
            continue;
        }
        let traces: Vec<&[u32]> = table.cell(mode, channel, population).map(|r| &r.residual_trace[..]).collect();
        let mean = residual_trace_aggregate(&traces);
        residual.insert((mode, channel), mean.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect());
    }

    let path = |suffix: &str| {
        let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    let files = vec![path("_throughput.svg"), path("_p98.svg"), path("_residual.svg")];
    line_chart(&files[0], "Throughput vs. population", "tag population I", "normalised throughput P", &throughput)?;
    line_chart(&files[1], "98th-percentile reading time", "tag population I", "frames M (98th percentile)", &p98)?;
    line_chart(
        &files[2],
        &format!("Residual tags per frame, I = {largest}"),
        "frame index",
        "mean residual tags",
        &residual,
    )?;
    Ok(files)
}

fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &Series) -> Result<()> {
    let points = series.values().flatten();
    let x_max = points.clone().map(|p| p.0).fold(1.0, f64::max);
    let y_max = points.map(|p| p.1).fold(0.0, f64::max).max(1e-9) * 1.1;
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(64)
        .build_cartesian_2d(0.0..x_max * 1.02, 0.0..y_max)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw()?;
    for (n, ((mode, channel), pts)) in series.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(format!("{mode} / {channel}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
