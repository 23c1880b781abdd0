mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use psaloha::golden::{self, GoldenFile};
use psaloha::metrics::{emit_csv, load_csv, summarize, write_summary_csv};
use psaloha::sim::run_spec;
use psaloha::{ChannelKind, ExperimentSpec, ReceiverMode, DEFAULT_INTERLEAVER_SEED};

/// Pseudo-random framed slotted Aloha simulator with inter-frame SIC.
#[derive(Parser, Debug)]
#[command(name = "psaloha", version)]
struct Cli {
    /// More logging; `-vv` traces every ISIC message.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment file and write results.csv and summary.csv.
    Run(RunArgs),
    /// Render SVG figures from a results CSV.
    Plot {
        csv: PathBuf,
        /// Output path prefix; `_throughput.svg`, `_p98.svg` and `_residual.svg` are appended.
        #[arg(long, default_value = "figure")]
        out_prefix: PathBuf,
    },
    /// Emit or verify slot-hash golden vectors.
    #[command(subcommand)]
    Golden(GoldenCommand),
}

#[derive(Args, Debug)]
struct RunArgs {
    spec: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated receivers to run (capture, sic, isic).
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<ReceiverMode>>,
    /// Run a single channel instead of the file's list.
    #[arg(long)]
    channel: Option<ChannelKind>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Incomplete cycles tolerated before exiting with status 2.
    #[arg(long, default_value_t = 0)]
    incomplete_budget: usize,
    /// Also render the figures next to the CSV files.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand, Debug)]
enum GoldenCommand {
    /// Print a fresh golden-vector file.
    Emit {
        #[arg(long, default_value_t = 128)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_INTERLEAVER_SEED)]
        interleaver_seed: u64,
        /// Seed for the random tag IDs.
        #[arg(long, default_value_t = 1)]
        id_seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a golden-vector file against this implementation.
    Verify { file: PathBuf },
}

enum Failure {
    Error(anyhow::Error),
    Budget { incomplete: usize, budget: usize },
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Plot { csv, out_prefix } => plot_csv(&csv, &out_prefix).map_err(Failure::from),
        Command::Golden(cmd) => golden_cmd(cmd).map_err(Failure::from),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Budget { incomplete, budget }) => {
            eprintln!("error: {incomplete} incomplete cycles exceed the budget of {budget}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(&args.spec).with_context(|| format!("loading {}", args.spec.display()))?;
    if let Some(modes) = &args.modes {
        spec.modes = modes.clone();
    }
    if let Some(channel) = args.channel {
        spec.config.channel = channel;
        spec.channels = vec![channel];
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        spec.out_dir = Some(dir.clone());
    }
    spec.ensure_valid()?;
    Ok(spec)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let spec = load_spec(&args)?;
    let out_dir = spec.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    log::info!(
        "running I={:?} x {} replications, modes {:?}, channels {:?}",
        spec.populations,
        spec.replications,
        spec.modes,
        spec.effective_channels()
    );
    let table = pool.install(|| run_spec(&spec)).context("simulation failed")?;

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let results = out_dir.join("results.csv");
    emit_csv(&table, &results).context("writing results.csv")?;
    let summary = summarize(&table);
    let file = fs::File::create(out_dir.join("summary.csv")).context("creating summary.csv")?;
    write_summary_csv(&summary, file).context("writing summary.csv")?;
    for s in &summary {
        match &s.point {
            Some(p) => println!(
                "{:<8} {:<9} I={:<6} P={:.4} ±{:.4} mean M={:.2} p98 M={} incomplete={}",
                s.mode.as_str(),
                s.channel.as_str(),
                p.population,
                p.throughput,
                p.ci95,
                p.mean_frames,
                s.p98_frames.map_or("-".into(), |m| m.to_string()),
                s.incomplete
            ),
            None => println!("{:<8} {:<9} all {} cycles incomplete", s.mode.as_str(), s.channel.as_str(), s.cycles),
        }
    }
    if args.plot {
        for f in plot::render_all(&table, &out_dir.join("figure"))? {
            log::info!("wrote {}", f.display());
        }
    }
    let incomplete = table.incomplete();
    if incomplete > args.incomplete_budget {
        return Err(Failure::Budget { incomplete, budget: args.incomplete_budget });
    }
    Ok(())
}

fn plot_csv(csv: &Path, prefix: &Path) -> Result<()> {
    let table = load_csv(csv).with_context(|| format!("reading {}", csv.display()))?;
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    for f in plot::render_all(&table, prefix)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn golden_cmd(cmd: GoldenCommand) -> Result<()> {
    match cmd {
        GoldenCommand::Emit { count, interleaver_seed, id_seed, output } => {
            let text = GoldenFile::generate(interleaver_seed, count, id_seed)?.render();
            match output {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        GoldenCommand::Verify { file } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let v = golden::verify(&text)?;
            for (vector, got) in &v.mismatches {
                eprintln!(
                    "mismatch: {} r={} K={} expected {} got {got}",
                    vector.tag, vector.frame_index, vector.slots_per_frame, vector.slot
                );
            }
            if !v.passed() {
                anyhow::bail!(
                    "{} of {} vectors differ; byte-identical: {}",
                    v.mismatches.len(),
                    v.checked,
                    v.byte_identical
                );
            }
            println!("{} vectors verified", v.checked);
            Ok(())
        }
    }
}
