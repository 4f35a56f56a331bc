//! `qtgate` — clickthrough mining, translation serving, and evaluation in
//! one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Print a line to stdout, ignoring broken pipes (e.g. `qtgate mine | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use config::AppConfig;
use qtgate_core::clickstream::{ClickLogReader, LogFormat};
use qtgate_core::clock::{Clock, VirtualClock, WallClock};
use qtgate_core::corpus;
use qtgate_core::ireval::{EvalReport, MetricOptions, Qrels, RankedRun};
use qtgate_core::loadsim;
use qtgate_core::miner::{
    self, Aggregator, Axis, MiningThresholds, Ratio, ThresholdMode, UserCounting,
};

#[derive(Parser)]
#[command(
    name = "qtgate",
    version,
    about = "Cross-lingual query translation toolkit"
)]
struct Cli {
    /// Seed for anything randomized (workload sampling, latency draws).
    /// Overrides the config file's workload seed when given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON configuration file (translators, gateway, workload).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine query translation pairs from a click log.
    Mine(MineArgs),
    /// Histogram of pair statistics along an axis.
    Report(ReportArgs),
    /// Assemble a training-corpus manifest from mined pairs.
    Corpus(CorpusArgs),
    /// Word coverage of a test corpus against a training corpus.
    Coverage(CoverageArgs),
    /// Serve translations over HTTP.
    Serve(ServeArgs),
    /// Replay a synthetic workload under a virtual clock.
    Simulate(SimulateArgs),
    /// Score a retrieval run against relevance judgments.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    #[value(name = "tsv-v1")]
    TsvV1,
    #[value(name = "jsonl-v1")]
    JsonlV1,
}

impl From<FormatArg> for LogFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::TsvV1 => LogFormat::TsvV1,
            FormatArg::JsonlV1 => LogFormat::JsonlV1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CountingArg {
    #[value(name = "distinct-users")]
    DistinctUsers,
    #[value(name = "per-occurrence")]
    PerOccurrence,
}

impl From<CountingArg> for UserCounting {
    fn from(value: CountingArg) -> Self {
        match value {
            CountingArg::DistinctUsers => UserCounting::DistinctUsers,
            CountingArg::PerOccurrence => UserCounting::PerOccurrence,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Top,
    Bottom,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Luv,
    Ctr,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Jt,
    Ft,
}

#[derive(Args)]
struct MineArgs {
    /// Click log file.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value = "tsv-v1")]
    format: FormatArg,
    /// CTR threshold as a decimal, e.g. 0.7.
    #[arg(long)]
    eta: String,
    /// Minimum list unique views.
    #[arg(long, default_value_t = 15)]
    chi: u64,
    #[arg(long, value_enum, default_value = "top")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "distinct-users")]
    counting: CountingArg,
    /// Output file for the mined corpus TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value = "tsv-v1")]
    format: FormatArg,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated bucket edges, strictly increasing; `inf` allowed.
    #[arg(long)]
    edges: String,
    #[arg(long, value_enum, default_value = "distinct-users")]
    counting: CountingArg,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorpusArgs {
    /// Base parallel corpus (`source \t target` lines).
    #[arg(long)]
    base: PathBuf,
    /// Mined pairs file as written by `mine`.
    #[arg(long)]
    mined: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Times the mined data is repeated in a JT mix.
    #[arg(long, default_value_t = 1)]
    repeat_factor: u32,
    /// Directory for derived corpus files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Manifest output path (defaults to <out-dir>/manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Bind address, e.g. 127.0.0.1:8080.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Write the run report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the latency histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run file: `query_id doc_id rank score` lines.
    #[arg(long)]
    run: PathBuf,
    /// Qrels file: `query_id 0 doc_id relevance` lines.
    #[arg(long)]
    qrels: PathBuf,
    /// System label used in reports.
    #[arg(long, default_value = "system")]
    system: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Ranking depth cut for AP and P-R curves.
    #[arg(long, default_value_t = 1000)]
    depth: usize,
    /// Skip queries missing from the run instead of scoring them zero.
    #[arg(long)]
    skip_missing: bool,
    /// Include the 11-point interpolated P-R curve.
    #[arg(long)]
    pr_curve: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write a one-row CSV in the P@k/MAP/NDCG@k column layout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn data(err: impl std::fmt::Display) -> Self {
        AppError::Data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };

    let config = match &cli.config {
        Some(path) => match AppConfig::load(path) {
            Ok(config) => config,
            Err(message) => {
                eprintln!("error: {message}");
                return ExitCode::from(2);
            }
        },
        None => AppConfig::default(),
    };

    let result = match &cli.command {
        Command::Mine(args) => cmd_mine(args),
        Command::Report(args) => cmd_report(args),
        Command::Corpus(args) => cmd_corpus(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Serve(args) => cmd_serve(args, &config, cli.seed.unwrap_or(42)),
        Command::Simulate(args) => cmd_simulate(args, &config, &cli),
        Command::Evaluate(args) => cmd_evaluate(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(AppError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read_log(
    path: &PathBuf,
    format: LogFormat,
    counting: UserCounting,
) -> Result<(Vec<miner::PairStats>, u64, u64), AppError> {
    let file = std::fs::File::open(path)
        .map_err(|e| AppError::Data(format!("cannot open log {}: {e}", path.display())))?;
    let mut reader = ClickLogReader::new(file, format);
    let mut aggregator = Aggregator::new(counting);
    loop {
        match reader.next_record() {
            Ok(Some(record)) => aggregator.add(&record),
            Ok(None) => break,
            Err(e) => return Err(AppError::data(e)),
        }
    }
    let stats = reader.stats();
    Ok((aggregator.finish(), stats.emitted, stats.skipped))
}

fn parse_thresholds(eta: &str, chi: u64, mode: ModeArg) -> Result<MiningThresholds, AppError> {
    let eta = Ratio::from_decimal_str(eta).map_err(|e| AppError::Usage(e.to_string()))?;
    let mode = match mode {
        ModeArg::Top => ThresholdMode::Top,
        ModeArg::Bottom => ThresholdMode::Bottom,
    };
    MiningThresholds::new(eta, chi, mode).map_err(|e| AppError::Usage(e.to_string()))
}

fn cmd_mine(args: &MineArgs) -> Result<(), AppError> {
    let thresholds = parse_thresholds(&args.eta, args.chi, args.mode)?;
    let (stats, emitted, skipped) = read_log(&args.log, args.format.into(), args.counting.into())?;
    let mined = miner::filter(&stats, &thresholds);

    let file = std::fs::File::create(&args.out)
        .map_err(|e| AppError::Data(format!("cannot create {}: {e}", args.out.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    miner::write_mined_tsv(&mined, &mut writer).map_err(AppError::data)?;
    writer.flush().map_err(AppError::data)?;

    say!("records ingested: {emitted} (skipped: {skipped})");
    say!("pairs aggregated: {}", stats.len());
    say!("pairs mined: {}", mined.len());
    if !stats.is_empty() {
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let hist = miner::distribution_report(&stats, Axis::Ctr, &edges).map_err(AppError::data)?;
        say!("ctr histogram (all aggregated pairs):");
        for bucket in &hist.buckets {
            say!(
                "  [{:.1}, {:.1}): {:.4}",
                bucket.low, bucket.high, bucket.ratio
            );
        }
    }
    Ok(())
}

fn parse_edges(text: &str) -> Result<Vec<f64>, AppError> {
    text.split(',')
        .map(|token| {
            let token = token.trim();
            if token.eq_ignore_ascii_case("inf") || token == "+inf" {
                Ok(f64::INFINITY)
            } else {
                token
                    .parse::<f64>()
                    .map_err(|_| AppError::Usage(format!("bad bucket edge {token:?}")))
            }
        })
        .collect()
}

fn cmd_report(args: &ReportArgs) -> Result<(), AppError> {
    let edges = parse_edges(&args.edges)?;
    let axis = match args.axis {
        AxisArg::Luv => Axis::Luv,
        AxisArg::Ctr => Axis::Ctr,
    };
    let (stats, emitted, skipped) = read_log(&args.log, args.format.into(), args.counting.into())?;
    let hist = miner::distribution_report(&stats, axis, &edges).map_err(AppError::data)?;
    let file = std::fs::File::create(&args.out)
        .map_err(|e| AppError::Data(format!("cannot create {}: {e}", args.out.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    hist.write_csv(&mut writer).map_err(AppError::data)?;
    writer.flush().map_err(AppError::data)?;
    say!("records ingested: {emitted} (skipped: {skipped})");
    say!("histogram written to {}", args.out.display());
    Ok(())
}

fn cmd_corpus(args: &CorpusArgs) -> Result<(), AppError> {
    let mined_file = std::fs::File::open(&args.mined)
        .map_err(|e| AppError::Data(format!("cannot open {}: {e}", args.mined.display())))?;
    let mined = miner::read_mined_tsv(mined_file).map_err(AppError::data)?;
    let strategy = match args.strategy {
        StrategyArg::Jt => corpus::Strategy::JointTraining,
        StrategyArg::Ft => corpus::Strategy::FineTuning,
    };
    let manifest = corpus::build_manifest(
        &args.base,
        &mined,
        strategy,
        args.repeat_factor,
        &args.out_dir,
    )
    .map_err(AppError::data)?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.out_dir.join("manifest.json"));
    std::fs::write(&manifest_path, manifest.to_json()).map_err(AppError::data)?;
    say!(
        "manifest written to {} ({} stages, {} lines total)",
        manifest_path.display(),
        manifest.stages.len(),
        manifest.total_lines()
    );
    Ok(())
}

fn cmd_coverage(args: &CoverageArgs) -> Result<(), AppError> {
    let coverage = corpus::word_coverage(&args.train, &args.test).map_err(AppError::data)?;
    say!("{coverage:.6}");
    Ok(())
}

fn cmd_serve(args: &ServeArgs, config: &AppConfig, seed: u64) -> Result<(), AppError> {
    let clock: Arc<dyn Clock> = Arc::new(WallClock::new());
    let gateway = config.build_gateway(clock, seed).map_err(AppError::Data)?;
    let handle = qtgate_core::gateway::http::serve(Arc::new(gateway), args.addr.as_str())
        .map_err(|e| AppError::Data(format!("cannot bind {}: {e}", args.addr)))?;
    say!("listening on http://{}", handle.local_addr());
    say!("endpoints: /translate?q=<urlencoded>  /stats");
    loop {
        std::thread::park();
    }
}

fn cmd_simulate(args: &SimulateArgs, config: &AppConfig, cli: &Cli) -> Result<(), AppError> {
    let spec = config.workload_spec(cli.seed);
    let workload = loadsim::generate(&spec).map_err(AppError::data)?;
    let clock = Arc::new(VirtualClock::new());
    let gateway = config
        .build_gateway(clock.clone() as Arc<dyn Clock>, cli.seed.unwrap_or(spec.seed))
        .map_err(AppError::Data)?;
    let options = config.run_options();
    let report = loadsim::run(&workload, &gateway, &clock, &options);
    let json = report.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(AppError::data)?,
        None => say!("{json}"),
    }
    if let Some(path) = &args.histogram {
        let mut csv = String::from("bucket_low_ms,bucket_high_ms,count\n");
        for bucket in &report.stats.latency_histogram {
            let high = if bucket.high_ms.is_infinite() {
                "inf".to_string()
            } else {
                format!("{}", bucket.high_ms)
            };
            csv.push_str(&format!("{},{},{}\n", bucket.low_ms, high, bucket.count));
        }
        std::fs::write(path, csv).map_err(AppError::data)?;
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), AppError> {
    let run_file = std::fs::File::open(&args.run)
        .map_err(|e| AppError::Data(format!("cannot open {}: {e}", args.run.display())))?;
    let run = RankedRun::from_reader(run_file).map_err(AppError::data)?;
    let qrels_file = std::fs::File::open(&args.qrels)
        .map_err(|e| AppError::Data(format!("cannot open {}: {e}", args.qrels.display())))?;
    let qrels = Qrels::from_reader(qrels_file).map_err(AppError::data)?;
    let options = MetricOptions {
        depth: args.depth,
        skip_missing: args.skip_missing,
    };
    let report = EvalReport::compute(&args.system, &run, &qrels, args.k, options, args.pr_curve)
        .map_err(AppError::data)?;
    let json = report.to_json();
    match &args.json {
        Some(path) => std::fs::write(path, json + "\n").map_err(AppError::data)?,
        None => say!("{json}"),
    }
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).map_err(AppError::data)?;
        let mut writer = std::io::BufWriter::new(file);
        report
            .write_csv_header(&mut writer)
            .map_err(AppError::data)?;
        report.write_csv_row(&mut writer).map_err(AppError::data)?;
        writer.flush().map_err(AppError::data)?;
    }
    Ok(())
}
