//! Command-line front door: synthesize traces, train detectors,
//! classify test samples, and run parameter sweeps.
//!
//! Exit codes: 0 on success, 2 for usage or configuration problems
//! (including unreadable inputs and settings that conflict with a
//! trained model), 1 for failures while processing data.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfstl::ensemble::CollapseMode;
use mfstl::eval::{
    cluster_sweep, param_sweep, write_cluster_csv, write_sweep_csv, DEFAULT_THRESHOLD_GRID,
    DEFAULT_WINDOW_GRID,
};
use mfstl::flow::{parse_flows, write_flows, FlowRecord, NodeMode};
use mfstl::graph::EdgeMode;
use mfstl::metrics::characteristic_series;
use mfstl::pipeline::{
    detect, labeled_split, train, write_report_csv, write_summary_csv, RunConfig, TrainedModel,
};
use mfstl::similarity::{collect_similarity_samples, entropy_weights, ServicePortMap};
use mfstl::synth::{ScanPattern, SynthConfig};

#[derive(Parser)]
#[command(name = "mfstl", version, about = "Flow-interaction graph anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled trace CSV.
    Synth(SynthCmd),
    /// Train a detector from a labeled trace and write the model file.
    Train(TrainCmd),
    /// Classify the test portion of a trace with a trained model.
    Detect(DetectCmd),
    /// Sweep build parameters and cluster sizes, writing plot-ready CSVs.
    Sweep(SweepCmd),
}

#[derive(Args)]
struct SynthCmd {
    /// Output trace CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Trace length in seconds.
    #[arg(long, default_value_t = 600.0)]
    duration: f64,
    /// Background flows per second.
    #[arg(long, default_value_t = 50.0)]
    rate: f64,
    /// Attack window as `start:end` seconds; repeat for several windows.
    #[arg(long = "attack")]
    attacks: Vec<String>,
    /// Scan flows per second inside attack windows.
    #[arg(long = "attack-rate", default_value_t = 200.0)]
    attack_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct TrainCmd {
    /// Labeled trace CSV.
    #[arg(long)]
    input: PathBuf,
    /// Output model JSON path.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct DetectCmd {
    /// Trace CSV; its test portion is classified.
    #[arg(long)]
    input: PathBuf,
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Directory for report.csv and summary.csv.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Param,
    Cluster,
    Both,
}

#[derive(Args)]
struct SweepCmd {
    /// Labeled trace CSV (labels are only needed for the cluster sweep).
    #[arg(long)]
    input: PathBuf,
    /// Directory for sweep.csv and cluster.csv.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
    /// Which sweep to run.
    #[arg(long, value_enum, default_value_t = SweepKind::Both)]
    kind: SweepKind,
    /// Comma-separated locality windows, e.g. `0.05,0.1,0.2`.
    #[arg(long = "dw-grid")]
    dw_grid: Option<String>,
    /// Comma-separated similarity thresholds.
    #[arg(long = "rc-grid")]
    rc_grid: Option<String>,
    /// Comma-separated interval counts for the cluster sweep.
    #[arg(long = "m-grid")]
    m_grid: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum NodeModeArg {
    FiveTuple,
    TwoTuple,
}

impl From<NodeModeArg> for NodeMode {
    fn from(v: NodeModeArg) -> NodeMode {
        match v {
            NodeModeArg::FiveTuple => NodeMode::FiveTuple,
            NodeModeArg::TwoTuple => NodeMode::TwoTuple,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EdgeModeArg {
    Weighted,
    Unweighted,
}

impl From<EdgeModeArg> for EdgeMode {
    fn from(v: EdgeModeArg) -> EdgeMode {
        match v {
            EdgeModeArg::Weighted => EdgeMode::Weighted,
            EdgeModeArg::Unweighted => EdgeMode::Unweighted,
        }
    }
}

/// Run-config knobs shared by train, detect, and sweep. Flags override
/// the optional config file, which overrides the defaults.
#[derive(Args)]
struct ConfigArgs {
    /// JSON run-config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample partition width in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Locality window in seconds.
    #[arg(long)]
    dw: Option<f64>,
    /// Similarity threshold for edges.
    #[arg(long)]
    rc: Option<f64>,
    /// Interval count per characteristic model.
    #[arg(long)]
    m: Option<usize>,
    /// Boundary membership parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Yager nonmembership parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Distinction threshold for ensemble membership.
    #[arg(long = "tau-c")]
    tau_c: Option<f64>,
    /// Distribution-band width parameter.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Chronological train fraction.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Service port map file with `port_or_range,name` lines.
    #[arg(long = "port-map")]
    port_map: Option<PathBuf>,
    #[arg(long = "node-mode", value_enum)]
    node_mode: Option<NodeModeArg>,
    #[arg(long = "edge-mode", value_enum)]
    edge_mode: Option<EdgeModeArg>,
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn runtime(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

impl ConfigArgs {
    /// Builds the effective config: `base`, overridden by the config
    /// file when given, overridden by explicit flags.
    fn resolve(&self, base: RunConfig) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let file = File::open(path)
                    .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
                serde_json::from_reader(BufReader::new(file))
                    .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
            }
            None => base,
        };
        if let Some(v) = self.dt {
            config.sample_window = v;
        }
        if let Some(v) = self.dw {
            config.locality_window = v;
        }
        if let Some(v) = self.rc {
            config.similarity_threshold = v;
        }
        if let Some(v) = self.m {
            config.intervals = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.tau_c {
            config.tau_threshold = v;
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = self.split {
            config.split_ratio = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.node_mode {
            config.node_mode = v.into();
        }
        if let Some(v) = self.edge_mode {
            config.edge_mode = v.into();
        }
        config.validate().map_err(usage)?;
        Ok(config)
    }

    fn load_port_map(&self) -> CliResult<Option<ServicePortMap>> {
        match &self.port_map {
            Some(path) => {
                let file = File::open(path)
                    .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
                let map = ServicePortMap::from_reader(BufReader::new(file)).map_err(usage)?;
                Ok(Some(map))
            }
            None => Ok(None),
        }
    }
}

fn read_trace(path: &Path) -> CliResult<Vec<FlowRecord>> {
    let file =
        File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    parse_flows(BufReader::new(file)).map_err(runtime)
}

fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    let file =
        File::create(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn parse_grid<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| usage(format!("bad {what} entry `{}`", part.trim())))
        })
        .collect()
}

fn run_synth(cmd: &SynthCmd) -> CliResult<()> {
    let mut windows = Vec::new();
    for spec in &cmd.attacks {
        let (start, end) = spec
            .split_once(':')
            .ok_or_else(|| usage(format!("bad attack window `{spec}`, expected `start:end`")))?;
        let start: f64 = start
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad attack window start `{start}`")))?;
        let end: f64 = end
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad attack window end `{end}`")))?;
        windows.push((start, end));
    }
    let config = SynthConfig {
        duration: cmd.duration,
        background_rate: cmd.rate,
        attack_windows: windows,
        attack: ScanPattern {
            rate: cmd.attack_rate,
            ..ScanPattern::default()
        },
        seed: cmd.seed,
        ..SynthConfig::default()
    };
    let records = mfstl::synth::synth_trace(&config).map_err(usage)?;
    let mut out = create_output(&cmd.out)?;
    write_flows(&mut out, &records).map_err(runtime)?;
    println!("wrote {} flows to {}", records.len(), cmd.out.display());
    Ok(())
}

fn run_train(cmd: &TrainCmd) -> CliResult<()> {
    let config = cmd.config.resolve(RunConfig::default())?;
    let map = cmd.config.load_port_map()?.unwrap_or_default();
    let records = read_trace(&cmd.input)?;
    let model = train(&records, &config, &map).map_err(runtime)?;
    let mut out = create_output(&cmd.model)?;
    model.save(&mut out).map_err(runtime)?;
    let mut selected = Vec::new();
    for (&i, &w) in model.ensemble.selected.iter().zip(&model.ensemble.weights) {
        let tau = model.characteristics[i].tau().unwrap_or(0.0);
        selected.push(format!(
            "{} (tau {tau:.3}, weight {w:.3})",
            mfstl::metrics::CHARACTERISTIC_NAMES[i]
        ));
    }
    println!("model written to {}", cmd.model.display());
    println!("ensemble: {}", selected.join(", "));
    Ok(())
}

fn load_model(path: &Path) -> CliResult<TrainedModel> {
    let file =
        File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    TrainedModel::load(BufReader::new(file))
        .map_err(|e| usage(format!("bad model {}: {e}", path.display())))
}

fn run_detect(cmd: &DetectCmd) -> CliResult<()> {
    let model = load_model(&cmd.model)?;
    let effective = cmd.config.resolve(model.config.clone())?;
    effective
        .ensure_compatible(&model.config)
        .map_err(|e| usage(format!("{e}; retrain or drop the conflicting flags")))?;
    if let Some(map) = cmd.config.load_port_map()? {
        if map != model.port_map {
            return Err(usage(
                "--port-map differs from the map embedded in the model",
            ));
        }
    }
    let records = read_trace(&cmd.input)?;
    let report = detect(&records, &model).map_err(runtime)?;
    std::fs::create_dir_all(&cmd.out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", cmd.out_dir.display())))?;
    let report_path = cmd.out_dir.join("report.csv");
    write_report_csv(create_output(&report_path)?, &report.rows).map_err(runtime)?;
    let summary_path = cmd.out_dir.join("summary.csv");
    write_summary_csv(create_output(&summary_path)?, &report.summaries).map_err(runtime)?;
    println!(
        "classified {} test samples; wrote {} and {}",
        report.rows.len(),
        report_path.display(),
        summary_path.display()
    );
    for s in &report.summaries {
        println!(
            "{}: acc {:.4} pre {:.4} rec {:.4} f1 {:.4}",
            s.detector, s.score.accuracy, s.score.precision, s.score.recall, s.score.f1
        );
    }
    Ok(())
}

fn run_sweep(cmd: &SweepCmd) -> CliResult<()> {
    let config = cmd.config.resolve(RunConfig::default())?;
    let map = cmd.config.load_port_map()?.unwrap_or_default();
    let records = read_trace(&cmd.input)?;
    std::fs::create_dir_all(&cmd.out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", cmd.out_dir.display())))?;

    let split = labeled_split(&records, &config).map_err(runtime)?;
    let pairs = collect_similarity_samples(
        &split.train,
        config.locality_window,
        config.node_mode,
        config.protocol_filter.as_ref(),
        &map,
        config.pair_cap,
    );
    let weights = entropy_weights(&pairs).map_err(runtime)?;

    if cmd.kind != SweepKind::Cluster {
        let windows = match &cmd.dw_grid {
            Some(text) => parse_grid::<f64>(text, "dw grid")?,
            None => DEFAULT_WINDOW_GRID.to_vec(),
        };
        let thresholds = match &cmd.rc_grid {
            Some(text) => parse_grid::<f64>(text, "rc grid")?,
            None => DEFAULT_THRESHOLD_GRID.to_vec(),
        };
        let mut samples = split.train.clone();
        samples.extend(split.test.iter().cloned());
        let grid = param_sweep(
            &samples,
            &windows,
            &thresholds,
            &config.build_params(),
            &weights,
            &map,
        )
        .map_err(runtime)?;
        let path = cmd.out_dir.join("sweep.csv");
        write_sweep_csv(create_output(&path)?, &grid).map_err(runtime)?;
        println!("wrote {}", path.display());
    }

    if cmd.kind != SweepKind::Param {
        let interval_counts = match &cmd.m_grid {
            Some(text) => parse_grid::<usize>(text, "m grid")?,
            None => (2..=12).collect(),
        };
        let params = config.build_params();
        let train_series =
            characteristic_series(&split.train, &params, &weights, &map).map_err(runtime)?;
        let test_series =
            characteristic_series(&split.test, &params, &weights, &map).map_err(runtime)?;
        let labels_of = |samples: &[mfstl::flow::SamplePartition]| -> Vec<mfstl::flow::Label> {
            samples
                .iter()
                .map(|s| s.label.expect("labeled_split labels every sample"))
                .collect()
        };
        let rows = cluster_sweep(
            &train_series,
            &labels_of(&split.train),
            &test_series,
            &labels_of(&split.test),
            &interval_counts,
            &config.train_params(),
            config.tau_threshold,
            config.collapse,
        )
        .map_err(runtime)?;
        let path = cmd.out_dir.join("cluster.csv");
        write_cluster_csv(create_output(&path)?, &rows).map_err(runtime)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(cmd) => run_synth(cmd),
        Command::Train(cmd) => run_train(cmd),
        Command::Detect(cmd) => run_detect(cmd),
        Command::Sweep(cmd) => run_sweep(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
