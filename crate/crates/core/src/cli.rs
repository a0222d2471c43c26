//! `mtp` command line: `synth`, `run`, `eval` and `bench`.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags or flag
//! combinations), 3 for data errors (unreadable or inconsistent inputs).
//! `MTP_THREADS` overrides the worker thread count.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::evaluation::{
    classify_errors, evaluate, histogram_csv, pair_sequence, shared_errors, tables_csv, ErrorEvent, EvalConfig,
    MetricsReport,
};
use crate::geometry::MatchingMode;
use crate::pipeline::{bench, content_hash, load_run, run, save_run, RunFiles, RunMode};
use crate::scenario::{
    parse_scenario, synth_clutter, synth_crossing, synth_dropout, synth_lanes, write_scenario, ClutterParams,
    CrossingParams, DropWindow, DropoutParams, LaneParams, Scenario, SynthError,
};
use crate::tracker::{PipelineConfig, PredictorNoise};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const THREADS_ENV: &str = "MTP_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "mtp", version, about = "Multi-hypothesis tracking and trajectory prediction")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic scenarios.
    Synth(SynthArgs),
    /// Track and predict on a scenario, writing logs to a run directory.
    Run(RunArgs),
    /// Score one or more runs against the scenario's ground truth.
    Eval(EvalArgs),
    /// Time tracking and prediction for several hypothesis counts.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Crossing,
    Lanes,
    Dropout,
    Clutter,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OnOff {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Preset {
    Kitti,
    Nuscenes,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PredictorKind {
    Cv,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file, or output directory with --count.
    #[arg(long)]
    out: PathBuf,
    /// Generate a suite with seeds seed..seed+count.
    #[arg(long)]
    count: Option<u64>,
    #[arg(long)]
    frames: Option<u32>,
    #[arg(long)]
    fps: Option<f64>,
    /// Meters per frame.
    #[arg(long)]
    speed: Option<f64>,
    /// Detection center noise, meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Crossing: half the angle between the two headings, degrees.
    #[arg(long)]
    half_angle: Option<f64>,
    /// Crossing: frame at which both agents reach the origin.
    #[arg(long)]
    cross_frame: Option<u32>,
    #[arg(long)]
    agents: Option<u32>,
    #[arg(long)]
    lane_spacing: Option<f64>,
    /// Dropout: per-frame miss probability.
    #[arg(long)]
    drop_prob: Option<f64>,
    /// Dropout: `agent:start:end` (inclusive), repeatable.
    #[arg(long = "drop-window", value_parser = parse_window)]
    drop_windows: Vec<DropWindow>,
    /// Clutter: mean new false detections per frame.
    #[arg(long)]
    clutter_rate: Option<f64>,
    #[arg(long)]
    clutter_persistence: Option<u32>,
}

fn parse_window(s: &str) -> Result<DropWindow, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [agent, start, end] = parts.as_slice() else {
        return Err(format!("expected agent:start:end, got `{s}`"));
    };
    let num = |x: &str| x.parse::<u32>().map_err(|e| format!("`{x}`: {e}"));
    Ok(DropWindow {
        agent: num(agent)?,
        start: num(start)?,
        end: num(end)?,
    })
}

/// Pipeline flags shared by `run` and `bench`.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// Base configuration; individual flags override it.
    #[arg(long, value_enum, default_value = "kitti")]
    preset: Preset,
    /// Samples per tracklet (k).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long, value_enum)]
    matching: Option<MatchingArg>,
    /// IoU threshold (iou3d) or center distance in meters (center2d).
    #[arg(long)]
    gate: Option<f64>,
    #[arg(long)]
    past_len: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "off")]
    sampling: OnOff,
    #[arg(long, value_enum, default_value = "cv")]
    predictor: PredictorKind,
    #[arg(long)]
    sigma_speed: Option<f64>,
    #[arg(long)]
    sigma_heading: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MatchingArg {
    Iou3d,
    Center2d,
}

impl ConfigArgs {
    fn config(&self) -> PipelineConfig {
        let mut cfg = match self.preset {
            Preset::Kitti => PipelineConfig::kitti(),
            Preset::Nuscenes => PipelineConfig::nuscenes(),
        };
        if let Some(m) = self.matching {
            cfg.matching = match m {
                MatchingArg::Iou3d => MatchingMode::Iou3d,
                MatchingArg::Center2d => MatchingMode::Center2d,
            };
            cfg.gate = match m {
                MatchingArg::Iou3d => 0.5,
                MatchingArg::Center2d => 2.0,
            };
        }
        if let Some(g) = self.gate {
            cfg.gate = g;
        }
        if let Some(k) = self.samples {
            cfg.samples = k as usize;
        }
        if let Some(p) = self.past_len {
            cfg.past_len = p;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg.sampling = self.sampling == OnOff::On;
        let PredictorKind::Cv = self.predictor;
        cfg.predictor = PredictorNoise {
            sigma_speed: self.sigma_speed.unwrap_or(cfg.predictor.sigma_speed),
            sigma_heading: self.sigma_heading.unwrap_or(cfg.predictor.sigma_heading),
        };
        cfg.rng_seed = self.seed;
        cfg
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Hypotheses kept per frame (H).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    hypotheses: u64,
    /// Ranked assignments per parent; defaults to H.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    children_per_parent: Option<u64>,
    /// Predict from ground-truth pasts instead of tracklets.
    #[arg(long, conflicts_with = "stp")]
    gt_past: bool,
    /// Use the single-hypothesis code path (requires H = 1).
    #[arg(long)]
    stp: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Run directory; repeat to compare runs side by side. The first
    /// single-hypothesis run selects the IDS/FRAG subsets for all runs.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10, 20])]
    hypotheses: Vec<usize>,
    /// Timed runs per H, after one warm-up run.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn flag_of(param: &str) -> String {
    let flag = match param {
        "half_angle_deg" => "half-angle",
        "lane_spacing" => "lane-spacing",
        "drop_prob" => "drop-prob",
        "rate" => "clutter-rate",
        "persistence" => "clutter-persistence",
        "cross_frame" => "cross-frame",
        "windows" => "drop-window",
        other => other,
    };
    format!("--{flag}")
}

fn synth_usage(e: SynthError) -> CliError {
    CliError::Usage(format!("{}: {}", flag_of(e.param), e.reason))
}

fn lane_params(a: &SynthArgs) -> LaneParams {
    let d = LaneParams::default();
    LaneParams {
        agents: a.agents.unwrap_or(d.agents),
        frames: a.frames.unwrap_or(d.frames),
        fps: a.fps.unwrap_or(d.fps),
        speed: a.speed.unwrap_or(d.speed),
        lane_spacing: a.lane_spacing.unwrap_or(d.lane_spacing),
        sigma: a.sigma.unwrap_or(d.sigma),
        start_x: d.start_x,
    }
}

fn generate(a: &SynthArgs, seed: u64) -> CliResult<(Scenario, serde_json::Value)> {
    let (scenario, params) = match a.kind {
        Kind::Crossing => {
            let d = CrossingParams::default();
            let p = CrossingParams {
                frames: a.frames.unwrap_or(d.frames),
                fps: a.fps.unwrap_or(d.fps),
                speed: a.speed.unwrap_or(d.speed),
                half_angle_deg: a.half_angle.unwrap_or(d.half_angle_deg),
                sigma: a.sigma.unwrap_or(d.sigma),
                cross_frame: a.cross_frame.or(d.cross_frame),
            };
            (synth_crossing(&p, seed).map_err(synth_usage)?, to_value(&p))
        }
        Kind::Lanes => {
            let p = lane_params(a);
            (synth_lanes(&p, seed).map_err(synth_usage)?, to_value(&p))
        }
        Kind::Dropout => {
            let p = DropoutParams {
                lanes: lane_params(a),
                windows: a.drop_windows.clone(),
                drop_prob: a.drop_prob.unwrap_or(0.1),
            };
            (synth_dropout(&p, seed).map_err(synth_usage)?, to_value(&p))
        }
        Kind::Clutter => {
            let d = ClutterParams::default();
            let p = ClutterParams {
                lanes: lane_params(a),
                rate: a.clutter_rate.unwrap_or(1.0),
                persistence: a.clutter_persistence.unwrap_or(d.persistence),
                ..d
            };
            (synth_clutter(&p, seed).map_err(synth_usage)?, to_value(&p))
        }
    };
    Ok((scenario, params))
}

fn to_value(p: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(p).expect("generator params serialize")
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    write_file(path, text.as_bytes())
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Crossing => "crossing",
        Kind::Lanes => "lanes",
        Kind::Dropout => "dropout",
        Kind::Clutter => "clutter",
    }
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let (seeds, dir, single) = match a.count {
        Some(0) => return Err(CliError::Usage("--count: must be at least 1".into())),
        Some(n) => (a.seed..a.seed + n, a.out.clone(), None),
        None => {
            let dir = a.out.parent().map(Path::to_path_buf).unwrap_or_default();
            (a.seed..a.seed + 1, dir, Some(a.out.clone()))
        }
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    let mut files = Vec::new();
    let mut params = serde_json::Value::Null;
    for seed in seeds {
        let (scenario, p) = generate(a, seed)?;
        params = p;
        let path = match &single {
            Some(path) => path.clone(),
            None => dir.join(format!("{}-{seed:04}.jsonl", kind_name(a.kind))),
        };
        let text = write_scenario(&scenario);
        write_file(&path, text.as_bytes())?;
        files.push(json!({
            "path": path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "seed": seed,
            "content_hash": content_hash(text.as_bytes()),
        }));
    }
    let manifest_path = match &single {
        Some(path) => path.with_extension("manifest.json"),
        None => dir.join("manifest.json"),
    };
    write_json(
        &manifest_path,
        &json!({
            "kind": kind_name(a.kind),
            "params": params,
            "files": files,
        }),
    )
}

fn read_scenario(path: &Path) -> CliResult<(Scenario, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let scenario = parse_scenario(text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    Ok((scenario, bytes))
}

fn cmd_run(a: &RunArgs) -> CliResult<()> {
    let mut cfg = a.config.config().with_hypotheses(a.hypotheses as usize);
    if let Some(c) = a.children_per_parent {
        cfg.children_per_parent = c as usize;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mode = if a.gt_past {
        RunMode::GtPast
    } else if a.stp {
        if cfg.hypotheses != 1 {
            return Err(CliError::Usage("--stp requires --hypotheses 1".into()));
        }
        RunMode::Stp
    } else {
        RunMode::Mtp
    };
    let (scenario, bytes) = read_scenario(&a.scenario)?;
    let out = run(&scenario, &cfg, mode).map_err(data)?;
    let manifest = save_run(&a.out, &scenario, &a.scenario.to_string_lossy(), &bytes, &cfg, &out).map_err(data)?;
    let t = manifest.timing;
    eprintln!(
        "{} frames: tracking {:.3} ms/frame, prediction {:.3} ms/frame, pooling {:.3} ms/frame",
        t.frames, t.tracking_ms_per_frame, t.prediction_ms_per_frame, t.pooling_ms_per_frame
    );
    Ok(())
}

fn run_label(r: &RunFiles) -> String {
    let c = &r.manifest.config;
    let base = match r.manifest.mode {
        RunMode::GtPast => "gt-past".to_string(),
        RunMode::Stp => "stp".to_string(),
        RunMode::Mtp => format!("mtp-h{}", c.hypotheses),
    };
    if c.sampling {
        format!("{base}-sampled")
    } else {
        base
    }
}

fn run_events(r: &RunFiles, scenario: &Scenario) -> Vec<Vec<ErrorEvent>> {
    let gate = r.manifest.config.gate();
    r.tracking
        .final_hypotheses
        .iter()
        .map(|h| classify_errors(&pair_sequence(scenario, &h.reported_boxes(), gate), gate))
        .collect()
}

#[derive(Serialize)]
struct RunReport {
    label: String,
    run_dir: String,
    manifest_hash: String,
    mode: RunMode,
    hypotheses: usize,
    samples: usize,
    sampling: bool,
    report: MetricsReport,
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let (scenario, bytes) = read_scenario(&a.scenario)?;
    let hash = content_hash(&bytes);
    let mut runs = Vec::with_capacity(a.runs.len());
    for dir in &a.runs {
        let r = load_run(dir).map_err(data)?;
        if r.manifest.scenario.content_hash != hash {
            return Err(CliError::Data(format!(
                "{}: manifest scenario hash {} does not match {} ({hash}); the run is stale",
                dir.display(),
                r.manifest.scenario.content_hash,
                a.scenario.display()
            )));
        }
        let manifest_bytes = fs::read(dir.join("manifest.json")).map_err(data)?;
        runs.push((r, content_hash(&manifest_bytes)));
    }

    let events: Vec<Vec<Vec<ErrorEvent>>> = runs.iter().map(|(r, _)| run_events(r, &scenario)).collect();
    let baseline = runs
        .iter()
        .position(|(r, _)| r.manifest.mode != RunMode::GtPast && r.manifest.config.hypotheses == 1);

    let mut labels: Vec<String> = Vec::new();
    let mut reports = Vec::new();
    for (i, (r, manifest_hash)) in runs.iter().enumerate() {
        let mut label = run_label(r);
        if labels.contains(&label) {
            label = format!("{label}-{i}");
        }
        labels.push(label.clone());
        let own = events[i].first().map(Vec::as_slice).unwrap_or(&[]);
        let targets = match baseline {
            Some(b) => events[b].first().map(Vec::as_slice).unwrap_or(&[]),
            None => own,
        };
        let c = &r.manifest.config;
        let cfg = EvalConfig {
            gate: c.gate(),
            past_len: c.past_len,
            horizon: c.horizon,
        };
        let predictions: Vec<_> = r.predictions.iter().map(|p| p.output().clone()).collect();
        let mut report = evaluate(&predictions, &scenario, own, targets, &cfg).report;
        if events[i].len() > 1 {
            report.shared = Some(shared_errors(&events[i]));
        }
        reports.push(RunReport {
            label,
            run_dir: r.dir.to_string_lossy().into_owned(),
            manifest_hash: manifest_hash.clone(),
            mode: r.manifest.mode,
            hypotheses: c.hypotheses,
            samples: c.samples,
            sampling: c.sampling,
            report,
        });
    }

    fs::create_dir_all(&a.out).map_err(|e| data(format!("{}: {e}", a.out.display())))?;
    write_json(
        &a.out.join("report.json"),
        &json!({
            "scenario": { "path": a.scenario.to_string_lossy(), "content_hash": hash },
            "baseline": baseline.map(|b| labels[b].clone()),
            "runs": reports,
        }),
    )?;
    let rows: Vec<(&str, &MetricsReport)> = reports.iter().map(|r| (r.label.as_str(), &r.report)).collect();
    write_file(&a.out.join("metrics.csv"), tables_csv(&rows).as_bytes())?;
    write_file(&a.out.join("histogram.csv"), histogram_csv(&rows).as_bytes())?;
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats: must be at least 1".into()));
    }
    if let Some(&h) = a.hypotheses.iter().find(|&&h| h == 0) {
        return Err(CliError::Usage(format!(
            "--hypotheses: {h} is not a valid hypothesis count"
        )));
    }
    let cfg = a.config.config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (scenario, _) = read_scenario(&a.scenario)?;
    let report = bench(&scenario, &cfg, &a.hypotheses, a.repeats).map_err(data)?;
    let text = serde_json::to_string_pretty(&report).expect("bench report serializes") + "\n";
    if let Some(out) = &a.out {
        write_file(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}: expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit
/// code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mtp: {e}");
            e.exit_code()
        }
    }
}
