//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain error (bad input files, invalid
//! scenario, undefined metric), 2 usage error. Every command is a pure
//! function of its inputs and seed, so repeated runs write identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::obslog::metrics::StudyMetrics;
use crate::obslog::{read_annotations, read_log_file, read_log_tree, LogRecord};
use crate::sim::{compare_policies, run, Mode, Scenario};
use crate::vad::corpus::{labeled_frames, SyntheticCorpus};
use crate::vad::train::{stratified_split, train, TrainConfig};
use crate::vad::wav::{read_wav_8k, write_wav};
use crate::vad::{evaluate, Label, Vad, VadModel, SAMPLE_RATE, SEGMENT_LEN};

/// The scenario used when `--scenario` is not given.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

type CmdResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(name = "dyadsense", version, about = "Interaction-triggered sensing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voice activity detection: corpus generation, training, evaluation.
    #[command(subcommand)]
    Vad(VadCommand),
    /// Study simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Collection and content report from a log tree and annotations.
    Metrics(MetricsArgs),
    /// Parse and schema-check log files.
    Logparse(LogparseArgs),
}

#[derive(Debug, Subcommand)]
pub enum VadCommand {
    /// Write a synthetic labelled corpus (corpus.wav + labels.csv).
    GenCorpus {
        #[arg(long, default_value_t = 2000)]
        segments: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model with cross-validated regularization.
    Train {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Training settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Share of segments held out for the reported accuracy.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        /// Keep every n-th frame of each training second.
        #[arg(long, default_value_t = 4)]
        stride: usize,
    },
    /// Frame-level accuracy, SHR and FAR on labelled audio.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Per-second decisions for a WAV file.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        wav: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    GroundTruth,
    Dsp,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::GroundTruth => Mode::GroundTruth,
            ModeArg::Dsp => Mode::Dsp,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario file; the bundled default when omitted.
    #[arg(long, visible_alias = "config")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ground-truth")]
    pub mode: ModeArg,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Simulate the study and write logs, annotations and the report.
    Run(SimArgs),
    /// Conversation capture of the trigger policy against time-based ones.
    Compare(SimArgs),
    /// Print the bundled default scenario.
    DefaultScenario,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub logs: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LogparseArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, Box<dyn std::error::Error>> {
    Err(Box::new(CliError(msg.into())))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Vad(v) => vad_cmd(v, out),
        Command::Sim(s) => sim_cmd(s, out),
        Command::Metrics(m) => metrics_cmd(m, out),
        Command::Logparse(l) => logparse_cmd(l, out),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Box<dyn std::error::Error>> {
    Ok(fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?)
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Per-second labels: a CSV with header `second,label`.
pub fn read_labels(path: &Path) -> Result<Vec<Label>, Box<dyn std::error::Error>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError(format!("{}:{line}: {e}", path.display())))?;
        if rec.len() != 2 {
            return fail(format!("{}:{line}: expected 2 columns, got {}", path.display(), rec.len()));
        }
        let second: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| CliError(format!("{}:{line}: bad second {:?}", path.display(), &rec[0])))?;
        if second != out.len() {
            return fail(format!("{}:{line}: expected second {}, got {second}", path.display(), out.len()));
        }
        let label: Label = rec[1].parse().map_err(|e| CliError(format!("{}:{line}: {e}", path.display())))?;
        out.push(label);
    }
    Ok(out)
}

pub fn labels_to_csv(labels: &[Label]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["second", "label"]).expect("in-memory write");
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Audio cut into labelled one-second segments; the lengths must agree.
fn labelled_segments(audio: &Path, labels: &Path) -> Result<Vec<(Vec<f64>, Label)>, Box<dyn std::error::Error>> {
    let samples = read_wav_8k(audio)?;
    let labels = read_labels(labels)?;
    let seconds = samples.len() / SEGMENT_LEN;
    if seconds != labels.len() {
        return fail(format!(
            "{} holds {seconds} whole seconds but {} has {} labels",
            audio.display(),
            "the label file",
            labels.len()
        ));
    }
    Ok(samples
        .chunks_exact(SEGMENT_LEN)
        .zip(labels)
        .map(|(s, l)| (s.to_vec(), l))
        .collect())
}

fn load_model(path: &Path) -> Result<VadModel, Box<dyn std::error::Error>> {
    let model = VadModel::from_text(&read_text(path)?).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    Ok(model)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    lambda: f64,
    cv: &'a [crate::vad::train::CvScore],
    train_segments: usize,
    holdout_segments: usize,
    holdout: crate::vad::EvalMetrics,
}

fn vad_cmd(cmd: VadCommand, out: &mut dyn Write) -> CmdResult {
    match cmd {
        VadCommand::GenCorpus { segments, seed, out_dir } => {
            if segments == 0 {
                return fail("--segments must be positive");
            }
            let corpus = SyntheticCorpus::generate(segments, seed);
            let (audio, labels) = corpus.flatten();
            fs::create_dir_all(&out_dir).map_err(|e| CliError(format!("{}: {e}", out_dir.display())))?;
            write_wav(out_dir.join("corpus.wav"), &audio, SAMPLE_RATE)?;
            write_file(&out_dir.join("labels.csv"), &labels_to_csv(&labels))?;
            writeln!(out, "wrote {segments} labelled seconds to {}", out_dir.display())?;
        }
        VadCommand::Train {
            audio,
            labels,
            model,
            seed,
            config,
            holdout,
            stride,
        } => {
            let mut cfg: TrainConfig = match &config {
                Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError(format!("{}: {e}", p.display())))?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if !(0.0..1.0).contains(&holdout) {
                return fail(format!("--holdout {holdout} must be in [0, 1)"));
            }
            let segments = labelled_segments(&audio, &labels)?;
            let (train_set, test_set) = stratified_split(&segments, holdout, cfg.seed);
            let vad = Vad::new(VadModel::constant(0.0));
            let frames = labeled_frames(&train_set, vad.extractor(), stride);
            let report = train(&frames, &cfg)?;
            let eval_set = if test_set.is_empty() { &train_set } else { &test_set };
            let held = evaluate(&report.model, &labeled_frames(eval_set, vad.extractor(), 1))?;
            write_file(&model, report.model.to_text().as_bytes())?;
            let summary = TrainSummary {
                lambda: report.lambda,
                cv: &report.cv,
                train_segments: train_set.len(),
                holdout_segments: test_set.len(),
                holdout: held,
            };
            let mut summary_path = model.clone().into_os_string();
            summary_path.push(".summary.json");
            write_file(Path::new(&summary_path), &json(&summary))?;
            writeln!(out, "cross-validation ({} folds)", cfg.folds)?;
            for s in &report.cv {
                writeln!(out, "  lambda {:<8} mean accuracy {:.4}", s.lambda, s.mean_accuracy)?;
            }
            writeln!(out, "selected lambda {}", report.lambda)?;
            writeln!(
                out,
                "hold-out ({} segments): accuracy {:.4}  SHR {:.4}  FAR {:.4}",
                test_set.len(),
                held.accuracy,
                held.shr,
                held.far
            )?;
            writeln!(out, "model written to {}", model.display())?;
        }
        VadCommand::Eval { model, audio, labels } => {
            let vad = Vad::new(load_model(&model)?);
            let segments = labelled_segments(&audio, &labels)?;
            let m = evaluate(&vad.model, &labeled_frames(&segments, vad.extractor(), 1))?;
            writeln!(out, "accuracy {:.4}", m.accuracy)?;
            writeln!(out, "shr {:.4}", m.shr)?;
            writeln!(out, "far {:.4}", m.far)?;
        }
        VadCommand::Classify { model, wav } => {
            let vad = Vad::new(load_model(&model)?);
            let samples = read_wav_8k(&wav)?;
            if samples.len() < SEGMENT_LEN {
                return fail(format!("{} is shorter than one second", wav.display()));
            }
            for (i, d) in vad.decide_all(&samples)?.iter().enumerate() {
                writeln!(out, "{i}\t{d}")?;
            }
        }
    }
    Ok(())
}

fn load_scenario(args: &SimArgs) -> Result<Scenario, Box<dyn std::error::Error>> {
    let mut s = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::from_toml(DEFAULT_SCENARIO)?,
    };
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn sim_cmd(cmd: SimCommand, out: &mut dyn Write) -> CmdResult {
    match cmd {
        SimCommand::Run(args) => {
            let Some(dir) = args.out_dir.clone() else {
                return fail("sim run needs --out-dir");
            };
            let s = load_scenario(&args)?;
            let result = run(&s, args.mode.into())?;
            result.write(&dir)?;
            write!(out, "{}", result.report.to_text())?;
            writeln!(out, "\noutputs written to {}", dir.display())?;
        }
        SimCommand::Compare(args) => {
            let s = load_scenario(&args)?;
            let cmp = compare_policies(&s, args.mode.into())?;
            let text = cmp.to_text();
            if let Some(dir) = &args.out_dir {
                write_file(&dir.join("compare.txt"), text.as_bytes())?;
                write_file(&dir.join("compare.json"), &json(&cmp))?;
            }
            write!(out, "{text}")?;
        }
        SimCommand::DefaultScenario => write!(out, "{DEFAULT_SCENARIO}")?,
    }
    Ok(())
}

fn metrics_cmd(args: MetricsArgs, out: &mut dyn Write) -> CmdResult {
    let watches = read_log_tree(&args.logs)?;
    if watches.is_empty() {
        return fail(format!("no watch logs under {}", args.logs.display()));
    }
    let annotations = read_annotations(&args.annotations)?;
    let m = StudyMetrics::compute(&watches, &annotations)?;
    if let Some(p) = &args.json {
        write_file(p, &json(&m))?;
    }
    write!(out, "{}", m.to_text())?;
    Ok(())
}

fn logparse_cmd(args: LogparseArgs, out: &mut dyn Write) -> CmdResult {
    for path in &args.files {
        let records = read_log_file(path)?;
        let mut counts = [0usize; 5];
        for r in &records {
            let i = match r {
                LogRecord::Config(_) => 0,
                LogRecord::BeforeStudy(_) => 1,
                LogRecord::Hourly(_) => 2,
                LogRecord::Ble(_) => 3,
                LogRecord::Error(_) => 4,
            };
            counts[i] += 1;
        }
        writeln!(
            out,
            "{}: {} records (config {}, before {}, hourly {}, ble {}, error {})",
            path.display(),
            records.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            counts[4]
        )?;
    }
    Ok(())
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
