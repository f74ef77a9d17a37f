//! Command-line front end. Every artifact lands under a run directory:
//!
//! ```text
//! <run>/run.json      one record per command: arguments, seed, input hashes
//! <run>/manifest.csv  copy of the preprocessed manifest
//! <run>/canonical/    canonical clips
//! <run>/splits/       split manifests
//! <run>/tasks/        task datasets
//! <run>/checkpoints/  training checkpoints
//! <run>/reports/      metric, stats and embedding reports plus plots
//! ```
//!
//! Exit codes: 0 success, 1 invalid input or failed validation, 2 internal
//! error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{
    dataset_stats, evaluate, export_embeddings, render_scatter, silhouette_score, transfer_eval, MetricReport, Split,
    TransferMode,
};
use crate::ingest::{
    aggregate_files, field_agreement, latin_square_assignment, parse_manifest, read_annotations, read_raw_labels,
    validate_annotation, write_annotations, write_manifest, AnnotationRecord, LabelVocabulary, RawLabelRecord,
    VideoManifestEntry, AGREEMENT_FIELDS,
};
use crate::model::{HeadConfig, ModelVariant, Preset, VidNeXt, VidNeXtConfig};
use crate::synth::{generate_suite, RenderConfig, SuiteMix, SuiteOptions};
use crate::tasks::{build_task_dataset, make_split, PoolMap, SplitManifest, TaskDataset, TaskId};
use crate::train::{Checkpoint, TrainConfig, Trainer};
use crate::video::{preprocess_corpus, CanonicalFormat, CanonicalStore};

#[derive(Debug, Parser)]
#[command(name = "cyclist-collision", version, about = "Cyclist collision video pipeline")]
pub struct Cli {
    /// Run directory that receives every artifact.
    #[arg(long, global = true, default_value = "run")]
    pub run: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonicalize the clips listed in a manifest.
    Preprocess(PreprocessArgs),
    /// Check an annotation file (raw labeller or aggregated) against field rules.
    Validate(ValidateArgs),
    /// Merge labeller files into one annotation per video.
    Aggregate(AggregateArgs),
    /// Randolph's free-marginal kappa per field across labeller files.
    Agreement(AgreementArgs),
    /// Latin-square assignment of batches to labellers.
    Assign(AssignArgs),
    /// Seeded video-level train/test split.
    Split(SplitArgs),
    /// Label every window of the split for one task.
    BuildTask(BuildTaskArgs),
    /// Train a model on one task, or several with --multi-task.
    Train(TrainArgs),
    /// Score a checkpoint on a task, directly or after transfer.
    Eval(EvalArgs),
    /// Export segment representations and a 2-D map of them.
    Embed(EmbedArgs),
    /// Dataset statistics: histograms, heatmaps, fault ratios.
    Stats(StatsArgs),
    /// Generate a synthetic corpus with exact labels.
    Synth(SynthArgs),
    /// Summarize everything recorded in a run directory.
    Report,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Manifest CSV: video_id,source_url,start_time,end_time,source_platform[,pool].
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the downloaded source files.
    #[arg(long)]
    pub raw_dir: PathBuf,
    /// Run directory to write into (overrides --run).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Decoding threads; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Canonical frame width; the height follows at 16:9.
    #[arg(long, default_value_t = 1280)]
    pub width: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Raw labeller CSV or aggregated annotation CSV.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Manifest used to bound time-to-collision by clip duration.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// JSON vocabulary for object types and camera positions.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// One raw label CSV per labeller.
    #[arg(long, num_args = 1.., required = true)]
    pub raw_labels: Vec<PathBuf>,
    /// Aggregated annotation CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON vocabulary for object types and camera positions.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// One raw label CSV per labeller.
    #[arg(long, num_args = 1.., required = true)]
    pub raw_labels: Vec<PathBuf>,
    /// Comma-separated fields; all categorical fields by default.
    #[arg(long, value_delimiter = ',')]
    pub fields: Vec<String>,
    /// Optional JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    /// Number of labellers.
    #[arg(long)]
    pub labellers: usize,
    /// Text file with one batch name per line.
    #[arg(long)]
    pub batches: PathBuf,
    /// Optional CSV output (labeller,round,batch).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Manifest CSV, or a text file with one video id per line.
    #[arg(long)]
    pub videos: PathBuf,
    /// Share of videos in the training split.
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    /// Seed of the shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; defaults to <run>/splits/split_seed<S>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildTaskArgs {
    /// risk, row, anticipation, ttc, severity, fault, age, direction,
    /// object-direction, or the task number 1-9.
    #[arg(long)]
    pub task: TaskId,
    /// Split manifest from `split`.
    #[arg(long)]
    pub split: PathBuf,
    /// Aggregated annotation CSV.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Manifest with pool assignments; defaults to <run>/manifest.csv when present.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output path; defaults to <run>/tasks/<task>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    Tiny,
    Base,
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    /// Training epochs [default: 50].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// AdamW learning rate [default: 2e-6].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Segments per batch [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed for initialization, shuffling and augmentation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any subset of the training settings; flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Task, or a comma-separated list with --multi-task.
    #[arg(long, value_delimiter = ',', required = true)]
    pub task: Vec<TaskId>,
    /// vidnext, convnext-vt or resnet-nst.
    #[arg(long, default_value = "vidnext")]
    pub model: ModelVariant,
    /// Model size: tiny (32 px input, d = 128) or base (224 px input, d = 1024).
    #[arg(long, value_enum, default_value = "tiny")]
    pub preset: PresetArg,
    /// One shared model with a head per listed task.
    #[arg(long)]
    pub multi_task: bool,
    /// Checkpoint name under <run>/checkpoints; derived from model and tasks by default.
    #[arg(long)]
    pub name: Option<String>,
    /// Continue from the existing checkpoint of the same name.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Score the checkpoint as is.
    Full,
    /// Train a head on frozen representations first.
    Linear,
    /// Update every parameter on the target task first.
    Finetune,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory, or a name under <run>/checkpoints.
    #[arg(long)]
    pub checkpoint: String,
    /// Target task (name or number).
    #[arg(long)]
    pub task: TaskId,
    /// How to adapt the checkpoint before scoring.
    #[arg(long, value_enum, default_value = "full")]
    pub mode: EvalMode,
    /// Split to score (full mode only; transfer always scores test).
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Checkpoint directory, or a name under <run>/checkpoints.
    #[arg(long)]
    pub checkpoint: String,
    /// Number of segments to sample.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Task dataset to sample from; the checkpoint's first task by default.
    #[arg(long)]
    pub task: Option<TaskId>,
    /// Seed of the segment sample.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// t-SNE iterations.
    #[arg(long, default_value_t = 500)]
    pub tsne_epochs: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Aggregated annotation CSV.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Manifest giving clip durations; defaults to <run>/manifest.csv when present.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of videos.
    #[arg(long)]
    pub n: usize,
    /// Scenario shares, e.g. "moving=0.6,collision=0.3,stationary=0.1".
    #[arg(long)]
    pub mix: Option<SuiteMix>,
    /// Seed for scenes, textures and labeller noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to <run>/synth.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rendered frame width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Rendered frame height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Rendered frame rate.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Fixed clip duration in seconds; drawn per video when absent.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Number of simulated labellers.
    #[arg(long, default_value_t = 3)]
    pub labellers: usize,
}

/// One entry of `run.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub args: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// SHA-256 of input files and serialized configs.
    pub hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunRecord {
    fn new(command: &str) -> Self {
        Self { command: command.into(), ..Self::default() }
    }

    fn arg(mut self, k: &str, v: impl ToString) -> Self {
        self.args.insert(k.into(), v.to_string());
        self
    }

    fn input(mut self, path: &Path) -> Result<Self> {
        self.hashes.insert(path.display().to_string(), file_hash(path)?);
        Ok(self)
    }

    fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }
}

/// The run directory and its manifest of recorded commands.
#[derive(Clone, Debug)]
pub struct RunDirectory {
    pub root: PathBuf,
}

impl RunDirectory {
    pub const SUBDIRS: [&'static str; 5] = ["canonical", "splits", "tasks", "checkpoints", "reports"];

    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for d in Self::SUBDIRS {
            let p = root.join(d);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(Self { root })
    }

    pub fn canonical(&self) -> PathBuf {
        self.root.join("canonical")
    }
    pub fn splits(&self) -> PathBuf {
        self.root.join("splits")
    }
    pub fn tasks(&self) -> PathBuf {
        self.root.join("tasks")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }
    pub fn task_dataset(&self, task: TaskId) -> PathBuf {
        self.tasks().join(format!("{}.json", task.slug()))
    }

    pub fn records(&self) -> Result<BTreeMap<String, RunRecord>> {
        let path = self.root.join("run.json");
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Store `rec` under `key`, replacing any earlier run of the same step.
    pub fn record(&self, key: &str, rec: RunRecord) -> Result<()> {
        let mut all = self.records()?;
        all.insert(key.into(), rec);
        let path = self.root.join("run.json");
        std::fs::write(&path, serde_json::to_string_pretty(&all)?).map_err(|e| Error::io(&path, e))
    }

    fn store(&self) -> Result<CanonicalStore> {
        CanonicalStore::open(self.canonical())
    }

    fn checkpoint_dir(&self, name_or_path: &str) -> Result<PathBuf> {
        let p = PathBuf::from(name_or_path);
        let dir = if p.exists() { p } else { self.checkpoints().join(name_or_path) };
        if !dir.join("checkpoint.json").exists() {
            return Err(Error::Missing(format!("no checkpoint {name_or_path:?} (looked in {})", dir.display())));
        }
        Ok(dir)
    }

    fn load_dataset(&self, task: TaskId) -> Result<TaskDataset> {
        let p = self.task_dataset(task);
        if !p.exists() {
            return Err(Error::Missing(format!("{} not found; run build-task --task {} first", p.display(), task.slug())));
        }
        TaskDataset::load(&p)
    }
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_vocab(path: &Option<PathBuf>) -> Result<LabelVocabulary> {
    path.as_deref().map_or_else(|| Ok(LabelVocabulary::default()), LabelVocabulary::load)
}

fn durations(manifest: &[VideoManifestEntry]) -> BTreeMap<String, f64> {
    manifest.iter().map(|e| (e.video_id.clone(), e.duration())).collect()
}

/// Explicit manifest, else the run's copy, else none.
fn manifest_or_run(explicit: &Option<PathBuf>, run: &RunDirectory) -> Result<Vec<VideoManifestEntry>> {
    match explicit {
        Some(p) => parse_manifest(p),
        None if run.manifest().exists() => parse_manifest(&run.manifest()),
        None => Ok(Vec::new()),
    }
}

/// Defaults, then the config file, then flags.
fn train_config(base: TrainConfig, o: &TrainOverrides) -> Result<TrainConfig> {
    let mut cfg = base;
    if let Some(p) = &o.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let mut merged = serde_json::to_value(&cfg)?;
        let patch: serde_json::Value = serde_json::from_str(&text)?;
        let (Some(m), Some(patch)) = (merged.as_object_mut(), patch.as_object()) else {
            return Err(Error::Invalid(format!("{}: expected a JSON object", p.display())));
        };
        for (k, v) in patch {
            if !m.contains_key(k) {
                return Err(Error::Invalid(format!("{}: unknown training setting {k:?}", p.display())));
            }
            m.insert(k.clone(), v.clone());
        }
        cfg = serde_json::from_value(merged)?;
    }
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.lr {
        cfg.lr = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_metrics(r: &MetricReport) -> String {
    let mut s = format!("task {} ({}) {:?}: {} segments", r.task_id, r.task, r.split, r.n_segments);
    if let (Some(a), Some(f)) = (r.accuracy, r.macro_f1) {
        let _ = write!(s, ", accuracy {a:.4}, macro F1 {f:.4}");
    }
    if let Some(m) = r.mse {
        let _ = write!(s, ", MSE {m:.4}");
    }
    s
}

/// Parse arguments, run the command and map failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let missing_input = matches!(&e, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound);
            ExitCode::from(if e.is_validation() || missing_input { 1 } else { 2 })
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => preprocess(&RunDirectory::create(a.out.clone().unwrap_or(cli.run))?, a),
        Command::Validate(a) => validate(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Agreement(a) => agreement(a),
        Command::Assign(a) => assign(a),
        Command::Split(a) => split(&RunDirectory::create(cli.run)?, a),
        Command::BuildTask(a) => build_task(&RunDirectory::create(cli.run)?, a),
        Command::Train(a) => train(&RunDirectory::create(cli.run)?, a),
        Command::Eval(a) => eval(&RunDirectory::create(cli.run)?, a),
        Command::Embed(a) => embed(&RunDirectory::create(cli.run)?, a),
        Command::Stats(a) => stats(&RunDirectory::create(cli.run)?, a),
        Command::Synth(a) => synth(cli.run, a),
        Command::Report => report(&RunDirectory { root: cli.run }),
    }
}

fn preprocess(run: &RunDirectory, a: PreprocessArgs) -> Result<()> {
    let entries = parse_manifest(&a.manifest)?;
    let store = run.store()?;
    let format = CanonicalFormat::scaled(a.width);
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = preprocess_corpus(&entries, &a.raw_dir, &store, &format, workers)?;
    write_manifest(&run.manifest(), &entries)?;
    let out = run.reports().join("preprocess.json");
    std::fs::write(&out, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&out, e))?;
    for (id, why) in &report.rejected {
        eprintln!("rejected {id}: {why}");
    }
    println!(
        "{} clips canonicalized at {}x{} {} fps into {}, {} rejected",
        report.processed.len(),
        format.width,
        format.height,
        format.fps,
        run.canonical().display(),
        report.rejected.len()
    );
    let rec = RunRecord::new("preprocess")
        .arg("raw_dir", a.raw_dir.display())
        .arg("width", format.width)
        .input(&a.manifest)?
        .output(&run.canonical())
        .output(&out);
    run.record("preprocess", rec)
}

/// Aggregated files carry `has_collision` and no labeller column.
fn read_any_labels(path: &Path) -> Result<Vec<RawLabelRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text.lines().next().unwrap_or_default();
    if header.split(',').any(|c| c.trim() == "labeller_id") {
        read_raw_labels(path)
    } else {
        Ok(read_annotations(path)?
            .into_iter()
            .map(|a| RawLabelRecord { labeller_id: "aggregated".into(), video_id: a.video_id, fields: a.fields })
            .collect())
    }
}

fn validate(a: ValidateArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let records = read_any_labels(&a.annotations)?;
    let durations = match &a.manifest {
        Some(p) => durations(&parse_manifest(p)?),
        None => BTreeMap::new(),
    };
    let mut bad = 0;
    for r in &records {
        let problems = validate_annotation(r, &vocab, durations.get(&r.video_id).copied());
        if !problems.is_empty() {
            bad += 1;
            println!("{} ({}): {}", r.video_id, r.labeller_id, problems.join("; "));
        }
    }
    if bad > 0 {
        return Err(Error::Invalid(format!("{bad} of {} records failed validation", records.len())));
    }
    println!("{} records valid", records.len());
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let files: Vec<Vec<RawLabelRecord>> = a.raw_labels.iter().map(|p| read_raw_labels(p)).collect::<Result<_>>()?;
    let merged: Vec<AnnotationRecord> = aggregate_files(&files, &vocab)?;
    write_annotations(&a.out, &merged)?;
    let collisions = merged.iter().filter(|m| m.has_collision).count();
    println!("{} videos aggregated ({collisions} with a collision) into {}", merged.len(), a.out.display());
    Ok(())
}

fn agreement(a: AgreementArgs) -> Result<()> {
    let files: Vec<Vec<RawLabelRecord>> = a.raw_labels.iter().map(|p| read_raw_labels(p)).collect::<Result<_>>()?;
    let fields: Vec<String> =
        if a.fields.is_empty() { AGREEMENT_FIELDS.iter().map(|s| s.to_string()).collect() } else { a.fields };
    let mut reports = Vec::new();
    for f in &fields {
        let r = field_agreement(&files, f)?;
        println!("{f}\t{:.4}\t({} items, {} categories, {} dropped)", r.kappa, r.n_items, r.n_categories, r.n_dropped);
        reports.push(r);
    }
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&reports)?).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn assign(a: AssignArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.batches).map_err(|e| Error::io(&a.batches, e))?;
    let batches: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    let rows = latin_square_assignment(a.labellers, &batches)?;
    for (i, row) in rows.iter().enumerate() {
        println!("labeller {}: {}", i + 1, row.join(" "));
    }
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["labeller", "round", "batch"])?;
        for (i, row) in rows.iter().enumerate() {
            for (r, b) in row.iter().enumerate() {
                w.write_record([(i + 1).to_string(), (r + 1).to_string(), b.clone()])?;
            }
        }
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

/// Ids from a manifest CSV, or one id per line.
fn read_video_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.lines().next().is_some_and(|h| h.starts_with("video_id,")) {
        return Ok(parse_manifest(path)?.into_iter().map(|e| e.video_id).collect());
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn split(run: &RunDirectory, a: SplitArgs) -> Result<()> {
    let ids = read_video_ids(&a.videos)?;
    let s = make_split(&ids, a.ratio, a.seed)?;
    let out = a.out.unwrap_or_else(|| run.splits().join(format!("split_seed{}.json", a.seed)));
    s.save(&out)?;
    println!(
        "{} train / {} test videos, fingerprint {}, written to {}",
        s.train_video_ids.len(),
        s.test_video_ids.len(),
        s.fingerprint(),
        out.display()
    );
    let rec = RunRecord::new("split").arg("ratio", a.ratio).input(&a.videos)?.output(&out);
    run.record(&format!("split:{}", a.seed), RunRecord { seed: Some(a.seed), ..rec })
}

fn build_task(run: &RunDirectory, a: BuildTaskArgs) -> Result<()> {
    let split = SplitManifest::load(&a.split)?;
    let annotations = read_annotations(&a.annotations)?;
    let manifest = manifest_or_run(&a.manifest, run)?;
    let pools = PoolMap::from_sources(&manifest, &annotations);
    let frames = run.store()?.frame_counts()?;
    let d = build_task_dataset(&a.task.spec(), &split, &annotations, &pools, &frames)?;
    let out = a.out.unwrap_or_else(|| run.task_dataset(a.task));
    d.save(&out)?;
    println!(
        "task {} ({}): {} train / {} test segments, written to {}",
        a.task.number(),
        a.task.slug(),
        d.train.len(),
        d.test.len(),
        out.display()
    );
    println!("train classes {:?}", d.report.train_counts);
    println!("test classes  {:?}", d.report.test_counts);
    let rec = RunRecord::new("build-task")
        .arg("task", a.task.slug())
        .input(&a.split)?
        .input(&a.annotations)?
        .output(&out);
    run.record(&format!("build-task:{}", a.task.slug()), RunRecord { seed: Some(split.seed), ..rec })
}

fn train(run: &RunDirectory, a: TrainArgs) -> Result<()> {
    if a.task.len() > 1 && !a.multi_task {
        return Err(Error::Invalid("several tasks given; pass --multi-task to train them jointly".into()));
    }
    let datasets: Vec<TaskDataset> = a.task.iter().map(|&t| run.load_dataset(t)).collect::<Result<_>>()?;
    let store = run.store()?;
    let slugs: Vec<&str> = a.task.iter().map(|t| t.slug()).collect();
    let model_name = serde_json::to_value(a.model)?.as_str().unwrap_or_default().to_string();
    let name = a.name.clone().unwrap_or_else(|| format!("{model_name}-{}", slugs.join("+")));
    let dir = run.checkpoints().join(&name);
    let log = dir.join("log.jsonl");

    let trainer = if a.resume {
        let o = &a.overrides;
        if o.lr.is_some() || o.batch_size.is_some() || o.seed.is_some() || o.config.is_some() {
            return Err(Error::Invalid("--resume keeps the checkpoint's settings; only --epochs may change".into()));
        }
        let mut state = Checkpoint::load(&dir)?;
        if let Some(e) = o.epochs {
            state.train_config.epochs = e;
        }
        Trainer::resume(state, &datasets, &store)?
    } else {
        let cfg = train_config(TrainConfig::default(), &a.overrides)?;
        let preset = match a.preset {
            PresetArg::Tiny => Preset::Tiny,
            PresetArg::Base => Preset::Base,
        };
        let mut config = VidNeXtConfig::preset(preset, a.model, a.task[0])?;
        config.heads = a.task.iter().map(|&t| HeadConfig::for_task(t)).collect();
        let model = VidNeXt::new(config, cfg.seed)?;
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Trainer::new(model, &datasets, &store, cfg)?
    };
    let outcome = trainer.log_to(&log).run()?;
    outcome.last.save(&dir)?;
    let c = &outcome.last;
    println!(
        "{name}: {} epochs, best validation score {} at epoch {}, checkpoint {}",
        c.epoch,
        c.best_score.map_or("n/a".into(), |s| format!("{s:.4}")),
        c.best_epoch.map_or("n/a".into(), |e| e.to_string()),
        dir.display()
    );
    let mut rec = RunRecord::new("train")
        .arg("tasks", slugs.join(","))
        .arg("model", &model_name)
        .arg("preset", format!("{:?}", a.preset).to_lowercase())
        .output(&dir);
    rec.seed = Some(c.train_config.seed);
    rec.hashes.extend(c.fingerprints.clone());
    for &t in &a.task {
        rec = rec.input(&run.task_dataset(t))?;
    }
    run.record(&format!("train:{name}"), rec)
}

fn eval(run: &RunDirectory, a: EvalArgs) -> Result<()> {
    let dir = run.checkpoint_dir(&a.checkpoint)?;
    let ck = Checkpoint::load(&dir)?;
    let dataset = run.load_dataset(a.task)?;
    let store = run.store()?;
    let ck_name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mode_name = format!("{:?}", a.mode).to_lowercase();
    let report = match a.mode {
        EvalMode::Full => evaluate(&ck, &dataset, a.split, &store)?,
        EvalMode::Linear | EvalMode::Finetune => {
            let mode = if a.mode == EvalMode::Linear { TransferMode::Linear } else { TransferMode::Finetune };
            let cfg = train_config(ck.train_config.clone(), &a.overrides)?;
            let r = transfer_eval(&ck, &dataset, &store, mode, cfg)?;
            r.training.last.save(&run.checkpoints().join(format!("{ck_name}-{mode_name}-{}", a.task.slug())))?;
            r.report
        }
    };
    let split_name = if a.mode == EvalMode::Full { format!("{:?}", a.split).to_lowercase() } else { "test".into() };
    let out = run.reports().join(format!("eval-{ck_name}-{}-{mode_name}-{split_name}.json", a.task.slug()));
    report.save(&out)?;
    println!("{} [{mode_name}]", print_metrics(&report));
    let rec = RunRecord::new("eval")
        .arg("checkpoint", &ck_name)
        .arg("task", a.task.slug())
        .arg("mode", &mode_name)
        .input(&run.task_dataset(a.task))?
        .output(&out);
    let key = format!("eval:{ck_name}:{}:{mode_name}:{split_name}", a.task.slug());
    run.record(&key, RunRecord { seed: Some(ck.train_config.seed), ..rec })
}

fn embed(run: &RunDirectory, a: EmbedArgs) -> Result<()> {
    let dir = run.checkpoint_dir(&a.checkpoint)?;
    let ck = Checkpoint::load(&dir)?;
    let task = match a.task {
        Some(t) => t,
        None => *ck.tasks.first().ok_or_else(|| Error::Invalid("checkpoint lists no task; pass --task".into()))?,
    };
    let dataset = run.load_dataset(task)?;
    let e = export_embeddings(&ck, &dataset, &run.store()?, a.n, a.seed)?;
    let ck_name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = run.reports().join(format!("embed-{ck_name}-{}", task.slug()));
    let json = stem.with_extension("json");
    e.save(&json)?;
    let points = e.tsne_2d(a.tsne_epochs);
    let classes: Vec<usize> = e.labels.iter().map(|l| l.class().unwrap_or(0)).collect();
    let png = stem.with_extension("png");
    render_scatter(&points, &classes, &png)?;
    let n_classes = classes.iter().collect::<std::collections::BTreeSet<_>>().len();
    let sil = if n_classes > 1 && dataset.spec.classes.is_some() {
        format!("{:.4}", silhouette_score(&e.matrix, e.dim, &classes)?)
    } else {
        "n/a".into()
    };
    println!("{} embeddings of dim {} written to {}; silhouette by label {sil}; map {}", e.len(), e.dim, json.display(), png.display());
    let rec = RunRecord::new("embed").arg("checkpoint", &ck_name).arg("n", a.n).output(&json).output(&png);
    run.record(&format!("embed:{ck_name}:{}", task.slug()), RunRecord { seed: Some(a.seed), ..rec })
}

fn stats(run: &RunDirectory, a: StatsArgs) -> Result<()> {
    let annotations = read_annotations(&a.annotations)?;
    let manifest = manifest_or_run(&a.manifest, run)?;
    let report = dataset_stats(&annotations, &durations(&manifest));
    let dir = run.reports().join("stats");
    let plots = report.render(&dir)?;
    let out = dir.join("stats.json");
    report.save(&out)?;
    println!("{} videos, {} with a collision", report.n_videos, report.n_collisions);
    for (k, v) in &report.ratios {
        println!("{k}\t{v:.4}");
    }
    println!("{} plots and stats.json in {}", plots.len(), dir.display());
    run.record("stats", RunRecord::new("stats").input(&a.annotations)?.output(&out))
}

fn synth(run_root: PathBuf, a: SynthArgs) -> Result<()> {
    let mut opts = SuiteOptions::new(a.n, a.seed);
    if let Some(m) = a.mix {
        opts.mix = m;
    }
    let d = RenderConfig::default();
    opts.render = RenderConfig { width: a.width.unwrap_or(d.width), height: a.height.unwrap_or(d.height), fps: a.fps.unwrap_or(d.fps) };
    opts.duration = a.duration;
    opts.labellers = a.labellers;
    let out = a.out.unwrap_or_else(|| run_root.join("synth"));
    let s = generate_suite(&opts, &out)?;
    println!("{} videos ({:?}), collision rate {:.3}", s.videos.len(), s.kind_counts, s.collision_rate());
    println!("manifest    {}", s.files.manifest.display());
    println!("raw videos  {}", s.files.raw_dir.display());
    println!("annotations {}", s.files.annotations.display());
    for p in &s.files.raw_labels {
        println!("labels      {}", p.display());
    }
    let opts_path = out.join("options.json");
    std::fs::write(&opts_path, serde_json::to_string_pretty(&opts)?).map_err(|e| Error::io(&opts_path, e))?;
    Ok(())
}

fn report(run: &RunDirectory) -> Result<()> {
    if !run.root.is_dir() {
        return Err(Error::Missing(format!("no run directory at {}", run.root.display())));
    }
    let mut md = format!("# Run {}\n\n", run.root.display());
    let records = run.records()?;
    md.push_str("## Steps\n\n");
    for (key, r) in &records {
        let args: Vec<String> = r.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let seed = r.seed.map_or(String::new(), |s| format!(" seed={s}"));
        let _ = writeln!(md, "- `{key}` {}{seed}", args.join(" "));
    }
    if let Ok(store) = run.store() {
        let _ = writeln!(md, "\nCanonical clips: {}", store.ids()?.len());
    }

    md.push_str("\n## Task datasets\n\n| task | train | test |\n|---|---|---|\n");
    for t in TaskId::ALL {
        let p = run.task_dataset(t);
        if p.exists() {
            let d = TaskDataset::load(&p)?;
            let _ = writeln!(md, "| {} {} | {} | {} |", t.number(), t.slug(), d.train.len(), d.test.len());
        }
    }

    md.push_str("\n## Checkpoints\n\n");
    let mut names: Vec<PathBuf> = list_dir(&run.checkpoints())?.into_iter().filter(|p| p.is_dir()).collect();
    names.sort();
    for dir in names {
        if let Ok(c) = Checkpoint::load(&dir) {
            let tasks: Vec<&str> = c.tasks.iter().map(|t| t.slug()).collect();
            let _ = writeln!(
                md,
                "- {}: {} epochs on {}, best validation score {}",
                dir.file_name().unwrap_or_default().to_string_lossy(),
                c.epoch,
                tasks.join(","),
                c.best_score.map_or("n/a".into(), |s| format!("{s:.4}"))
            );
        }
    }

    md.push_str("\n## Evaluations\n\n| report | segments | accuracy | macro F1 | MSE |\n|---|---|---|---|---|\n");
    let mut reports: Vec<PathBuf> = list_dir(&run.reports())?
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("eval-")))
        .collect();
    reports.sort();
    let fmt = |v: Option<f64>| v.map_or("".into(), |x| format!("{x:.4}"));
    for p in reports {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let r: MetricReport = serde_json::from_str(&text)?;
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            p.file_stem().unwrap_or_default().to_string_lossy(),
            r.n_segments,
            fmt(r.accuracy),
            fmt(r.macro_f1),
            fmt(r.mse)
        );
    }
    let out = run.root.join("reports").join("summary.md");
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&out, &md).map_err(|e| Error::io(&out, e))?;
    print!("{md}");
    Ok(())
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    rd.map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err))).collect()
}
