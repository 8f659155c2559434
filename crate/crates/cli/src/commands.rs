//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use shotseq_core::{KtdMatrix, KtdMode, MetricsReport};
use shotseq_data::dataset::{ingest_boundary_dir, write_summary, LABELS_FILE, META_FILE};
use shotseq_data::meta::read_meta;
use shotseq_data::{
    build_dataset, genre_shot_histogram, write_synth_dataset, BuildConfig, DatasetSummary, GenreMode,
    GenreVocabulary, LabelProvision, Split, SynthDatasetConfig, SynthFamily, SynthParams,
};

use crate::config::{RunConfig, OUT_DIR_ENV};
use crate::dataset::LoadedDataset;
use crate::error::{io_err, CliError, Result};
use crate::train::{evaluate, load_checkpoint, train};

#[derive(Debug, Parser)]
#[command(name = "shotseq", version, about = "Shot sequence ordering: datasets, training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest shot-boundary files into a shuffled, labelled, split manifest.
    BuildDataset(BuildDatasetArgs),
    /// Generate a synthetic dataset with a known ordering signal.
    Synth(SynthArgs),
    /// Train the ordering model on a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Print the Kendall tau distance matrix for k shots as CSV.
    KtdMatrix(KtdMatrixArgs),
    /// Genre by shot-class frequency table as CSV.
    Analyze(AnalyzeArgs),
}

fn default_out(name: &str) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("shotseq-out"))
        .join(name)
}

fn parse_ratios(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split([',', ':'])
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad ratio {x:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let arr: [f64; 3] = v.try_into().map_err(|_| "expected three ratios".to_string())?;
    let sum: f64 = arr.iter().sum();
    Ok(arr.map(|x| x / sum))
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Directory of `<scene_id>.txt` boundary files.
    #[arg(long)]
    pub boundaries: PathBuf,
    /// Scene metadata (JSONL); copied next to the manifest.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Label provision (CSV); copied next to the manifest.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output manifest; defaults to $SHOTSEQ_OUT/manifest.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Train:val:test proportions.
    #[arg(long, value_parser = parse_ratios, default_value = "7:1:2")]
    pub ratios: [f64; 3],
    #[arg(long, default_value_t = 8)]
    pub min_frames: u64,
    /// Samples per scene; one per window when omitted.
    #[arg(long)]
    pub sequences_per_scene: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = |s: &str| s.parse::<SynthFamily>())]
    pub family: SynthFamily,
    #[arg(long, default_value_t = 100)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to $SHOTSEQ_OUT/synth-<family>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub shots: usize,
    #[arg(long, default_value_t = 12)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 24)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_parser = parse_ratios, default_value = "7:1:2")]
    pub ratios: [f64; 3],
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for log and checkpoint; defaults to $SHOTSEQ_OUT/run.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `faithful` (argmax lookup) or `soft` (expected distance).
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<KtdMode>,
    /// Drop the cinematology tokens.
    #[arg(long)]
    pub no_cinematology: bool,
    /// Keep the stored shuffles instead of drawing new ones each epoch.
    #[arg(long)]
    pub no_augment: bool,
    /// Keep the offset matrix at zero.
    #[arg(long)]
    pub freeze_offset: bool,
}

fn parse_mode(s: &str) -> std::result::Result<KtdMode, String> {
    match s {
        "faithful" => Ok(KtdMode::Faithful),
        "soft" => Ok(KtdMode::Soft),
        _ => Err(format!("unknown mode {s:?}, expected faithful or soft")),
    }
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse::<Split>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KtdMatrixArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write the CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn copy_beside(src: &Path, dir: &Path, name: &str) -> Result<()> {
    let dst = dir.join(name);
    let same = src.canonicalize().ok() == dst.canonicalize().ok() && dst.exists();
    if !same {
        let bytes = std::fs::read(src).map_err(|e| io_err(src, e))?;
        write_file(&dst, &bytes)?;
    }
    Ok(())
}

/// Returns the summary; writes the manifest and `<manifest>.summary.json`.
pub fn cmd_build_dataset(args: &BuildDatasetArgs) -> Result<DatasetSummary> {
    let out = args.out.clone().unwrap_or_else(|| default_out("manifest.jsonl"));
    let scenes = ingest_boundary_dir(&args.boundaries)?;
    let config = BuildConfig {
        k: args.k,
        ratios: args.ratios,
        seed: args.seed,
        sequences_per_scene: args.sequences_per_scene,
        clean: shotseq_data::CleanConfig {
            min_frames: args.min_frames,
            ..Default::default()
        },
    };
    // Validate side files before writing anything.
    let meta = args.meta.as_deref().map(read_meta).transpose()?;
    let labels = args.labels.as_deref().map(LabelProvision::read).transpose()?;
    let built = build_dataset(&scenes, &config, None)?;
    let dir = out.parent().unwrap_or(Path::new(".")).to_path_buf();
    built.manifest.write(&out)?;
    write_summary(&built.summary, &out.with_extension("summary.json"))?;
    if let (Some(src), Some(_)) = (&args.meta, &meta) {
        copy_beside(src, &dir, META_FILE)?;
    }
    if let (Some(src), Some(_)) = (&args.labels, &labels) {
        copy_beside(src, &dir, LABELS_FILE)?;
    }
    Ok(built.summary)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<DatasetSummary> {
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out(&format!("synth-{}", args.family)));
    let config = SynthDatasetConfig {
        family: args.family,
        scenes: args.scenes,
        params: SynthParams {
            shots_per_scene: args.shots,
            min_frames: args.min_frames,
            max_frames: args.max_frames,
            width: args.width,
            height: args.height,
            ..Default::default()
        },
        build: BuildConfig {
            k: args.k,
            ratios: args.ratios,
            seed: args.seed,
            clean: shotseq_data::CleanConfig {
                min_frames: args.min_frames.min(8) as u64,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    Ok(write_synth_dataset(&out, &config, &GenreVocabulary::default())?.summary)
}

/// The effective run configuration: file, then flags.
pub fn run_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(c.seed, args.seed);
    set!(c.epochs, args.epochs);
    set!(c.batch_size, args.batch_size);
    set!(c.sgd.lr, args.lr);
    set!(c.sgd.momentum, args.momentum);
    set!(c.sgd.weight_decay, args.weight_decay);
    set!(c.loss.alpha, args.alpha);
    set!(c.loss.beta, args.beta);
    set!(c.loss.mode, args.mode);
    if args.no_cinematology {
        c.model.use_cinematology = false;
    }
    if args.no_augment {
        c.augment = false;
    }
    if args.freeze_offset {
        c.offset_trainable = false;
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub epochs: usize,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub final_val: Option<MetricsReport>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let config = run_config(args)?;
    let out = args.out.clone().unwrap_or_else(|| default_out("run"));
    let mut data = LoadedDataset::open(&args.manifest, args.labels.as_deref(), args.meta.as_deref(), config.genre_mode)?;
    let outcome = train(&config, &mut data, &out, |e, _| {
        let val = e
            .val
            .as_ref()
            .map(|r| format!(" val top1 {:.4} ktd {:.4}", r.top1, r.mean_ktd))
            .unwrap_or_default();
        eprintln!("epoch {:>3} lr {:.0e} loss {:.4}{val}", e.epoch, e.lr, e.loss.total);
    })?;
    Ok(TrainSummary {
        seed: config.seed,
        epochs: config.epochs,
        checkpoint: outcome.checkpoint,
        log: outcome.log,
        final_val: outcome.epochs.last().and_then(|e| e.val.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub split: Split,
    pub samples: usize,
    pub metrics: MetricsReport,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let mut data = LoadedDataset::open(&args.manifest, args.labels.as_deref(), args.meta.as_deref(), GenreMode::MultiHot)?;
    if data.manifest.header.k != ckpt.trainer.model.config().k {
        return Err(CliError::Usage(format!(
            "checkpoint is for k={}, manifest has k={}",
            ckpt.trainer.model.config().k,
            data.manifest.header.k
        )));
    }
    let samples = data.split(args.split);
    let metrics = evaluate(&ckpt.trainer, &mut data.inputs, &samples, args.top_k)?;
    let report = EvalReport {
        seed: ckpt.trainer.model.config().seed,
        split: args.split,
        samples: samples.len(),
        metrics,
    };
    if let Some(p) = &args.out {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_file(p, text.as_bytes())?;
    }
    Ok(report)
}

pub fn cmd_ktd_matrix(args: &KtdMatrixArgs) -> Result<String> {
    Ok(KtdMatrix::build(args.k)?.to_csv())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String> {
    let meta = read_meta(&args.meta)?;
    let labels = LabelProvision::read(&args.labels)?;
    let csv = genre_shot_histogram(&meta, &labels)?.to_csv();
    if let Some(p) = &args.out {
        write_file(p, csv.as_bytes())?;
    }
    Ok(csv)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializes")
}

/// Runs one command, returning what goes to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    Ok(match &cli.command {
        Command::BuildDataset(a) => json(&cmd_build_dataset(a)?),
        Command::Synth(a) => json(&cmd_synth(a)?),
        Command::Train(a) => json(&cmd_train(a)?),
        Command::Eval(a) => json(&cmd_eval(a)?),
        Command::KtdMatrix(a) => cmd_ktd_matrix(a)?,
        Command::Analyze(a) => cmd_analyze(a)?,
    })
}
