//! `rqi-eval`: metric batch runs, dataset synthesis, RQI training and
//! scoring, discard sweeps, consistency reports and study serving.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rqi_core::analysis::{discard_sweep, emit_sweep_artifacts, random_discard_control, rank_change_report, write_rank_changes, DEFAULT_FRACTIONS};
use rqi_core::consistency::{per_content_consistency, write_consistency_report, write_consistency_to, ConsistencyOptions};
use rqi_core::corpus::{load_corpus_dir, mini_corpus, write_corpus, DEFAULT_CORPUS_SIZE, DEFAULT_IMAGE_SIDE};
use rqi_core::demo::{end_to_end_demo, DemoConfig};
use rqi_core::distortion::{default_families, make_dataset, read_dataset, write_dataset};
use rqi_core::image::{load_image, to_luma};
use rqi_core::metrics::{read_manifest, score_manifest, Metric, MetricRegistry, Niqe, Rqi};
use rqi_core::nss::{fit_pristine_model, niqe_score, read_model, write_model, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_QUANTILE};
use rqi_core::rqi::{evaluate, rqi_score, train_mode, HeadMode, InferenceProtocol, RqiModel, TrainConfig};
use rqi_core::table::{read_gt_quality, read_user_scales, write_score_rows, write_user_scales, MetricScoreTable};
use rqi_study::{export_scales, replay, serve, StudyExport, StudyStore, SystemClock};

use config::{parse_list, Config};

#[derive(Parser)]
#[command(name = "rqi-eval", version, about = "Image quality evaluation toolkit")]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-image work.
    #[arg(long, global = true, env = "RQI_EVAL_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a manifest of images under one or more metrics.
    Metrics(MetricsArgs),
    /// Fit or apply the no-reference NIQE model.
    #[command(subcommand)]
    Niqe(NiqeCmd),
    /// Generate corpora and distorted datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Train, apply and evaluate the relative quality index.
    #[command(subcommand)]
    Rqi(RqiCmd),
    /// Discard-sweep analysis over a metric score table.
    Sweep(SweepArgs),
    /// Per-content agreement between metrics and user scales.
    Consistency(ConsistencyArgs),
    /// Run or post-process pairwise-comparison studies.
    #[command(subcommand)]
    Study(StudyCmd),
    /// Synthetic benchmark showing reference-bias in full-reference metrics.
    Demo(DemoArgs),
}

#[derive(Args)]
struct ProtocolArgs {
    /// Pyramid scales used at inference.
    #[arg(long)]
    scales: Option<usize>,
    /// Crops per scale.
    #[arg(long)]
    crops: Option<usize>,
    #[arg(long)]
    crop_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ProtocolArgs {
    fn resolve(&self, cfg: &Config) -> Result<InferenceProtocol> {
        let d = InferenceProtocol::default();
        Ok(InferenceProtocol {
            scales: cfg.pick(self.scales, "scales", d.scales)?,
            crops_per_scale: cfg.pick(self.crops, "crops", d.crops_per_scale)?,
            crop_size: cfg.pick(self.crop_size, "crop_size", d.crop_size)?,
            seed: cfg.pick(self.seed, "seed", d.seed)?,
        })
    }
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with `content_id,model_id,image_path[,reference_path]`.
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated metric names.
    #[arg(long, default_value = "psnr,ssim")]
    metrics: String,
    #[arg(long)]
    niqe_model: Option<PathBuf>,
    #[arg(long)]
    rqi_model: Option<PathBuf>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Output score table (`content_id,model_id,metric,score`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum NiqeCmd {
    /// Fit a pristine model from a directory of images.
    Fit {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        patch_size: Option<usize>,
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Score one image, or a manifest with `--manifest` and `--out`.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "manifest")]
        image: Option<PathBuf>,
        #[arg(long, requires = "out")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Write a synthetic image corpus.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CORPUS_SIZE)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_IMAGE_SIDE)]
        side: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Distort every image of a corpus under each family and severity.
    Make {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated families; all of them by default.
        #[arg(long)]
        families: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum RqiCmd {
    /// Train a model on a distorted dataset.
    Train(TrainArgs),
    /// Print the score of a target relative to a reference.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Score a manifest; every entry needs a reference.
    Batch {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Sign accuracy and per-content SRCC on a held-out dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset `manifest.csv`.
        #[arg(long)]
        dataset: PathBuf,
        /// Optional per-content CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset `manifest.csv` from `synth make` or an ingested set.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pair strategy: arbitrary, fr-style or single-distortion.
    #[arg(long)]
    mode: Option<String>,
    /// antisymmetrized or raw.
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    crop_size: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scores: PathBuf,
    /// `content_id,gt_quality` CSV.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated discard fractions.
    #[arg(long)]
    fractions: Option<String>,
    /// Random-discard control trials.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a metric direction, e.g. `lpips=lower`. Repeatable.
    #[arg(long = "direction")]
    directions: Vec<String>,
}

#[derive(Args)]
struct ConsistencyArgs {
    /// Metric score table.
    #[arg(long)]
    metrics: PathBuf,
    /// `content_id,model_id,thurstone_score` CSV.
    #[arg(long)]
    users: PathBuf,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reference_id: Option<String>,
    /// Keep the reference row in the comparison.
    #[arg(long)]
    include_reference: bool,
    #[arg(long = "direction")]
    directions: Vec<String>,
}

#[derive(Subcommand)]
enum StudyCmd {
    /// Serve the study HTTP API.
    Serve {
        /// Directory holding one subdirectory per study.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Thurstone scales from a study export.
    Scales {
        /// Export JSON as served by `/studies/{id}/export`.
        #[arg(long, conflicts_with_all = ["data", "study"])]
        export: Option<PathBuf>,
        /// Replay a study directory instead: `--data ROOT --study ID`.
        #[arg(long, requires = "study")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        study: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Use this model instead of training one.
    #[arg(long)]
    rqi_model: Option<PathBuf>,
    #[arg(long)]
    contents: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// `a: b: c`, dropping causes already spelled out by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let jobs = cfg.pick(cli.jobs, "jobs", 0usize)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("building worker pool")?;
    pool.install(|| dispatch(cli.command, &cfg))
}

fn dispatch(cmd: Command, cfg: &Config) -> Result<()> {
    match cmd {
        Command::Metrics(a) => cmd_metrics(a, cfg),
        Command::Niqe(c) => cmd_niqe(c, cfg),
        Command::Synth(c) => cmd_synth(c, cfg),
        Command::Rqi(c) => cmd_rqi(c, cfg),
        Command::Sweep(a) => cmd_sweep(a, cfg),
        Command::Consistency(a) => cmd_consistency(a, cfg),
        Command::Study(c) => cmd_study(c),
        Command::Demo(a) => cmd_demo(a, cfg),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_rqi(path: &Path) -> Result<RqiModel> {
    RqiModel::load(path).with_context(|| format!("loading RQI model {}", path.display()))
}

fn cmd_metrics(a: MetricsArgs, cfg: &Config) -> Result<()> {
    let mut registry = MetricRegistry::with_fr();
    let names: Vec<String> = parse_list(&a.metrics)?;
    if names.is_empty() {
        bail!("--metrics lists no metric");
    }
    if names.iter().any(|n| n == "niqe") {
        let p = a.niqe_model.as_deref().context("metric niqe needs --niqe-model")?;
        registry.register(Box::new(Niqe { model: read_model(p)? }));
    }
    if names.iter().any(|n| n == "rqi") {
        let p = a.rqi_model.as_deref().context("metric rqi needs --rqi-model")?;
        registry.register(Box::new(Rqi { model: load_rqi(p)?, protocol: a.protocol.resolve(cfg)? }));
    }
    let metrics = names.iter().map(|n| registry.get(n)).collect::<rqi_core::Result<Vec<&dyn Metric>>>()?;
    let entries = read_manifest(&a.manifest)?;
    let rows = score_manifest(&entries, &metrics)?;
    ensure_parent(&a.out)?;
    write_score_rows(&rows, &a.out)?;
    Ok(())
}

fn cmd_niqe(c: NiqeCmd, cfg: &Config) -> Result<()> {
    match c {
        NiqeCmd::Fit { corpus, out, patch_size, quantile } => {
            let patch = cfg.pick(patch_size, "niqe_patch", DEFAULT_PATCH_SIZE)?;
            let q = cfg.pick(quantile, "niqe_quantile", DEFAULT_SHARPNESS_QUANTILE)?;
            let planes: Vec<_> = load_corpus_dir(&corpus)?.iter().map(|(_, img)| to_luma(img)).collect();
            let model = fit_pristine_model(&planes, patch, q)?;
            ensure_parent(&out)?;
            write_model(&model, &out)?;
        }
        NiqeCmd::Score { model, image, manifest, out } => {
            let model = read_model(&model)?;
            match (image, manifest, out) {
                (Some(img), None, _) => println!("{}", niqe_score(&to_luma(&load_image(&img)?), &model)?),
                (None, Some(m), Some(out)) => {
                    let metric = Niqe { model };
                    let rows = score_manifest(&read_manifest(&m)?, &[&metric])?;
                    ensure_parent(&out)?;
                    write_score_rows(&rows, &out)?;
                }
                _ => bail!("give either --image or --manifest with --out"),
            }
        }
    }
    Ok(())
}

fn cmd_synth(c: SynthCmd, cfg: &Config) -> Result<()> {
    match c {
        SynthCmd::Corpus { out, count, side, seed } => {
            let corpus = mini_corpus(count, side, cfg.pick(seed, "seed", 0)?)?;
            write_corpus(&corpus, &out)?;
        }
        SynthCmd::Make { corpus, out, families, seed } => {
            let images = load_corpus_dir(&corpus)?;
            if images.is_empty() {
                bail!("no images in {}", corpus.display());
            }
            let fams: Vec<String> = match families {
                Some(f) => parse_list(&f)?,
                None => default_families().into_iter().map(String::from).collect(),
            };
            let fam_refs: Vec<&str> = fams.iter().map(String::as_str).collect();
            let seqs = make_dataset(&images, &fam_refs, cfg.pick(seed, "seed", 0)?)?;
            write_dataset(&seqs, &out)?;
        }
    }
    Ok(())
}

fn cmd_rqi(c: RqiCmd, cfg: &Config) -> Result<()> {
    match c {
        RqiCmd::Train(a) => {
            let d = TrainConfig::default();
            let tc = TrainConfig {
                epochs: cfg.pick(a.epochs, "epochs", d.epochs)?,
                learning_rate: cfg.pick(a.learning_rate, "learning_rate", d.learning_rate)?,
                batch_size: cfg.pick(a.batch_size, "batch_size", d.batch_size)?,
                crop_size: cfg.pick(a.crop_size, "crop_size", d.crop_size)?,
                validation_fraction: cfg.pick(a.validation_fraction, "validation_fraction", d.validation_fraction)?,
                seed: cfg.pick(a.seed, "seed", d.seed)?,
                ..d
            };
            let mode = cfg.pick(a.mode, "mode", "arbitrary".to_string())?;
            let head: HeadMode = cfg.pick(a.head, "head", "antisymmetrized".to_string())?.parse()?;
            let seqs = read_dataset(&a.dataset)?;
            let outcome = train_mode(&seqs, &mode, head, &tc)?;
            for h in &outcome.history {
                eprintln!("epoch {} steps {} train {:.6} val {:.6}", h.epoch, h.steps, h.train_loss, h.val_loss);
            }
            eprintln!("best epoch {}", outcome.best_epoch);
            ensure_parent(&a.out)?;
            outcome.model.save(&a.out)?;
        }
        RqiCmd::Score { model, target, reference, protocol } => {
            let m = load_rqi(&model)?;
            let s = rqi_score(&m, &load_image(&target)?, &load_image(&reference)?, &protocol.resolve(cfg)?)?;
            println!("{s}");
        }
        RqiCmd::Batch { model, manifest, out, protocol } => {
            let metric = Rqi { model: load_rqi(&model)?, protocol: protocol.resolve(cfg)? };
            let rows = score_manifest(&read_manifest(&manifest)?, &[&metric])?;
            ensure_parent(&out)?;
            write_score_rows(&rows, &out)?;
        }
        RqiCmd::Eval { model, dataset, out, protocol } => {
            let m = load_rqi(&model)?;
            let report = evaluate(&m, &read_dataset(&dataset)?, &protocol.resolve(cfg)?)?;
            println!("sign_accuracy\t{}", report.sign_accuracy);
            println!("mean_srcc\t{}", report.mean_srcc());
            if let Some(out) = out {
                ensure_parent(&out)?;
                let mut f = fs::File::create(&out)?;
                writeln!(f, "content_id,srcc")?;
                for (c, s) in &report.content_srcc {
                    writeln!(f, "{c},{s}")?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, cfg: &Config) -> Result<()> {
    let directions = cfg.directions(&a.directions)?;
    let table = MetricScoreTable::read_scores(&a.scores)?.with_gt_quality(read_gt_quality(&a.gt)?);
    let fractions: Vec<f64> = match a.fractions.or(cfg.get("fractions")?) {
        Some(s) => parse_list(&s)?,
        None => DEFAULT_FRACTIONS.to_vec(),
    };
    let trials = cfg.pick(a.trials, "trials", 200usize)?;
    let seed = cfg.pick(a.seed, "seed", 0u64)?;
    let sweep = discard_sweep(&table, &fractions, &directions)?;
    let control = random_discard_control(&table, &fractions, trials, seed, &directions)?;
    emit_sweep_artifacts(&sweep, &control, &a.out)?;
    write_rank_changes(&rank_change_report(&sweep)?, a.out.join("rank_changes.csv"))?;
    Ok(())
}

fn cmd_consistency(a: ConsistencyArgs, cfg: &Config) -> Result<()> {
    let directions = cfg.directions(&a.directions)?;
    let table = MetricScoreTable::read_scores(&a.metrics)?;
    let users = read_user_scales(&a.users)?;
    let d = ConsistencyOptions::default();
    let options = ConsistencyOptions {
        reference_id: cfg.pick(a.reference_id, "reference_id", d.reference_id)?,
        include_reference: a.include_reference,
    };
    let rows = per_content_consistency(&table, &users, &directions, &options)?;
    match a.out {
        Some(out) => {
            ensure_parent(&out)?;
            write_consistency_report(&rows, &out)?;
        }
        None => write_consistency_to(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_study(c: StudyCmd) -> Result<()> {
    match c {
        StudyCmd::Serve { data, addr } => {
            let store = StudyStore::open(&data, Arc::new(SystemClock))?;
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{addr}", data.display());
            rt.block_on(serve(store, addr))?;
        }
        StudyCmd::Scales { export, data, study, out } => {
            let export: StudyExport = match (export, data, study) {
                (Some(p), _, _) => serde_json::from_slice(&fs::read(&p).with_context(|| format!("reading {}", p.display()))?)?,
                (None, Some(root), Some(id)) => replay(&root.join(&id))?.export(),
                _ => bail!("give --export or --data with --study"),
            };
            ensure_parent(&out)?;
            write_user_scales(&export_scales(&export)?, &out)?;
        }
    }
    Ok(())
}

fn cmd_demo(a: DemoArgs, cfg: &Config) -> Result<()> {
    let d = DemoConfig::default();
    let config = DemoConfig {
        seed: cfg.pick(a.seed, "seed", d.seed)?,
        contents: a.contents.unwrap_or(d.contents),
        side: a.side.unwrap_or(d.side),
        rqi_epochs: cfg.pick(a.epochs, "epochs", d.rqi_epochs)?,
        control_trials: cfg.pick(a.trials, "trials", d.control_trials)?,
        ..d
    };
    let rqi = a.rqi_model.as_deref().map(load_rqi).transpose()?;
    let report = end_to_end_demo(&config, rqi, &a.out)?;
    print!("{}", report.summary());
    Ok(())
}
