//! Command-line pipeline: `train`, `analyze`, `report`.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod manifest;
mod verdicts;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cells::Architecture;
use crate::corpus::{self, TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::exec;
use crate::orbit::{
    self, classify_sink, count_clusters, hidden_period_check, AnalysisOptions, Budgets, GaussianInit, MapMode,
    Retention, TrajectoryDump,
};
use crate::report::{self, PeriodStats};
use crate::numerics::Rng;
use crate::trainer::{self, Checkpoint, TrainConfig};

pub use manifest::RunManifest;
pub use verdicts::{VerdictFile, VerdictRow, NONPERIODIC};

#[derive(Debug, Parser)]
#[command(name = "rnn-orbits", version, about = "Train RNN/LSTM language models and study them as iterative maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train language models from a config file and write checkpoints.
    Train(TrainArgs),
    /// Iterate a checkpoint as a closed-loop map and classify every orbit.
    Analyze(AnalyzeArgs),
    /// Build period tables, orbit plots and sink checks from analysis output.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for gradient groups: a number, `auto` or `sequential`.
    #[arg(long, default_value = "auto")]
    pub workers: String,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Vocabulary file; defaults to `vocab.txt` next to the checkpoint.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value = "with-input")]
    pub mode: MapMode,
    #[arg(long, default_value_t = 20_000)]
    pub detect_steps: usize,
    #[arg(long, default_value_t = 40_000)]
    pub verify_steps: usize,
    /// Number of Gaussian initial states (without-input only).
    #[arg(long, default_value_t = 15_000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gaussian_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gaussian_std: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "auto")]
    pub workers: String,
    /// Write full trajectory dumps for the first N initial conditions.
    #[arg(long, default_value_t = 0)]
    pub dump: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Verdict CSV files from `analyze`; all must share one mode.
    #[arg(long, num_args = 1.., required = true)]
    pub verdicts: Vec<PathBuf>,
    /// Trajectory dumps to plot and check.
    #[arg(long, num_args = 0..)]
    pub dumps: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Sup-norm tolerance for hidden-state period and cluster checks.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(a).map(|_| ()),
        Command::Report(a) => cmd_report(a).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Keys read by `train` besides the training hyperparameters.
const PIPELINE_KEYS: [&str; 4] = ["corpus", "out_dir", "architectures", "min_count"];
const TRAIN_KEYS: [&str; 10] = [
    "architecture",
    "hidden",
    "embed",
    "learning_rate",
    "window",
    "batch_size",
    "max_epochs",
    "checkpoint_epochs",
    "seed",
    "clip_norm",
];

/// A parsed `train` config file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    pub architectures: Vec<Architecture>,
    pub min_count: usize,
    pub train: TrainConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = trainer::parse_kv(text)?;
        if let Some(k) = kv
            .keys()
            .find(|k| !PIPELINE_KEYS.contains(&k.as_str()) && !TRAIN_KEYS.contains(&k.as_str()))
        {
            return Err(Error::param(format!("unknown config key `{k}`")));
        }
        let corpus = kv
            .get("corpus")
            .ok_or_else(|| Error::param("config is missing `corpus`"))?;
        let out_dir = kv.get("out_dir").map(String::as_str).unwrap_or(".");
        let mut train = TrainConfig::default();
        train.apply(&kv)?;
        let architectures = match kv.get("architectures") {
            Some(list) => {
                let mut out = Vec::new();
                for a in list.split(',').filter(|a| !a.trim().is_empty()) {
                    let a: Architecture = a.parse()?;
                    if !out.contains(&a) {
                        out.push(a);
                    }
                }
                if out.is_empty() {
                    return Err(Error::param("`architectures` is empty"));
                }
                out
            }
            None => vec![train.architecture],
        };
        let min_count = match kv.get("min_count") {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad value for min_count: `{v}`")))?,
            None => 2,
        };
        Ok(Self {
            corpus: base.join(corpus),
            out_dir: base.join(out_dir),
            architectures,
            min_count,
            train,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

pub fn checkpoint_name(arch: Architecture, epoch: usize) -> String {
    format!("{}_epoch{}.ckpt", arch.as_str(), epoch)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoints: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub vocab_size: usize,
    /// Validation perplexity at the last epoch, per architecture.
    pub final_perplexity: BTreeMap<Architecture, f64>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let exec = exec::parse_workers(&args.workers)?;
    let cfg = PipelineConfig::load(&args.config)?;
    let started = Instant::now();
    let bytes = std::fs::read(&cfg.corpus).map_err(|e| Error::io(&cfg.corpus, e))?;
    let tokens = corpus::tokenize_bytes(&bytes)?;
    let vocab = Vocabulary::build(&tokens, cfg.min_count)?;
    let stream = TokenStream::split(vocab.encode(&tokens), vocab.len())?;
    let ingest_time = started.elapsed();
    eprintln!(
        "corpus: {} tokens, vocabulary {} (train {}, validation {})",
        tokens.len(),
        vocab.len(),
        stream.train().len(),
        stream.validation().len()
    );

    create_dir(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("vocab.txt"), vocab.to_file_string())?;

    let mut manifest = RunManifest::new("train");
    manifest.set("corpus.path", cfg.corpus.display());
    manifest.set("corpus.sha256", corpus::sha256_hex(&bytes));
    manifest.set("corpus.tokens", tokens.len());
    manifest.set("corpus.train_tokens", stream.train().len());
    manifest.set("corpus.validation_tokens", stream.validation().len());
    manifest.set("vocab.size", vocab.len());
    manifest.set("vocab.min_count", cfg.min_count);
    manifest.set("vocab.sha256", corpus::hex_string(&vocab.hash()));
    manifest.set("seed", cfg.train.seed);
    manifest.set("workers", exec.workers());
    manifest.set(
        "architectures",
        cfg.architectures.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
    );
    manifest.timing("ingest", ingest_time);

    let mut written = Vec::new();
    let mut final_perplexity = BTreeMap::new();
    for &arch in &cfg.architectures {
        let config = TrainConfig {
            architecture: arch,
            ..cfg.train.clone()
        };
        manifest.extend_block(&format!("config.{arch}"), &config.to_kv_string());
        let t0 = Instant::now();
        let outcome = trainer::train_with(&config, &stream, &vocab, exec, |ckpt| {
            let path = cfg.out_dir.join(checkpoint_name(arch, ckpt.epoch));
            ckpt.save(&path)?;
            eprintln!(
                "{arch} epoch {}: validation perplexity {:.2} -> {}",
                ckpt.epoch,
                ckpt.validation_perplexity,
                path.display()
            );
            written.push(path);
            Ok(())
        })?;
        manifest.timing(&format!("train_{arch}"), t0.elapsed());

        let mut history = String::from("epoch,train_loss,validation_perplexity,updates,clipped_updates\n");
        for h in &outcome.history {
            let _ = writeln!(
                history,
                "{},{:?},{:?},{},{}",
                h.epoch, h.train_loss, h.validation_perplexity, h.updates, h.clipped_updates
            );
        }
        write_file(&cfg.out_dir.join(format!("{arch}_history.csv")), history)?;
        let last = outcome
            .history
            .last()
            .map(|h| h.validation_perplexity)
            .unwrap_or(f64::NAN);
        manifest.set(format!("result.{arch}.final_validation_perplexity"), format!("{last:?}"));
        manifest.set(format!("result.{arch}.best_epoch"), outcome.best_epoch);
        manifest.set(
            format!("result.{arch}.best_validation_perplexity"),
            format!("{:?}", outcome.best_perplexity),
        );
        let clipped: usize = outcome.history.iter().map(|h| h.clipped_updates).sum();
        let updates: usize = outcome.history.iter().map(|h| h.updates).sum();
        manifest.set(format!("result.{arch}.clipped_updates"), format!("{clipped}/{updates}"));
        final_perplexity.insert(arch, last);
    }
    manifest.timing("total", started.elapsed());
    manifest.log_assumptions();
    let manifest_path = cfg.out_dir.join("train_manifest.txt");
    manifest.write(&manifest_path)?;
    Ok(TrainSummary {
        checkpoints: written,
        manifest: manifest_path,
        vocab_size: vocab.len(),
        final_perplexity,
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    pub verdicts: PathBuf,
    pub dumps: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub stats: PeriodStats,
}

/// File-name-safe form of a condition descriptor.
fn condition_slug(desc: &str) -> String {
    desc.replace(':', "")
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalyzeSummary> {
    let exec = exec::parse_workers(&args.workers)?;
    let budgets = Budgets {
        detect: args.detect_steps,
        verify: args.verify_steps,
    };
    budgets.validate()?;
    let gaussian = GaussianInit {
        mean: args.gaussian_mean,
        std: args.gaussian_std,
    };
    if !(gaussian.std > 0.0) || !gaussian.mean.is_finite() {
        return Err(Error::param("Gaussian initial states need a finite mean and positive std"));
    }

    let started = Instant::now();
    let ckpt_bytes = std::fs::read(&args.checkpoint).map_err(|e| Error::io(&args.checkpoint, e))?;
    let ckpt = Checkpoint::from_bytes(&ckpt_bytes).map_err(|e| match e {
        Error::Format { what, detail } => Error::Format {
            what,
            detail: format!("{}: {detail}", args.checkpoint.display()),
        },
        other => other,
    })?;
    let vocab_path = args.vocab.clone().unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("vocab.txt")
    });
    let vocab_text = std::fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let vocab = Vocabulary::from_file_str(&vocab_text)?;
    if vocab.hash() != ckpt.vocab_hash {
        return Err(Error::State(format!(
            "{} does not match the vocabulary the checkpoint was trained with",
            vocab_path.display()
        )));
    }
    if vocab.len() != ckpt.model.vocab_size() {
        return Err(Error::State("vocabulary size differs from the model's".into()));
    }
    let arch = ckpt.config.architecture;
    let model = &ckpt.model;

    let mut rng = Rng::new(args.seed);
    let conditions = orbit::sample_initial_conditions(args.mode, vocab.len(), &mut rng, args.count)?;
    let opts = AnalysisOptions {
        mode: args.mode,
        budgets,
        gaussian,
        retention: Retention::default(),
        exec,
    };
    let t0 = Instant::now();
    let results = orbit::analyze(model, &conditions, &opts, |i| i < args.dump)?;
    let analyze_time = t0.elapsed();

    create_dir(&args.out_dir)?;
    let stem = report::output_stem(arch, args.mode, ckpt.epoch);
    let file = VerdictFile {
        architecture: arch,
        mode: args.mode,
        epoch: ckpt.epoch,
        rows: results
            .iter()
            .map(|r| VerdictRow {
                condition: r.initial.describe(),
                verdict: r.verdict.clone(),
            })
            .collect(),
    };
    let verdict_path = args.out_dir.join(format!("{stem}.csv"));
    write_file(&verdict_path, file.render()?)?;

    let mut dumps = Vec::new();
    for r in &results {
        if let Some(traj) = &r.trajectory {
            let path = args
                .out_dir
                .join(format!("{stem}_{}.orbt", condition_slug(&r.initial.describe())));
            TrajectoryDump {
                architecture: arch,
                epoch: ckpt.epoch,
                trajectory: traj.clone(),
                verdict: r.verdict.clone(),
            }
            .save(&path)?;
            dumps.push(path);
        }
    }

    let stats = report::aggregate(ckpt.epoch, arch, args.mode, &file.verdicts())?;
    eprintln!(
        "{stem}: {} trajectories, average period {}, {:.1}% non-periodic",
        stats.count,
        stats
            .average_period
            .map(|a| format!("{a:.1}"))
            .unwrap_or_else(|| "-".into()),
        stats.percent_non_periodic
    );

    let mut manifest = RunManifest::new("analyze");
    manifest.set("checkpoint.path", args.checkpoint.display());
    manifest.set("checkpoint.sha256", corpus::sha256_hex(&ckpt_bytes));
    manifest.set("checkpoint.epoch", ckpt.epoch);
    manifest.set("checkpoint.validation_perplexity", format!("{:?}", ckpt.validation_perplexity));
    manifest.set("vocab.path", vocab_path.display());
    manifest.set("vocab.size", vocab.len());
    manifest.set("vocab.sha256", corpus::hex_string(&ckpt.vocab_hash));
    manifest.extend_block("config", &ckpt.config.to_kv_string());
    manifest.set("mode", args.mode);
    manifest.set("detect_steps", budgets.detect);
    manifest.set("verify_steps", budgets.verify);
    manifest.set("burn_in", budgets.burn_in());
    manifest.set("max_period", budgets.max_period());
    manifest.set("seed", args.seed);
    manifest.set("trajectories", conditions.len());
    if args.mode == MapMode::WithoutInput {
        manifest.set("gaussian.mean", gaussian.mean);
        manifest.set("gaussian.std", gaussian.std);
    }
    manifest.set("workers", exec.workers());
    manifest.set("dumps", dumps.len());
    manifest.set(
        "result.average_period",
        stats.average_period.map(|a| format!("{a:?}")).unwrap_or_default(),
    );
    manifest.set("result.percent_non_periodic", format!("{:?}", stats.percent_non_periodic));
    manifest.timing("analyze", analyze_time);
    manifest.timing("total", started.elapsed());
    manifest.log_assumptions();
    let manifest_path = args.out_dir.join(format!("{stem}_manifest.txt"));
    manifest.write(&manifest_path)?;

    Ok(AnalyzeSummary {
        verdicts: verdict_path,
        dumps,
        manifest: manifest_path,
        stats,
    })
}

/// Per-dump hidden-state findings written to `orbit_checks.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitCheck {
    pub stem: String,
    pub condition: String,
    pub period: Option<usize>,
    /// Distinct states among the last two periods of the contiguous tail.
    pub clusters: Option<usize>,
    pub hidden_periodic: Option<bool>,
    pub sink_monotone: Option<bool>,
    pub sink_tail_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub outputs: Vec<PathBuf>,
    pub stats: Vec<PeriodStats>,
    pub checks: Vec<OrbitCheck>,
}

pub fn cmd_report(args: &ReportArgs) -> Result<ReportSummary> {
    if !(args.tolerance > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let mut files = Vec::new();
    for p in &args.verdicts {
        files.push(VerdictFile::load(p)?);
    }
    let modes: BTreeSet<MapMode> = files.iter().map(|f| f.mode).collect();
    if modes.len() > 1 {
        return Err(Error::param(
            "verdict files mix with-input and without-input runs; report each mode separately",
        ));
    }
    let mode = *modes.iter().next().expect("at least one verdict file");
    let stats = files
        .iter()
        .map(|f| report::aggregate(f.epoch, f.architecture, f.mode, &f.verdicts()))
        .collect::<Result<Vec<_>>>()?;

    create_dir(&args.out_dir)?;
    let mut outputs = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = args.out_dir.join(name);
        write_file(&path, body)?;
        outputs.push(path);
        Ok(())
    };
    emit(format!("period_table_{mode}.csv"), report::render_table(&stats)?)?;
    emit(format!("period_stats_{mode}.csv"), report::render_stats(&stats)?)?;
    emit(format!("sink_table_{mode}.csv"), report::render_sink_table(&stats)?)?;

    let mut checks = Vec::new();
    for p in &args.dumps {
        let dump = TrajectoryDump::load(p)?;
        let traj = &dump.trajectory;
        let stem = report::output_stem(dump.architecture, traj.mode, dump.epoch);
        let cond = traj.initial.describe();
        match report::render_orbit_plot(traj, &dump.verdict) {
            Ok(svg) => emit(format!("{stem}_{}.svg", condition_slug(&cond)), svg)?,
            Err(Error::Degenerate(why)) => eprintln!("{}: no plot ({why})", p.display()),
            Err(e) => return Err(e),
        }
        let period = dump.verdict.period();
        let mut check = OrbitCheck {
            stem,
            condition: cond,
            period,
            clusters: None,
            hidden_periodic: None,
            sink_monotone: None,
            sink_tail_distance: None,
        };
        if let Some(k) = period {
            if let Ok(ok) = hidden_period_check(traj, k, args.tolerance) {
                check.hidden_periodic = Some(ok);
                let tail = traj.contiguous_tail(traj.burn_in);
                let last: Vec<_> = tail[tail.len() - 2 * k..].iter().map(|s| s.state.h.clone()).collect();
                check.clusters = Some(count_clusters(&last, args.tolerance));
            }
            if k == 1 {
                if let Ok(sink) = classify_sink(traj, &dump.verdict) {
                    check.sink_monotone = Some(sink.monotone);
                    check.sink_tail_distance = Some(sink.tail_distance());
                }
            }
        }
        checks.push(check);
    }
    if !checks.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "condition",
            "period",
            "clusters",
            "hidden_periodic",
            "sink_monotone",
            "sink_tail_distance",
        ])?;
        let opt = |o: Option<String>| o.unwrap_or_default();
        for c in &checks {
            w.write_record([
                c.stem.clone(),
                c.condition.clone(),
                c.period.map(|k| k.to_string()).unwrap_or_else(|| NONPERIODIC.into()),
                opt(c.clusters.map(|n| n.to_string())),
                opt(c.hidden_periodic.map(|b| b.to_string())),
                opt(c.sink_monotone.map(|b| b.to_string())),
                opt(c.sink_tail_distance.map(|d| format!("{d:e}"))),
            ])?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?)
            .expect("csv output is UTF-8");
        emit("orbit_checks.csv".into(), body)?;
    }
    for p in &outputs {
        eprintln!("wrote {}", p.display());
    }
    Ok(ReportSummary { outputs, stats, checks })
}
