//! Command-line workflows. Every command reads an optional TOML run config,
//! applies flag overrides, and embeds the resolved config plus the tool
//! version in what it writes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::datakit::{make_split_by, synth, synth_benchmark, DatasetManifest, Scale, SplitBy, SplitPlan, SynthSources};
use crate::error::{Error, Result};
use crate::evalstats::{scale_effect, violin_data, weight_similarity, StatsMode};
use crate::exec::Execution;
use crate::training::{evaluate_with, run_trials_with, train, write_atomic, Checkpoint, Framework, TrainConfig, TOOL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scales: Vec<u32>,
    pub seed: u64,
    pub n_sources: usize,
    pub size: usize,
    /// Directory of PNG sources; procedural sources when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { scales: vec![2, 3, 4, 8], seed: 0, n_sources: 20, size: 256, sources: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub mode: StatsMode,
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { mode: StatsMode::PerMethodAvg, alpha: 0.05 }
    }
}

/// The full set of knobs, loadable from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub stats: StatsConfig,
    pub trials: usize,
    pub split_by: SplitBy,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            stats: StatsConfig::default(),
            trials: 10,
            split_by: SplitBy::Content,
            execution: Execution::Parallel,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Training settings with the run-level execution mode applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { execution: self.execution, ..self.train.clone() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgh", version, about = "Scale-guided quality assessment for super-resolved images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FrameworkArg {
    Sgh,
    Fusion,
    Blind,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::Sgh => Framework::Sgh,
            FrameworkArg::Fusion => Framework::Fusion,
            FrameworkArg::Blind => Framework::Blind,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    PerMethodAvg,
    Pooled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitByArg {
    Content,
    Method,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub framework: Option<FrameworkArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub freeze_encoder: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the synthetic degradation benchmark.
    Synth {
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<u32>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory of PNG source images.
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        n_sources: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Partition a manifest into train and test ids.
    Split {
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_enum)]
        by: Option<SplitByArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and write a checkpoint.
    Train {
        manifest: PathBuf,
        /// Split file; otherwise the split is drawn from the training seed.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the test side of a split with a checkpoint.
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split file; otherwise the split is redrawn from the checkpoint's seed.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated split/train/evaluate with seeds 0..n.
    Trials {
        manifest: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write each trial's report here as soon as it finishes.
        #[arg(long)]
        trial_dir: Option<PathBuf>,
    },
    /// Alexander-Govern test of the scale effect on labels.
    Stats {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-scale label distributions as JSON and CSV.
    Violin {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cosine similarity between heads generated for different scales.
    Weights {
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<Scale>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn apply_train_args(cfg: &mut RunConfig, a: &TrainArgs) {
    if let Some(f) = a.framework {
        cfg.train.framework = f.into();
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.adam.learning_rate = lr;
    }
    if a.freeze_encoder {
        cfg.train.freeze_encoder = true;
    }
}

fn provenance(cfg: &RunConfig, command: &str) -> Value {
    json!({ "tool_version": TOOL_VERSION, "command": command, "run_config": cfg })
}

/// `{"provenance": ..., key: payload}` as pretty JSON with a trailing newline.
fn artifact<T: Serialize>(cfg: &RunConfig, command: &str, key: &str, payload: &T) -> Vec<u8> {
    let mut v = serde_json::Map::new();
    v.insert("provenance".into(), provenance(cfg, command));
    v.insert(key.into(), serde_json::to_value(payload).expect("payload serializes"));
    let mut out = serde_json::to_vec_pretty(&Value::Object(v)).expect("json serializes");
    out.push(b'\n');
    out
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn split_for(manifest: &DatasetManifest, cfg: &RunConfig, file: Option<&Path>) -> Result<SplitPlan> {
    match file {
        Some(p) => SplitPlan::read(p),
        None => make_split_by(manifest, cfg.train.seed, cfg.train.split_ratio, cfg.split_by),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.global.sequential {
        cfg.execution = Execution::Sequential;
    }
    match cli.command {
        Command::Synth { out_dir, scales, seed, sources, n_sources, size } => {
            let s = &mut cfg.synth;
            s.scales = scales.unwrap_or(std::mem::take(&mut s.scales));
            s.seed = seed.unwrap_or(s.seed);
            s.sources = sources.or(s.sources.take());
            s.n_sources = n_sources.unwrap_or(s.n_sources);
            s.size = size.unwrap_or(s.size);
            let src = match &cfg.synth.sources {
                Some(dir) => SynthSources::Images(synth::load_sources(dir)?),
                None => SynthSources::Procedural { count: cfg.synth.n_sources, size: cfg.synth.size },
            };
            let mut manifest = synth_benchmark(&src, &cfg.synth.scales, cfg.synth.seed, &out_dir)?;
            let mut prov = provenance(&cfg, "synth");
            prov["generator"] = manifest.provenance.take().unwrap_or(Value::Null);
            manifest.provenance = Some(prov);
            manifest.write(&out_dir.join("manifest.jsonl"))
        }
        Command::Split { manifest, seed, ratio, by, out } => {
            let m = DatasetManifest::read(&manifest)?;
            cfg.train.seed = seed.unwrap_or(cfg.train.seed);
            cfg.train.split_ratio = ratio.unwrap_or(cfg.train.split_ratio);
            if let Some(b) = by {
                cfg.split_by = match b {
                    SplitByArg::Content => SplitBy::Content,
                    SplitByArg::Method => SplitBy::Method,
                };
            }
            let plan = split_for(&m, &cfg, None)?;
            emit(out.as_deref(), &artifact(&cfg, "split", "split", &plan))
        }
        Command::Train { manifest, split, seed, train: ta, out } => {
            let m = DatasetManifest::read(&manifest)?;
            cfg.train.seed = seed.unwrap_or(cfg.train.seed);
            apply_train_args(&mut cfg, &ta);
            let plan = split_for(&m, &cfg, split.as_deref())?;
            let ckpt = train(&m, &plan, &cfg.train_config())?;
            ckpt.save(&out)
        }
        Command::Eval { manifest, checkpoint, split, out } => {
            let m = DatasetManifest::read(&manifest)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            cfg.train = ckpt.config.clone();
            let plan = split_for(&m, &cfg, split.as_deref())?;
            let report = evaluate_with(&m, &plan, &ckpt, &ckpt.config.patch, cfg.execution)?;
            emit(out.as_deref(), &artifact(&cfg, "eval", "report", &report))
        }
        Command::Trials { manifest, trials, train: ta, out, trial_dir } => {
            let m = DatasetManifest::read(&manifest)?;
            cfg.trials = trials.unwrap_or(cfg.trials);
            apply_train_args(&mut cfg, &ta);
            let report = run_trials_with(&m, &cfg.train_config(), cfg.trials, |r| match &trial_dir {
                Some(dir) => write_atomic(
                    &dir.join(format!("trial_{:02}.json", r.seed)),
                    &artifact(&cfg, "trials", "report", r),
                ),
                None => Ok(()),
            })?;
            emit(out.as_deref(), &artifact(&cfg, "trials", "report", &report))
        }
        Command::Stats { manifest, mode, alpha, out } => {
            let m = DatasetManifest::read(&manifest)?;
            if let Some(mode) = mode {
                cfg.stats.mode = match mode {
                    ModeArg::PerMethodAvg => StatsMode::PerMethodAvg,
                    ModeArg::Pooled => StatsMode::Pooled,
                };
            }
            cfg.stats.alpha = alpha.unwrap_or(cfg.stats.alpha);
            let report = scale_effect(&m, cfg.stats.mode, cfg.stats.alpha)?;
            emit(out.as_deref(), &artifact(&cfg, "stats", "report", &report))
        }
        Command::Violin { manifest, out_dir } => {
            let m = DatasetManifest::read(&manifest)?;
            let v = violin_data(&m)?;
            write_atomic(&out_dir.join("violin.json"), &artifact(&cfg, "violin", "violin", &v))?;
            write_atomic(&out_dir.join("violin_summary.csv"), v.summary_csv().as_bytes())?;
            write_atomic(&out_dir.join("violin_values.csv"), v.values_csv().as_bytes())
        }
        Command::Weights { checkpoint, scales, out_dir } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            cfg.train = ckpt.config.clone();
            let sim = weight_similarity(&ckpt, &scales)?;
            write_atomic(&out_dir.join("weights.json"), &artifact(&cfg, "weights", "similarity", &sim))?;
            write_atomic(&out_dir.join("weights.csv"), sim.to_csv().as_bytes())
        }
    }
}

/// Parses arguments, runs the command, reports failure as
/// `error[<category>]: <message>` and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if e.use_stderr() {
                eprintln!("error[usage]: {}", e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: "));
                eprint!("{}", e.render());
            } else {
                print!("{e}");
            }
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            1
        }
    }
}
