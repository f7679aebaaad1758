//! Command implementations behind the `ppd` binary.

mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};

use ppd_core::agent::{greedy_rollout, infer_defense, train_ppd, AgentKind, Checkpoint, TrainConfig};
use ppd_core::eval::{ablation_report, fm_report, Report};
use ppd_core::graph_env::{init_training_pool, segment_pool, Phase, PromptPool, Scene};
use ppd_core::image::{Image, Mask};
use ppd_core::metrics::dice;
use ppd_core::segmenter::ProxySegmenter;
use ppd_core::synth::{load_dataset, write_dataset};

pub use config::{RunConfig, CONFIG_HELP};

/// A bad flag, config key or input precondition; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "ppd", version, about = "Point-prompt attack/defense training and evaluation")]
#[command(after_long_help = "Environment: PPD_LOG=quiet|info|debug sets stderr verbosity (default info).")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic image/mask dataset.
    GenData(GenDataArgs),
    /// Train the attack and defense agents.
    #[command(after_long_help = CONFIG_HELP)]
    Train(TrainArgs),
    /// Attack the ideal prompts of one image with a trained attacker.
    Attack(AttackArgs),
    /// Filter a prompt set with a trained defender.
    Defend(DefendArgs),
    /// Evaluate checkpoints over a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Optional run config supplying the scene template.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Dataset directory (falls back to `paths.data`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to `paths.out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub steps: usize,
    /// Step trace, one JSON record per line.
    #[arg(long)]
    pub trace: PathBuf,
    /// Attacked prompt pool (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Predicted mask (PGM); defaults to `--out` with a .pgm extension.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Run config for segmenter settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DefendArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub budget: usize,
    /// Ground truth, used only to report Dice.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Refined prompt pool (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Predicted mask (PGM); defaults to `--out` with a .pgm extension.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Stop once the best Q-value drops below this.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub threshold: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Ablation,
    Fm,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt_att: PathBuf,
    #[arg(long)]
    pub ckpt_def: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Run config for evaluation and segmenter settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Sets up logging from `PPD_LOG` (`quiet`, `info` or `debug`).
pub fn init_logging() {
    let level = match std::env::var("PPD_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Attack(a) => cmd_attack(&a),
        Command::Defend(a) => cmd_defend(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn segmenter(cfg: &RunConfig) -> Result<ProxySegmenter> {
    ProxySegmenter::new(cfg.segmenter).map_err(|e| usage(e.to_string()))
}

fn load_checkpoint(path: &Path, kind: AgentKind) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ckpt = Checkpoint::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    ckpt.expect_kind(kind).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_prediction(path: &Path, mask: &Mask) -> Result<()> {
    write_file(path, &mask.to_pgm_bytes()?)
}

fn read_image(path: &Path) -> Result<Image> {
    Image::read_ppm(path).with_context(|| format!("reading image {}", path.display()))
}

fn read_mask(path: &Path) -> Result<Mask> {
    Mask::read_pgm(path).with_context(|| format!("reading mask {}", path.display()))
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let template = ppd_core::synth::SceneSpec { size: args.size, ..cfg.scene };
    template.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = write_dataset(&args.out, args.count as usize, args.seed, &template)
        .with_context(|| format!("writing dataset to {}", args.out.display()))?;
    info!("wrote {} scenes to {}", manifest.count, args.out.display());
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let data = args.data.clone().or(cfg.data.clone()).ok_or_else(|| usage("no dataset: pass --data or set paths.data"))?;
    let out = args.out.clone().or(cfg.out.clone()).ok_or_else(|| usage("no output: pass --out or set paths.out"))?;
    let seg = segmenter(&cfg)?;
    let dataset = load_dataset(&data).with_context(|| format!("loading dataset {}", data.display()))?;
    if dataset.is_empty() {
        return Err(usage(format!("dataset {} is empty", data.display())));
    }
    info!("training {} episodes on {} scenes", cfg.train.episodes, dataset.len());
    let output = train_ppd(&dataset, &cfg.train, &seg)?;
    save_training(&out, &cfg.train, &output)?;
    let tail = &output.history[output.history.len().saturating_sub(10)..];
    println!(
        "final {} episodes: dice_ideal={:.4} dice_attacked={:.4} dice_defended={:.4}",
        tail.len(),
        mean(tail.iter().map(|r| r.dice_ideal)),
        mean(tail.iter().map(|r| r.dice_attacked)),
        mean(tail.iter().map(|r| r.dice_defended)),
    );
    Ok(())
}

fn save_training(out: &Path, cfg: &TrainConfig, output: &ppd_core::agent::TrainOutput) -> Result<()> {
    for (kind, params, name) in [(AgentKind::Attack, &output.q_att, "q_att.json"), (AgentKind::Defense, &output.q_def, "q_def.json")] {
        let ckpt = Checkpoint { kind, params: params.clone(), config: cfg.clone() };
        write_file(&out.join(name), ckpt.to_json()?.as_bytes())?;
    }
    let mut history = Vec::new();
    for record in &output.history {
        serde_json::to_writer(&mut history, record)?;
        history.push(b'\n');
    }
    write_file(&out.join("history.jsonl"), &history)?;
    info!("wrote checkpoints and history to {}", out.display());
    Ok(())
}

/// Patch size and prompt interval always follow the checkpoint's training run.
fn with_ckpt_geometry(mut cfg: RunConfig, ckpt: &Checkpoint) -> RunConfig {
    cfg.train.patch_size = ckpt.config.patch_size;
    cfg.train.interval = ckpt.config.interval;
    cfg.eval.patch_size = ckpt.config.patch_size;
    cfg.eval.interval = ckpt.config.interval;
    cfg
}

pub fn cmd_attack(args: &AttackArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.ckpt, AgentKind::Attack)?;
    let cfg = with_ckpt_geometry(RunConfig::load(args.config.as_deref())?, &ckpt);
    let seg = segmenter(&cfg)?;
    let image = read_image(&args.image)?;
    let mask = read_mask(&args.mask)?;
    let scene = Scene::new(image, Some(mask), cfg.train.patch_size).map_err(|e| usage(e.to_string()))?;
    let pool = init_training_pool(scene.gt()?, cfg.train.interval, scene.layout())?;
    let before = dice(&segment_pool(&seg, &scene.image, &pool)?, scene.gt()?)?;
    let (state, trace) = greedy_rollout(&ckpt.params, pool, Phase::Attack, args.steps, &scene, &seg)?;
    let pred = segment_pool(&seg, &scene.image, &state.pool)?;
    let after = dice(&pred, scene.gt()?)?;
    write_file(&args.out, state.pool.to_json()?.as_bytes())?;
    write_prediction(&args.pred.clone().unwrap_or_else(|| args.out.with_extension("pgm")), &pred)?;
    let mut lines = Vec::new();
    for record in &trace {
        debug!("attack step {} action {} dice {:.4}", record.step, record.action, record.dice);
        serde_json::to_writer(&mut lines, record)?;
        lines.push(b'\n');
    }
    write_file(&args.trace, &lines)?;
    println!("dice_before={before:.6} dice_after={after:.6}");
    Ok(())
}

pub fn cmd_defend(args: &DefendArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.ckpt, AgentKind::Defense)?;
    let cfg = with_ckpt_geometry(RunConfig::load(args.config.as_deref())?, &ckpt);
    let seg = segmenter(&cfg)?;
    let image = read_image(&args.image)?;
    let scene = Scene::new(image, None, cfg.train.patch_size).map_err(|e| usage(e.to_string()))?;
    let text = fs::read_to_string(&args.prompts).with_context(|| format!("reading {}", args.prompts.display()))?;
    let pool = PromptPool::from_json(&text, scene.layout()).map_err(|e| usage(format!("{}: {e}", args.prompts.display())))?;
    if pool.active_count() == 0 {
        return Err(usage("input prompt set has no active prompts"));
    }
    let refined = infer_defense(&ckpt.params, &pool, &scene.features(), args.budget, args.threshold)?;
    let pred = segment_pool(&seg, &scene.image, &refined)?;
    write_file(&args.out, refined.to_json()?.as_bytes())?;
    write_prediction(&args.pred.clone().unwrap_or_else(|| args.out.with_extension("pgm")), &pred)?;
    info!("deactivated {} of {} active prompts", pool.active_count() - refined.active_count(), pool.active_count());
    if let Some(path) = &args.mask {
        let gt = read_mask(path)?;
        let before = dice(&segment_pool(&seg, &scene.image, &pool)?, &gt).map_err(|e| usage(e.to_string()))?;
        let after = dice(&pred, &gt)?;
        println!("dice_before={before:.6} dice_after={after:.6}");
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let att = load_checkpoint(&args.ckpt_att, AgentKind::Attack)?;
    let def = load_checkpoint(&args.ckpt_def, AgentKind::Defense)?;
    let cfg = with_ckpt_geometry(RunConfig::load(args.config.as_deref())?, &def);
    let seg = segmenter(&cfg)?;
    let dataset = load_dataset(&args.data).with_context(|| format!("loading dataset {}", args.data.display()))?;
    if dataset.is_empty() {
        return Err(usage(format!("dataset {} is empty", args.data.display())));
    }
    let report: Report = match args.mode {
        EvalMode::Ablation => ablation_report(&att.params, &def.params, &dataset, &seg, &cfg.eval)?,
        EvalMode::Fm => fm_report(&def.params, &dataset, &seg, &cfg.eval)?,
    };
    write_file(&args.out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    let mut stdout = std::io::stdout().lock();
    for row in &report.rows {
        writeln!(stdout, "{:<26} n={} dice={:.4}±{:.4} iou={:.4}±{:.4}", row.name, row.n, row.dice_mean, row.dice_std, row.iou_mean, row.iou_std)?;
    }
    Ok(())
}
