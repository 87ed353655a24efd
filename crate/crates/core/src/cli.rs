//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{AgentCheckpoint, AgentConfig, Algorithm};
use crate::config::KvConfig;
use crate::env::{ScenarioConfig, PRESET_NAMES};
use crate::error::{Error, Result};
use crate::harness::{self, csv, DEFAULT_THRESHOLDS};

const DESK_HORIZON: u32 = 1000;
const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Parser)]
#[command(
    name = "aoi-maintain",
    version,
    about = "Age-of-Information driven maintenance of simulated IoT networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents over several sessions and write learning curves.
    Train(TrainArgs),
    /// Measure fault-detection rates of a checkpoint by fault duration.
    Tpr(TprArgs),
    /// Greedy mean episode reward of a checkpoint.
    EvalReward(EvalArgs),
    /// Write the four fault-scenario config files.
    Presets(PresetsArgs),
    /// Write a scripted reference checkpoint.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Preset name (permanent_faults, intermittent_network,
    /// intermittent_sensors, intermittent_all, no_faults) or config file.
    #[arg(long, default_value = "permanent_faults")]
    pub scenario: String,
    /// Episode length and AoI cap; defaults to 1000 for presets, 5000 with
    /// --paper-scale, and to the file's value for config files.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Full-length runs instead of desk-scale ones.
    #[arg(long)]
    pub paper_scale: bool,
    /// Base seed; drawn from entropy and printed when absent.
    #[arg(long, env = "AOI_MAINTAIN_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub algo: String,
    /// Defaults to 5, or 20 with --paper-scale.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Defaults to 30, or 150 with --paper-scale.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TprArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to 100, or 1000 with --paper-scale.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineKind {
    NeverMaintain,
    AoiThreshold,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub kind: BaselineKind,
    #[arg(long, default_value_t = 4)]
    pub sensors: usize,
    /// AoI above which the threshold rule acts.
    #[arg(long, default_value_t = 2)]
    pub threshold: u32,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Tpr(args) => cmd_tpr(&args),
        Command::EvalReward(args) => cmd_eval_reward(&args),
        Command::Presets(args) => cmd_presets(&args.out),
        Command::Baseline(args) => cmd_baseline(&args),
    }
}

/// Scenario plus the agent keys of its config file, if any.
struct ResolvedScenario {
    scenario: ScenarioConfig,
    agent_keys: KvConfig,
}

fn resolve_scenario(args: &ScenarioArgs) -> Result<ResolvedScenario> {
    let named = ScenarioConfig::preset(&args.scenario).or_else(|| {
        (args.scenario == "no_faults").then(ScenarioConfig::no_faults)
    });
    let (mut scenario, agent_keys) = match named {
        Some(scenario) => {
            let horizon = if args.paper_scale {
                scenario.horizon
            } else {
                DESK_HORIZON
            };
            (scenario.with_horizon(horizon), KvConfig::new())
        }
        None => {
            let path = Path::new(&args.scenario);
            if !path.exists() {
                return Err(Error::Usage(format!(
                    "`{}` is neither a preset ({}, no_faults) nor a readable file",
                    args.scenario,
                    PRESET_NAMES.join(", ")
                )));
            }
            let kv = KvConfig::load(path)?;
            kv.check_known(|k| ScenarioConfig::is_known_key(k) || AgentConfig::is_known_key(k))?;
            let mut agent_keys = KvConfig::new();
            for key in kv.keys().filter(|k| AgentConfig::is_known_key(k)) {
                agent_keys.set(key, kv.get(key).unwrap());
            }
            (ScenarioConfig::from_kv(&kv)?, agent_keys)
        }
    };
    if let Some(h) = args.horizon {
        scenario = scenario.with_horizon(h);
        scenario.validate()?;
    }
    Ok(ResolvedScenario {
        scenario,
        agent_keys,
    })
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        println!("seed {seed} (drawn from entropy; pass --seed {seed} to reproduce)");
        seed
    })
}

/// Agent hyperparameters for a run. Unless the config file sets them, the
/// exploration decay and target-sync period shrink with the run length.
fn agent_config_for(
    algorithm: Algorithm,
    keys: &KvConfig,
    session_steps: u64,
    paper_scale: bool,
) -> Result<AgentConfig> {
    let cfg = AgentConfig::from_kv(algorithm, keys)?;
    if paper_scale {
        return Ok(cfg);
    }
    let scaled = cfg.clone().scaled_to_session(session_steps);
    let mut out = cfg;
    if keys.get("epsilon_decay_steps").is_none() {
        out.epsilon.decay_steps = scaled.epsilon.decay_steps;
    }
    if keys.get("sync_period").is_none() {
        out.sync_period = scaled.sync_period;
    }
    Ok(out)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let algorithm: Algorithm = args
        .algo
        .parse()
        .map_err(|e: Error| Error::Usage(e.to_string()))?;
    let paper = args.common.paper_scale;
    let sessions = args.sessions.unwrap_or(if paper { 20 } else { 5 });
    let episodes = args.episodes.unwrap_or(if paper { 150 } else { 30 });
    if sessions == 0 || episodes == 0 {
        return Err(Error::Usage("sessions and episodes must be at least 1".into()));
    }
    let resolved = resolve_scenario(&args.common)?;
    let scenario = resolved.scenario;
    let session_steps = episodes as u64 * u64::from(scenario.horizon);
    let agent = agent_config_for(algorithm, &resolved.agent_keys, session_steps, paper)?;
    let base_seed = resolve_seed(args.common.seed);
    let seeds: Vec<u64> = (0..sessions as u64).map(|j| base_seed.wrapping_add(j)).collect();

    std::fs::create_dir_all(&args.out)?;
    let mut run = scenario.to_kv();
    run.merge(&agent.to_kv());
    std::fs::write(args.out.join("run.cfg"), run.render())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let results =
        pool.install(|| harness::train_sessions(&scenario, &agent, episodes, &seeds))?;

    for result in &results {
        csv::write_file(
            &args.out.join("sessions").join(format!("{}.csv", result.seed)),
            |out| csv::write_session(out, &result.episode_rewards),
        )?;
        let ckpt_dir = args.out.join("checkpoints");
        std::fs::create_dir_all(&ckpt_dir)?;
        result
            .final_checkpoint
            .save(&ckpt_dir.join(format!("{}.ckpt", result.seed)))?;
        let last = result.episode_rewards.last().copied().unwrap_or_default();
        let best = result
            .episode_rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "session seed={} algo={} episodes={} last_reward={} best_reward={}",
            result.seed,
            algorithm,
            episodes,
            csv::format_g9(last),
            csv::format_g9(best)
        );
    }
    if results.len() >= 2 {
        let curves = harness::aggregate_curves(&results, CONFIDENCE)?;
        csv::write_file(&args.out.join("curves.csv"), |out| {
            csv::write_curves(out, &curves)
        })?;
    } else {
        println!("single session: curves.csv needs at least 2 sessions and was not written");
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<AgentCheckpoint> {
    AgentCheckpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Usage(format!("cannot read checkpoint {}: {io}", path.display())),
        other => other,
    })
}

fn cmd_tpr(args: &TprArgs) -> Result<()> {
    let scenario = resolve_scenario(&args.common)?.scenario;
    let policy = load_checkpoint(&args.checkpoint)?;
    let episodes = args
        .episodes
        .unwrap_or(if args.common.paper_scale { 1000 } else { 100 });
    let seed = resolve_seed(args.common.seed);
    let report = harness::evaluate_tpr(&policy, &scenario, episodes, &args.thresholds, seed)?;
    csv::write_file(&args.out.join("tpr.csv"), |out| csv::write_tpr(out, &report))?;
    let combined = report
        .combined
        .iter()
        .map(|e| e.tpr.map_or_else(|| "-".to_string(), csv::format_g9))
        .collect::<Vec<_>>()
        .join(" ");
    println!(
        "tpr agent={} episodes={episodes} combined=[{combined}] slowest_detection={}",
        policy.kind_name(),
        report
            .slowest_detection_lag
            .map_or_else(|| "-".to_string(), |l| l.to_string())
    );
    Ok(())
}

fn cmd_eval_reward(args: &EvalArgs) -> Result<()> {
    let scenario = resolve_scenario(&args.common)?.scenario;
    let policy = load_checkpoint(&args.checkpoint)?;
    let seed = resolve_seed(args.common.seed);
    let rewards = harness::evaluate_greedy_reward(&policy, &scenario, args.episodes, seed)?;
    let (mean, std) = harness::mean_and_std(&rewards);
    println!(
        "mean_reward={} std={} episodes={} horizon={}",
        csv::format_g9(mean),
        csv::format_g9(std),
        args.episodes,
        scenario.horizon
    );
    Ok(())
}

pub fn cmd_presets(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let agent = AgentConfig::new(Algorithm::MBegDqn);
    for name in PRESET_NAMES {
        let mut kv = ScenarioConfig::preset(name).expect("listed preset").to_kv();
        kv.set("discount", agent.discount);
        let text = format!("# {name}\n{}", kv.render());
        std::fs::write(out.join(format!("{name}.cfg")), text)?;
    }
    println!("wrote {} presets to {}", PRESET_NAMES.len(), out.display());
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    if args.sensors == 0 {
        return Err(Error::Usage("--sensors must be at least 1".into()));
    }
    let ckpt = match args.kind {
        BaselineKind::NeverMaintain => AgentCheckpoint::NeverMaintain {
            num_sensors: args.sensors,
        },
        BaselineKind::AoiThreshold => AgentCheckpoint::AoiThreshold {
            num_sensors: args.sensors,
            threshold: args.threshold,
        },
    };
    if let Some(parent) = args.out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    ckpt.save(&args.out)?;
    println!("wrote {} checkpoint to {}", ckpt.kind_name(), args.out.display());
    Ok(())
}
