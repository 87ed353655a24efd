//! Maintenance agents: M-DQN, M-bεg-DQN and M-A2C, plus scripted baselines.

mod a2c;
mod checkpoint;
mod dqn;
mod replay;
mod schedule;

pub use a2c::{n_step_returns, policy_entropy, A2cAgent, A2cLosses, Rollout, RolloutStep};
pub use checkpoint::{read_agent, write_agent, AgentCheckpoint, AGENT_MAGIC};
pub use dqn::DqnAgent;
pub use replay::ReplayBuffer;
pub use schedule::EpsilonSchedule;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::config::KvConfig;
use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::neural::{OptimizerConfig, OptimizerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_observation: Observation,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    MDqn,
    MBegDqn,
    MA2c,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::MDqn, Algorithm::MBegDqn, Algorithm::MA2c];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MDqn => "m-dqn",
            Algorithm::MBegDqn => "m-beg-dqn",
            Algorithm::MA2c => "m-a2c",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown algorithm `{s}` (expected m-dqn, m-beg-dqn or m-a2c)"
                ))
            })
    }
}

/// How raw AoI values are mapped into network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationScaling {
    /// `aoi / aoi_max`
    Linear,
    /// `ln(aoi) / ln(aoi_max)`
    Log,
}

impl ObservationScaling {
    pub fn code(self) -> u8 {
        match self {
            ObservationScaling::Linear => 0,
            ObservationScaling::Log => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ObservationScaling::Linear),
            1 => Some(ObservationScaling::Log),
            _ => None,
        }
    }

    pub fn normalize(self, observation: &Observation, aoi_max: u32) -> Vec<f64> {
        let max = f64::from(aoi_max);
        match self {
            ObservationScaling::Linear => {
                observation.aoi.iter().map(|&a| f64::from(a) / max).collect()
            }
            ObservationScaling::Log => {
                let denom = max.ln();
                observation
                    .aoi
                    .iter()
                    .map(|&a| if denom > 0.0 { f64::from(a).ln() / denom } else { 0.0 })
                    .collect()
            }
        }
    }
}

impl FromStr for ObservationScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ObservationScaling::Linear),
            "log" => Ok(ObservationScaling::Log),
            other => Err(Error::config(
                "observation_scaling",
                format!("`{other}` is not linear or log"),
            )),
        }
    }
}

/// Hyperparameters for every algorithm; each agent reads the fields it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub discount: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub sync_period: u64,
    pub epsilon: EpsilonSchedule,
    pub hidden_size: usize,
    pub rollout_length: usize,
    pub entropy_coeff: f64,
    pub critic_tanh: bool,
    /// Critic outputs are multiplied by this to obtain values in return units.
    pub return_scale: f64,
    pub grad_clip: Option<f64>,
    pub observation_scaling: ObservationScaling,
}

/// Slots in a full-length training session.
pub const FULL_SESSION_STEPS: u64 = 150 * 5000;

/// Fraction of the proportional exploration period kept by short sessions.
pub const SHORT_RUN_EXPLORATION: f64 = 0.5;

pub const AGENT_KEYS: &[&str] = &[
    "discount",
    "learning_rate",
    "optimizer",
    "batch_size",
    "buffer_capacity",
    "sync_period",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_steps",
    "hidden_size",
    "rollout_length",
    "entropy_coeff",
    "critic_tanh",
    "return_scale",
    "grad_clip",
    "observation_scaling",
];

impl AgentConfig {
    /// Defaults: discount 0.999, Adam at 1e-4, batch 32, replay 5e5, target
    /// sync every 2e4 slots, ε from 1 to 0.01 over 4e5 slots, 128 hidden
    /// units, A2C rollouts of 32 slots with entropy bonus 0.01 and gradient
    /// clipping at 10.
    pub fn new(algorithm: Algorithm) -> Self {
        let discount = 0.999;
        Self {
            algorithm,
            discount,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::adam(),
            batch_size: 32,
            buffer_capacity: 500_000,
            sync_period: 20_000,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.01,
                decay_steps: 400_000,
            },
            hidden_size: 128,
            rollout_length: 32,
            entropy_coeff: 0.01,
            critic_tanh: true,
            return_scale: 1.0 / (1.0 - discount),
            grad_clip: match algorithm {
                Algorithm::MA2c => Some(10.0),
                _ => None,
            },
            observation_scaling: ObservationScaling::Linear,
        }
    }

    /// Adapts the schedules to a session shorter than 150 episodes of 5000
    /// slots. The target-sync period shrinks in proportion. Exploration
    /// shrinks twice as fast, since a short run needs a larger share of
    /// near-greedy slots to settle; a full-length session is left alone.
    pub fn scaled_to_session(mut self, session_steps: u64) -> Self {
        let ratio = session_steps as f64 / FULL_SESSION_STEPS as f64;
        if ratio >= 1.0 {
            return self;
        }
        let shrink = |n: u64, by: f64| ((n as f64 * by) as u64).max(1);
        self.epsilon.decay_steps = shrink(self.epsilon.decay_steps, ratio * SHORT_RUN_EXPLORATION);
        self.sync_period = shrink(self.sync_period, ratio);
        self
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            learning_rate: self.learning_rate,
        }
    }

    pub fn is_known_key(key: &str) -> bool {
        AGENT_KEYS.contains(&key)
    }

    /// Reads the agent keys of a config file over the algorithm's defaults.
    pub fn from_kv(algorithm: Algorithm, kv: &KvConfig) -> Result<Self> {
        let base = Self::new(algorithm);
        let discount = kv.parse_or("discount", base.discount)?;
        let optimizer = match kv.get("optimizer") {
            None | Some("adam") => OptimizerKind::adam(),
            Some("sgd") => OptimizerKind::Sgd,
            Some(other) => {
                return Err(Error::config("optimizer", format!("`{other}` is not adam or sgd")))
            }
        };
        let grad_clip = match kv.get("grad_clip") {
            None => base.grad_clip,
            Some("none") | Some("off") => None,
            Some(_) => Some(kv.parse_required("grad_clip")?),
        };
        let cfg = Self {
            algorithm,
            discount,
            learning_rate: kv.parse_or("learning_rate", base.learning_rate)?,
            optimizer,
            batch_size: kv.parse_or("batch_size", base.batch_size)?,
            buffer_capacity: kv.parse_or("buffer_capacity", base.buffer_capacity)?,
            sync_period: kv.parse_or("sync_period", base.sync_period)?,
            epsilon: EpsilonSchedule {
                start: kv.parse_or("epsilon_start", base.epsilon.start)?,
                end: kv.parse_or("epsilon_end", base.epsilon.end)?,
                decay_steps: kv.parse_or("epsilon_decay_steps", base.epsilon.decay_steps)?,
            },
            hidden_size: kv.parse_or("hidden_size", base.hidden_size)?,
            rollout_length: kv.parse_or("rollout_length", base.rollout_length)?,
            entropy_coeff: kv.parse_or("entropy_coeff", base.entropy_coeff)?,
            critic_tanh: kv.parse_or("critic_tanh", base.critic_tanh)?,
            return_scale: kv.parse_or("return_scale", 1.0 / (1.0 - discount))?,
            grad_clip,
            observation_scaling: kv.parse_or("observation_scaling", base.observation_scaling)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The agent keys written into preset files.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("discount", self.discount);
        kv.set("learning_rate", self.learning_rate);
        kv.set(
            "optimizer",
            match self.optimizer {
                OptimizerKind::Sgd => "sgd",
                OptimizerKind::Adam { .. } => "adam",
            },
        );
        kv.set("batch_size", self.batch_size);
        kv.set("buffer_capacity", self.buffer_capacity);
        kv.set("sync_period", self.sync_period);
        kv.set("epsilon_start", self.epsilon.start);
        kv.set("epsilon_end", self.epsilon.end);
        kv.set("epsilon_decay_steps", self.epsilon.decay_steps);
        kv.set("hidden_size", self.hidden_size);
        kv.set("rollout_length", self.rollout_length);
        kv.set("entropy_coeff", self.entropy_coeff);
        kv
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config("discount", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("buffer_capacity", "must be positive"));
        }
        if self.sync_period == 0 {
            return Err(Error::config("sync_period", "must be positive"));
        }
        EpsilonSchedule::new(self.epsilon.start, self.epsilon.end, self.epsilon.decay_steps)?;
        if self.hidden_size == 0 {
            return Err(Error::config("hidden_size", "must be positive"));
        }
        if self.rollout_length == 0 {
            return Err(Error::config("rollout_length", "must be positive"));
        }
        if !(self.entropy_coeff >= 0.0 && self.entropy_coeff.is_finite()) {
            return Err(Error::config("entropy_coeff", "must be nonnegative"));
        }
        if !(self.return_scale > 0.0 && self.return_scale.is_finite()) {
            return Err(Error::config("return_scale", "must be positive"));
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return Err(Error::config("grad_clip", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Index of the largest value, ties broken uniformly at random.
pub fn argmax_random_ties<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[rng.gen_range(0..n)],
    }
}

/// Anything that can pick a maintenance action without exploring.
pub trait GreedyPolicy {
    fn num_sensors(&self) -> usize;
    fn greedy_action(&self, observation: &Observation, rng: &mut crate::rng::SimRng) -> Action;
}
