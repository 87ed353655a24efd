//! Experiment protocols: multi-session training with learning curves, and
//! greedy evaluation with fault tracking.

pub mod csv;
mod faults;
mod stats;
mod tpr;

pub use faults::{track_faults, EndCause, FaultRecord, FaultUnit};
pub use stats::{aggregate_rewards, mean_and_std, student_t_quantile, CurveStat};
pub use tpr::{
    collect_fault_records, evaluate_tpr, FaultType, TprEntry, TprReport, DEFAULT_THRESHOLDS,
};

use rand::Rng;
use rayon::prelude::*;

use crate::agents::{
    A2cAgent, AgentCheckpoint, AgentConfig, Algorithm, DqnAgent, GreedyPolicy, Transition,
};
use crate::env::{Action, Environment, Observation, ScenarioConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, SimRng};

const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 100;

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Total reward of each episode, in order.
    pub episode_rewards: Vec<f64>,
    pub final_checkpoint: AgentCheckpoint,
}

pub fn train_session(
    scenario: &ScenarioConfig,
    agent_config: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<SessionResult> {
    train_session_with(scenario, agent_config, episodes, seed, |_, _, _| {})
}

/// Trains one agent for `episodes` episodes. Exploration state and the replay
/// buffer carry over between episodes. `observer` sees the episode index,
/// action and outcome of every slot.
pub fn train_session_with(
    scenario: &ScenarioConfig,
    agent_config: &AgentConfig,
    episodes: usize,
    seed: u64,
    mut observer: impl FnMut(usize, Action, &StepOutcome),
) -> Result<SessionResult> {
    agent_config.validate()?;
    let mut env = Environment::new(scenario.clone(), derive_seed(seed, ENV_STREAM))?;
    let m = scenario.num_sensors;
    let agent_seed = derive_seed(seed, AGENT_STREAM);
    let mut episode_rewards = Vec::with_capacity(episodes);

    let final_checkpoint = match agent_config.algorithm {
        Algorithm::MDqn | Algorithm::MBegDqn => {
            let mut agent = DqnAgent::new(agent_config, m, scenario.aoi_max, agent_seed)?;
            for episode in 0..episodes {
                let mut observation = env.reset();
                let mut total = 0.0;
                while !env.is_terminal() {
                    let action = agent.act(&observation);
                    let outcome = env.step(action)?;
                    observer(episode, action, &outcome);
                    total += outcome.reward;
                    let next = outcome.next_observation.clone();
                    agent.observe(Transition {
                        observation,
                        action,
                        reward: outcome.reward,
                        next_observation: next.clone(),
                        terminal: outcome.terminal,
                    })?;
                    observation = next;
                }
                episode_rewards.push(total);
            }
            AgentCheckpoint::Dqn(agent)
        }
        Algorithm::MA2c => {
            let mut agent = A2cAgent::new(agent_config, m, scenario.aoi_max, agent_seed)?;
            for episode in 0..episodes {
                env.reset();
                let mut total = 0.0;
                while !env.is_terminal() {
                    let rollout = agent.rollout_with(&mut env, |action, outcome| {
                        observer(episode, action, outcome);
                        total += outcome.reward;
                    })?;
                    agent.a2c_update(&rollout)?;
                }
                episode_rewards.push(total);
            }
            AgentCheckpoint::A2c(agent)
        }
    };
    Ok(SessionResult {
        seed,
        algorithm: agent_config.algorithm,
        episode_rewards,
        final_checkpoint,
    })
}

/// Trains one session per seed on the current rayon pool. Results come back
/// in seed order whatever the scheduling.
pub fn train_sessions(
    scenario: &ScenarioConfig,
    agent_config: &AgentConfig,
    episodes: usize,
    seeds: &[u64],
) -> Result<Vec<SessionResult>> {
    seeds
        .par_iter()
        .map(|&seed| train_session(scenario, agent_config, episodes, seed))
        .collect()
}

pub fn aggregate_curves(results: &[SessionResult], confidence: f64) -> Result<Vec<CurveStat>> {
    let sessions: Vec<&[f64]> = results.iter().map(|r| r.episode_rewards.as_slice()).collect();
    aggregate_rewards(&sessions, confidence)
}

/// Total reward of each of `episodes` greedy episodes.
pub fn evaluate_greedy_reward(
    policy: &impl GreedyPolicy,
    scenario: &ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if policy.num_sensors() != scenario.num_sensors {
        return Err(Error::ShapeMismatch {
            expected: policy.num_sensors(),
            actual: scenario.num_sensors,
        });
    }
    let mut env = Environment::new(scenario.clone(), derive_seed(seed, ENV_STREAM))?;
    let mut policy_rng = rng::seeded(derive_seed(seed, 1));
    (0..episodes)
        .map(|_| {
            env.reset();
            let mut total = 0.0;
            while !env.is_terminal() {
                let action = policy.greedy_action(env.observation(), &mut policy_rng);
                total += env.step(action)?.reward;
            }
            Ok(total)
        })
        .collect()
}

/// Picks each action with probability 1/3; a reference point for learned
/// policies.
#[derive(Debug, Clone, Copy)]
pub struct UniformRandomPolicy {
    pub num_sensors: usize,
}

impl GreedyPolicy for UniformRandomPolicy {
    fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    fn greedy_action(&self, _: &Observation, rng: &mut SimRng) -> Action {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    }
}

/// Issues the same action in every slot.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    pub num_sensors: usize,
    pub action: Action,
}

impl GreedyPolicy for ConstantPolicy {
    fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    fn greedy_action(&self, _: &Observation, _: &mut SimRng) -> Action {
        self.action
    }
}
