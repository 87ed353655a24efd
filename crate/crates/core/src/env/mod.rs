//! Ground-truth fault dynamics and the AoI observation process.
//!
//! Each sensor and the network follow an independent two-state Markov chain.
//! In every slot a sensor generates an update with a probability that depends
//! on its own health, the network delivers each generated update with a
//! probability that depends on the network's health, and the per-sensor AoI
//! either resets to 1 (generated and delivered) or increments, capped at
//! `aoi_max`. Maintenance actions force the targeted units healthy for the
//! next slot.
//!
//! Random draws happen in a fixed order per slot: generation for sensors
//! `0..M`, delivery for sensors `0..M`, sensor health transitions `0..M`, then
//! the network health transition. A draw is consumed even when its outcome is
//! forced, so the stream position never depends on the chosen action.

mod distribution;
mod scenario;

pub use distribution::{one_step_distribution, OutcomeDistribution, MAX_ENUMERATED_SENSORS};
pub use scenario::{ScenarioConfig, TwoStateChain, PRESET_NAMES, SCENARIO_KEYS};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum HealthState {
    Healthy = 0,
    Faulty = 1,
}

impl HealthState {
    pub fn is_faulty(self) -> bool {
        self == HealthState::Faulty
    }

    fn from_healthy(healthy: bool) -> Self {
        if healthy {
            HealthState::Healthy
        } else {
            HealthState::Faulty
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Action {
    NoMaintenance = 0,
    NetworkMaintenance = 1,
    SensorsMaintenance = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [
        Action::NoMaintenance,
        Action::NetworkMaintenance,
        Action::SensorsMaintenance,
    ];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Action> {
        Self::ALL.get(idx).copied()
    }
}

/// Hidden ground truth. Agents never see this.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SystemState {
    pub sensor_health: Vec<HealthState>,
    pub network_health: HealthState,
}

impl SystemState {
    pub fn all_healthy(num_sensors: usize) -> Self {
        Self {
            sensor_health: vec![HealthState::Healthy; num_sensors],
            network_health: HealthState::Healthy,
        }
    }
}

/// Per-sensor Age of Information, each component in `[1, aoi_max]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub aoi: Vec<u32>,
}

impl Observation {
    pub fn fresh(num_sensors: usize) -> Self {
        Self {
            aoi: vec![1; num_sensors],
        }
    }

    pub fn len(&self) -> usize {
        self.aoi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aoi.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.aoi.iter().map(|&a| f64::from(a)).sum::<f64>() / self.aoi.len() as f64
    }
}

/// Realised random variables of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub generated: Vec<bool>,
    pub delivered: Vec<bool>,
    pub sensor_next: Vec<HealthState>,
    pub network_next: HealthState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_observation: Observation,
    pub terminal: bool,
    /// Ground truth for harness instrumentation only.
    pub truth_next_state: SystemState,
    pub draws: Draws,
}

/// `1 / (weight_cost * c[action] + weight_aoi * mean(aoi))`.
pub fn reward_fn(action: Action, aoi: &Observation, config: &ScenarioConfig) -> f64 {
    let cost = config.maintenance_costs[action.index()];
    1.0 / (config.weight_cost * cost + config.weight_aoi * aoi.mean())
}

/// Probability that sensor `i` generates an update this slot.
pub(crate) fn generation_prob(config: &ScenarioConfig, health: HealthState) -> f64 {
    match health {
        HealthState::Healthy => config.gen_prob_healthy,
        HealthState::Faulty => config.gen_prob_faulty,
    }
}

pub(crate) fn delivery_prob(config: &ScenarioConfig, health: HealthState) -> f64 {
    match health {
        HealthState::Healthy => config.deliver_prob_healthy,
        HealthState::Faulty => config.deliver_prob_faulty,
    }
}

/// Probability that sensor `i` is healthy in the next slot.
pub(crate) fn sensor_healthy_next(
    config: &ScenarioConfig,
    sensor: usize,
    health: HealthState,
    action: Action,
) -> f64 {
    if action == Action::SensorsMaintenance {
        1.0
    } else {
        config
            .sensor_chain_for(sensor)
            .healthy_next(health.is_faulty())
    }
}

pub(crate) fn network_healthy_next(
    config: &ScenarioConfig,
    health: HealthState,
    action: Action,
) -> f64 {
    if action == Action::NetworkMaintenance {
        1.0
    } else {
        config.network_chain.healthy_next(health.is_faulty())
    }
}

pub(crate) fn next_aoi(config: &ScenarioConfig, aoi: u32, updated: bool) -> u32 {
    if updated {
        1
    } else {
        config.aoi_max.min(aoi.saturating_add(1))
    }
}

fn bernoulli(rng: &mut SimRng, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Samples one slot of the dynamics without touching any episode bookkeeping.
pub fn sample_transition(
    config: &ScenarioConfig,
    state: &SystemState,
    aoi: &Observation,
    action: Action,
    rng: &mut SimRng,
) -> (SystemState, Observation, Draws) {
    let m = config.num_sensors;
    let generated: Vec<bool> = state
        .sensor_health
        .iter()
        .map(|&h| bernoulli(rng, generation_prob(config, h)))
        .collect();
    let p_deliver = delivery_prob(config, state.network_health);
    let delivered: Vec<bool> = (0..m).map(|_| bernoulli(rng, p_deliver)).collect();
    let next_aoi_vec = aoi
        .aoi
        .iter()
        .zip(generated.iter().zip(&delivered))
        .map(|(&a, (&g, &d))| next_aoi(config, a, g && d))
        .collect();
    let sensor_next: Vec<HealthState> = state
        .sensor_health
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            HealthState::from_healthy(bernoulli(rng, sensor_healthy_next(config, i, h, action)))
        })
        .collect();
    let network_next = HealthState::from_healthy(bernoulli(
        rng,
        network_healthy_next(config, state.network_health, action),
    ));
    let next_state = SystemState {
        sensor_health: sensor_next.clone(),
        network_health: network_next,
    };
    let draws = Draws {
        generated,
        delivered,
        sensor_next,
        network_next,
    };
    (next_state, Observation { aoi: next_aoi_vec }, draws)
}

/// A seeded, single-threaded episode simulator.
#[derive(Debug, Clone)]
pub struct Environment {
    config: ScenarioConfig,
    rng: SimRng,
    state: SystemState,
    observation: Observation,
    slot: u32,
}

impl Environment {
    /// Validates `config`, seeds the stream and resets to the initial
    /// condition: every unit healthy and every AoI equal to 1.
    pub fn new(config: ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = config.num_sensors;
        Ok(Self {
            config,
            rng: rng::seeded(seed),
            state: SystemState::all_healthy(m),
            observation: Observation::fresh(m),
            slot: 0,
        })
    }

    /// Starts a new episode, continuing the same random stream.
    pub fn reset(&mut self) -> Observation {
        let m = self.config.num_sensors;
        self.state = SystemState::all_healthy(m);
        self.observation = Observation::fresh(m);
        self.slot = 0;
        self.observation.clone()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    /// Ground truth, for instrumentation and oracles.
    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn is_terminal(&self) -> bool {
        self.slot >= self.config.horizon
    }

    /// Places the environment in an arbitrary consistent situation.
    pub fn set_situation(&mut self, state: SystemState, observation: Observation) -> Result<()> {
        let m = self.config.num_sensors;
        if state.sensor_health.len() != m || observation.len() != m {
            return Err(Error::Usage(format!(
                "situation has {} sensors / {} AoI entries, scenario has {m}",
                state.sensor_health.len(),
                observation.len()
            )));
        }
        if observation
            .aoi
            .iter()
            .any(|&a| a == 0 || a > self.config.aoi_max)
        {
            return Err(Error::Usage(format!(
                "AoI components must lie in [1, {}]",
                self.config.aoi_max
            )));
        }
        self.state = state;
        self.observation = observation;
        Ok(())
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::Usage(format!(
                "step after terminal slot {}",
                self.config.horizon
            )));
        }
        let (next_state, next_obs, draws) = sample_transition(
            &self.config,
            &self.state,
            &self.observation,
            action,
            &mut self.rng,
        );
        let reward_aoi = if self.config.reward_uses_pre_transition_aoi {
            &self.observation
        } else {
            &next_obs
        };
        let reward = reward_fn(action, reward_aoi, &self.config);
        self.slot += 1;
        self.state = next_state.clone();
        self.observation = next_obs.clone();
        Ok(StepOutcome {
            reward,
            next_observation: next_obs,
            terminal: self.is_terminal(),
            truth_next_state: next_state,
            draws,
        })
    }
}
