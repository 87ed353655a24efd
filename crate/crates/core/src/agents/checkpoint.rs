//! Agent checkpoints: a metadata header followed by network records.
//!
//! Byte layout, little-endian:
//!
//! | field              | type                                  |
//! |--------------------|---------------------------------------|
//! | magic              | 8 bytes `AOIAGNT1`                    |
//! | kind               | u8 (0 m-dqn, 1 m-beg-dqn, 2 m-a2c, 3 never-maintain, 4 aoi-threshold) |
//! | num_sensors        | u32                                   |
//! | aoi_max            | u32 (observation normalisation)       |
//! | scaling            | u8 (0 linear, 1 log)                  |
//! | step count         | u64                                   |
//! | schedule position  | f64 (ε at the step count; 0 if unused)|
//! | extra              | f64 (A2C return scale, threshold AoI) |
//! | network count      | u32                                   |
//! | networks           | network checkpoint records            |
//!
//! DQN agents store `online, target`; A2C agents store `trunk, actor, critic`.

use std::io::{Read, Write};
use std::path::Path;

use super::{
    A2cAgent, AgentConfig, Algorithm, DqnAgent, EpsilonSchedule, GreedyPolicy,
    ObservationScaling,
};
use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::neural::{read_net, write_net, DenseNet};
use crate::rng::SimRng;

pub const AGENT_MAGIC: &[u8; 8] = b"AOIAGNT1";

/// A trained or scripted policy, loadable for evaluation.
#[derive(Debug, Clone)]
pub enum AgentCheckpoint {
    Dqn(DqnAgent),
    A2c(A2cAgent),
    /// Never issues a maintenance action.
    NeverMaintain { num_sensors: usize },
    /// Waits until some AoI exceeds `threshold`; then services the network
    /// if every sensor is stale, otherwise the sensors.
    AoiThreshold { num_sensors: usize, threshold: u32 },
}

impl AgentCheckpoint {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AgentCheckpoint::Dqn(agent) if agent.is_biased() => "m-beg-dqn",
            AgentCheckpoint::Dqn(_) => "m-dqn",
            AgentCheckpoint::A2c(_) => "m-a2c",
            AgentCheckpoint::NeverMaintain { .. } => "never-maintain",
            AgentCheckpoint::AoiThreshold { .. } => "aoi-threshold",
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        write_agent(self, &mut bytes)?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        read_agent(&mut bytes.as_slice())
    }

    /// Parameters of every network, in checkpoint order.
    pub fn parameter_snapshot(&self) -> Vec<Vec<f64>> {
        match self {
            AgentCheckpoint::Dqn(a) => vec![
                a.online().parameters().to_vec(),
                a.target().parameters().to_vec(),
            ],
            AgentCheckpoint::A2c(a) => vec![
                a.trunk().parameters().to_vec(),
                a.actor().parameters().to_vec(),
                a.critic().parameters().to_vec(),
            ],
            _ => Vec::new(),
        }
    }
}

impl GreedyPolicy for AgentCheckpoint {
    fn num_sensors(&self) -> usize {
        match self {
            AgentCheckpoint::Dqn(a) => a.num_sensors(),
            AgentCheckpoint::A2c(a) => a.num_sensors(),
            AgentCheckpoint::NeverMaintain { num_sensors }
            | AgentCheckpoint::AoiThreshold { num_sensors, .. } => *num_sensors,
        }
    }

    fn greedy_action(&self, observation: &Observation, rng: &mut SimRng) -> Action {
        match self {
            AgentCheckpoint::Dqn(a) => a.greedy_action(observation, rng),
            AgentCheckpoint::A2c(a) => a.greedy_action(observation, rng),
            AgentCheckpoint::NeverMaintain { .. } => Action::NoMaintenance,
            AgentCheckpoint::AoiThreshold { threshold, .. } => {
                let stale = observation.aoi.iter().filter(|&&a| a > *threshold).count();
                if stale == 0 {
                    Action::NoMaintenance
                } else if stale == observation.len() {
                    Action::NetworkMaintenance
                } else {
                    Action::SensorsMaintenance
                }
            }
        }
    }
}

pub fn write_agent<W: Write>(agent: &AgentCheckpoint, out: &mut W) -> Result<()> {
    let num_sensors = agent.num_sensors() as u32;
    let (kind, aoi_max, scaling, steps, schedule, extra, nets): (u8, u32, u8, u64, f64, f64, Vec<&DenseNet>) =
        match agent {
            AgentCheckpoint::Dqn(a) => (
                if a.is_biased() { 1 } else { 0 },
                a.aoi_max(),
                a.scaling().code(),
                a.steps(),
                a.epsilon(),
                0.0,
                vec![a.online(), a.target()],
            ),
            AgentCheckpoint::A2c(a) => (
                2,
                a.aoi_max(),
                a.scaling().code(),
                a.steps(),
                0.0,
                a.return_scale(),
                vec![a.trunk(), a.actor(), a.critic()],
            ),
            AgentCheckpoint::NeverMaintain { .. } => (3, 1, 0, 0, 0.0, 0.0, vec![]),
            AgentCheckpoint::AoiThreshold { threshold, .. } => {
                (4, 1, 0, 0, 0.0, f64::from(*threshold), vec![])
            }
        };
    out.write_all(AGENT_MAGIC)?;
    out.write_all(&[kind])?;
    out.write_all(&num_sensors.to_le_bytes())?;
    out.write_all(&aoi_max.to_le_bytes())?;
    out.write_all(&[scaling])?;
    out.write_all(&steps.to_le_bytes())?;
    out.write_all(&schedule.to_le_bytes())?;
    out.write_all(&extra.to_le_bytes())?;
    out.write_all(&(nets.len() as u32).to_le_bytes())?;
    for net in nets {
        write_net(net, out)?;
    }
    Ok(())
}

pub fn read_agent<R: Read>(input: &mut R) -> Result<AgentCheckpoint> {
    use crate::neural::checkpoint::{read_f64, read_u32, read_u64};

    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != AGENT_MAGIC {
        return Err(Error::Checkpoint("bad agent magic".into()));
    }
    let mut byte = [0u8; 1];
    input.read_exact(&mut byte)?;
    let kind = byte[0];
    let num_sensors = read_u32(input)? as usize;
    let aoi_max = read_u32(input)?;
    input.read_exact(&mut byte)?;
    let scaling = ObservationScaling::from_code(byte[0])
        .ok_or_else(|| Error::Checkpoint(format!("unknown scaling code {}", byte[0])))?;
    let steps = read_u64(input)?;
    let _schedule = read_f64(input)?;
    let extra = read_f64(input)?;
    let count = read_u32(input)? as usize;
    if count > 8 {
        return Err(Error::Checkpoint(format!("implausible network count {count}")));
    }
    let nets = (0..count)
        .map(|_| read_net(input))
        .collect::<Result<Vec<_>>>()?;
    let expect_nets = |n: usize| -> Result<()> {
        if nets.len() != n {
            return Err(Error::Checkpoint(format!(
                "expected {n} networks, found {}",
                nets.len()
            )));
        }
        if nets.first().is_some_and(|net| net.input_size() != num_sensors) {
            return Err(Error::Checkpoint("network input does not match sensor count".into()));
        }
        Ok(())
    };

    // Evaluation never explores; the schedule is pinned at zero.
    let eval_config = |algorithm| {
        let mut cfg = AgentConfig::new(algorithm);
        cfg.epsilon = EpsilonSchedule::constant(0.0);
        cfg.observation_scaling = scaling;
        cfg.buffer_capacity = 1;
        cfg
    };
    match kind {
        0 | 1 => {
            expect_nets(2)?;
            let algo = if kind == 0 {
                Algorithm::MDqn
            } else {
                Algorithm::MBegDqn
            };
            let mut it = nets.into_iter();
            let (online, target) = (it.next().unwrap(), it.next().unwrap());
            let cfg = eval_config(algo);
            Ok(AgentCheckpoint::Dqn(DqnAgent::restore(
                online, target, &cfg, aoi_max, steps, 0,
            )?))
        }
        2 => {
            expect_nets(3)?;
            let mut it = nets.into_iter();
            let (trunk, actor, critic) = (
                it.next().unwrap(),
                it.next().unwrap(),
                it.next().unwrap(),
            );
            let mut cfg = eval_config(Algorithm::MA2c);
            cfg.return_scale = extra;
            Ok(AgentCheckpoint::A2c(
                A2cAgent::from_networks(trunk, actor, critic, &cfg, aoi_max, 0)?.with_steps(steps),
            ))
        }
        3 => {
            expect_nets(0)?;
            Ok(AgentCheckpoint::NeverMaintain { num_sensors })
        }
        4 => {
            expect_nets(0)?;
            Ok(AgentCheckpoint::AoiThreshold {
                num_sensors,
                threshold: extra as u32,
            })
        }
        other => Err(Error::Checkpoint(format!("unknown agent kind {other}"))),
    }
}
