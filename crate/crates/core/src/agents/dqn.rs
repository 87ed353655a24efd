//! Deep Q-learning with replay memory and a periodically synced target net.
//!
//! With `biased` set, exploration first picks No-maintenance with probability
//! ε and otherwise falls through to ordinary ε-greedy using the same ε.

use rand::Rng;

use super::{
    argmax_random_ties, AgentConfig, Algorithm, EpsilonSchedule, GreedyPolicy,
    ObservationScaling, ReplayBuffer, Transition,
};
use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::neural::{clip_global_norm, Activation, DenseNet, Optimizer};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone)]
pub struct DqnAgent {
    online: DenseNet,
    target: DenseNet,
    optimizer: Optimizer,
    buffer: ReplayBuffer,
    schedule: EpsilonSchedule,
    sync_period: u64,
    batch_size: usize,
    discount: f64,
    biased: bool,
    grad_clip: Option<f64>,
    steps: u64,
    aoi_max: u32,
    scaling: ObservationScaling,
    rng: SimRng,
}

impl DqnAgent {
    /// Online net `M -> hidden (ReLU) -> 3`, target initialised as a copy.
    pub fn new(config: &AgentConfig, num_sensors: usize, aoi_max: u32, seed: u64) -> Result<Self> {
        let mut init_rng = rng::seeded(rng::derive_seed(seed, 1));
        let online = DenseNet::new(
            &[num_sensors, config.hidden_size, Action::COUNT],
            &[Activation::Relu, Activation::Identity],
            &mut init_rng,
        )?;
        Self::from_network(online, config, aoi_max, seed)
    }

    /// Wraps an existing online network (any hidden shape, 3 outputs).
    pub fn from_network(
        online: DenseNet,
        config: &AgentConfig,
        aoi_max: u32,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if online.output_size() != Action::COUNT {
            return Err(Error::Usage(format!(
                "Q-network must have {} outputs, has {}",
                Action::COUNT,
                online.output_size()
            )));
        }
        let biased = match config.algorithm {
            Algorithm::MDqn => false,
            Algorithm::MBegDqn => true,
            Algorithm::MA2c => {
                return Err(Error::Usage("m-a2c is not a Q-learning algorithm".into()))
            }
        };
        Ok(Self {
            target: online.clone(),
            optimizer: Optimizer::new(config.optimizer_config(), online.parameters().len()),
            online,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            schedule: config.epsilon,
            sync_period: config.sync_period,
            batch_size: config.batch_size,
            discount: config.discount,
            biased,
            grad_clip: config.grad_clip,
            steps: 0,
            aoi_max,
            scaling: config.observation_scaling,
            rng: rng::seeded(rng::derive_seed(seed, 2)),
        })
    }

    pub fn online(&self) -> &DenseNet {
        &self.online
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn is_biased(&self) -> bool {
        self.biased
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn aoi_max(&self) -> u32 {
        self.aoi_max
    }

    pub fn scaling(&self) -> ObservationScaling {
        self.scaling
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.value(self.steps)
    }

    pub(crate) fn restore(
        online: DenseNet,
        target: DenseNet,
        config: &AgentConfig,
        aoi_max: u32,
        steps: u64,
        seed: u64,
    ) -> Result<Self> {
        let mut agent = Self::from_network(online, config, aoi_max, seed)?;
        agent.target.copy_from(&target)?;
        agent.steps = steps;
        Ok(agent)
    }

    fn inputs(&self, observation: &Observation) -> Vec<f64> {
        self.scaling.normalize(observation, self.aoi_max)
    }

    pub fn q_values(&self, observation: &Observation) -> Result<Vec<f64>> {
        self.online.forward(&self.inputs(observation))
    }

    fn greedy_from<R: Rng + ?Sized>(&self, observation: &Observation, rng: &mut R) -> Action {
        let q = self
            .q_values(observation)
            .expect("observation matches network input size");
        Action::from_index(argmax_random_ties(&q, rng)).unwrap()
    }

    /// Uniform action with probability ε(step), otherwise greedy.
    pub fn act_epsilon_greedy<R: Rng + ?Sized>(
        &self,
        observation: &Observation,
        step: u64,
        rng: &mut R,
    ) -> Action {
        let epsilon = self.schedule.value(step);
        if rng.gen::<f64>() < epsilon {
            Action::ALL[rng.gen_range(0..Action::COUNT)]
        } else {
            self.greedy_from(observation, rng)
        }
    }

    /// No-maintenance with probability ε(step), otherwise ε-greedy with the
    /// same ε.
    pub fn act_biased<R: Rng + ?Sized>(
        &self,
        observation: &Observation,
        step: u64,
        rng: &mut R,
    ) -> Action {
        let epsilon = self.schedule.value(step);
        if rng.gen::<f64>() < epsilon {
            Action::NoMaintenance
        } else {
            self.act_epsilon_greedy(observation, step, rng)
        }
    }

    /// Exploratory action at the agent's own step count.
    pub fn act(&mut self, observation: &Observation) -> Action {
        let mut rng = self.rng.clone();
        let action = if self.biased {
            self.act_biased(observation, self.steps, &mut rng)
        } else {
            self.act_epsilon_greedy(observation, self.steps, &mut rng)
        };
        self.rng = rng;
        action
    }

    /// `r` for terminal transitions, `r + γ max_a' Q̂(next, a')` otherwise,
    /// using the target network.
    pub fn dqn_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.terminal {
                    Ok(t.reward)
                } else {
                    let q_next = self.target.forward(&self.inputs(&t.next_observation))?;
                    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Ok(t.reward + self.discount * best)
                }
            })
            .collect()
    }

    /// One gradient step on the mean squared TD error of `batch`. Targets
    /// come from the frozen target network; only the online net changes.
    pub fn dqn_learn(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let targets = self.dqn_targets(batch)?;
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.online.parameters().len()];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let trace = self.online.forward_trace(&self.inputs(&t.observation))?;
            let q = trace.output()[t.action.index()];
            let err = y - q;
            loss += err * err / n;
            let mut upstream = [0.0; Action::COUNT];
            upstream[t.action.index()] = -2.0 * err / n;
            self.online.accumulate_backward(&trace, &upstream, &mut grad)?;
        }
        if let Some(clip) = self.grad_clip {
            clip_global_norm(&mut [&mut grad], clip);
        }
        self.optimizer.step(self.online.parameters_mut(), &grad)?;
        Ok(loss)
    }

    /// Samples a batch from replay and learns. `None` while the buffer holds
    /// fewer than `batch_size` transitions.
    pub fn learn_from_buffer(&mut self) -> Result<Option<f64>> {
        let Some(batch) = self.buffer.sample(self.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        self.dqn_learn(&batch).map(Some)
    }

    pub fn sync_target(&mut self) {
        self.target
            .copy_from(&self.online)
            .expect("online and target share a shape");
    }

    /// Stores the transition, learns from a replay batch, advances the step
    /// counter and syncs the target every `sync_period` steps.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<f64>> {
        self.buffer.push(transition);
        let loss = self.learn_from_buffer()?;
        self.steps += 1;
        if self.steps.is_multiple_of(self.sync_period) {
            self.sync_target();
        }
        Ok(loss)
    }
}

impl GreedyPolicy for DqnAgent {
    fn num_sensors(&self) -> usize {
        self.online.input_size()
    }

    fn greedy_action(&self, observation: &Observation, rng: &mut SimRng) -> Action {
        self.greedy_from(observation, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Q-network with zero weights whose outputs are the given constants.
    pub(crate) fn constant_q(num_sensors: usize, q: [f64; 3]) -> DenseNet {
        let mut params = vec![0.0; DenseNet::param_count(&[num_sensors, 3])];
        let n = params.len();
        params[n - 3..].copy_from_slice(&q);
        DenseNet::from_parameters(&[num_sensors, 3], &[Activation::Identity], params).unwrap()
    }

    fn agent_with(q: [f64; 3], algorithm: Algorithm, epsilon: f64) -> DqnAgent {
        let mut cfg = AgentConfig::new(algorithm);
        cfg.epsilon = EpsilonSchedule::constant(epsilon);
        DqnAgent::from_network(constant_q(2, q), &cfg, 100, 0).unwrap()
    }

    fn obs() -> Observation {
        Observation { aoi: vec![3, 7] }
    }

    #[test]
    fn greedy_picks_max_q() {
        let agent = agent_with([0.1, 0.9, 0.2], Algorithm::MDqn, 0.0);
        let mut r = rng::seeded(1);
        for step in 0..1000 {
            assert_eq!(
                agent.act_epsilon_greedy(&obs(), step, &mut r),
                Action::NetworkMaintenance
            );
        }
    }

    #[test]
    fn biased_with_full_epsilon_never_maintains() {
        let agent = agent_with([0.1, 0.9, 0.2], Algorithm::MBegDqn, 1.0);
        let mut r = rng::seeded(2);
        for step in 0..1000 {
            assert_eq!(agent.act_biased(&obs(), step, &mut r), Action::NoMaintenance);
        }
    }

    #[test]
    fn argmax_invariant_to_positive_scaling() {
        let a = agent_with([0.3, -0.5, 0.7], Algorithm::MDqn, 0.0);
        let b = agent_with([3.0, -5.0, 7.0], Algorithm::MDqn, 0.0);
        let mut r = rng::seeded(3);
        assert_eq!(a.greedy_action(&obs(), &mut r), b.greedy_action(&obs(), &mut r));
    }

    #[test]
    fn targets() {
        let mut cfg = AgentConfig::new(Algorithm::MDqn);
        cfg.discount = 0.999;
        let agent = DqnAgent::from_network(constant_q(1, [10.0, 3.0, -1.0]), &cfg, 10, 0).unwrap();
        let terminal = Transition {
            observation: Observation { aoi: vec![1] },
            action: Action::NoMaintenance,
            reward: 0.4,
            next_observation: Observation { aoi: vec![2] },
            terminal: true,
        };
        let live = Transition {
            reward: 1.0,
            terminal: false,
            ..terminal.clone()
        };
        let y = agent.dqn_targets(&[terminal, live.clone()]).unwrap();
        assert_eq!(y[0], 0.4);
        assert!((y[1] - 10.99).abs() < 1e-12);

        cfg.discount = f64::MIN_POSITIVE;
        let agent = DqnAgent::from_network(constant_q(1, [10.0, 3.0, -1.0]), &cfg, 10, 0).unwrap();
        assert!((agent.dqn_targets(&[live]).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_transition_loss_is_squared_error() {
        let mut cfg = AgentConfig::new(Algorithm::MDqn);
        cfg.optimizer = crate::neural::OptimizerKind::Sgd;
        cfg.discount = 0.5;
        let mut agent = DqnAgent::from_network(constant_q(1, [2.0, 0.0, 0.0]), &cfg, 10, 0).unwrap();
        let t = Transition {
            observation: Observation { aoi: vec![1] },
            action: Action::NetworkMaintenance,
            reward: 1.0,
            next_observation: Observation { aoi: vec![1] },
            terminal: false,
        };
        // Y = 1 + 0.5 * 2 = 2, Q = 0
        let loss = agent.dqn_learn(&[t]).unwrap();
        assert!((loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_error_batch_leaves_parameters_under_sgd() {
        let mut cfg = AgentConfig::new(Algorithm::MDqn);
        cfg.optimizer = crate::neural::OptimizerKind::Sgd;
        let mut agent = DqnAgent::from_network(constant_q(1, [0.4, 0.0, 0.0]), &cfg, 10, 0).unwrap();
        let t = Transition {
            observation: Observation { aoi: vec![1] },
            action: Action::NoMaintenance,
            reward: 0.4,
            next_observation: Observation { aoi: vec![1] },
            terminal: true,
        };
        let before = agent.online().parameters().to_vec();
        assert_eq!(agent.dqn_learn(&[t]).unwrap(), 0.0);
        assert_eq!(agent.online().parameters(), before.as_slice());
    }

    #[test]
    fn learning_waits_for_a_full_batch() {
        let mut cfg = AgentConfig::new(Algorithm::MBegDqn);
        cfg.batch_size = 4;
        let mut agent = DqnAgent::new(&cfg, 2, 10, 9).unwrap();
        let t = Transition {
            observation: Observation { aoi: vec![1, 1] },
            action: Action::NoMaintenance,
            reward: 1.0,
            next_observation: Observation { aoi: vec![1, 2] },
            terminal: false,
        };
        for _ in 0..3 {
            assert_eq!(agent.observe(t.clone()).unwrap(), None);
        }
        assert!(agent.observe(t).unwrap().is_some());
    }

    #[test]
    fn sync_fires_on_multiples_of_period() {
        let mut cfg = AgentConfig::new(Algorithm::MDqn);
        cfg.batch_size = 1;
        cfg.sync_period = 5;
        cfg.learning_rate = 1e-2;
        let mut agent = DqnAgent::new(&cfg, 2, 10, 11).unwrap();
        assert_eq!(agent.online().parameters(), agent.target().parameters());
        let t = Transition {
            observation: Observation { aoi: vec![3, 1] },
            action: Action::SensorsMaintenance,
            reward: 0.5,
            next_observation: Observation { aoi: vec![1, 1] },
            terminal: false,
        };
        let mut synced_at = Vec::new();
        for _ in 0..15 {
            agent.observe(t.clone()).unwrap();
            if agent.online().parameters() == agent.target().parameters() {
                synced_at.push(agent.steps());
            }
        }
        assert_eq!(synced_at, vec![5, 10, 15]);
    }

    #[test]
    fn rejects_a2c_config() {
        let cfg = AgentConfig::new(Algorithm::MA2c);
        assert!(DqnAgent::new(&cfg, 2, 10, 0).is_err());
    }
}
