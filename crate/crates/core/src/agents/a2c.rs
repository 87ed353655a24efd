//! Synchronous advantage actor-critic.
//!
//! A shared trunk (`M -> 32 -> 128`, ReLU) feeds an actor head producing
//! three logits and a critic head (`128 -> 32` ReLU `-> 1`, tanh by default).
//! The critic predicts values divided by `return_scale`, which keeps the
//! targets inside the tanh range; multiplying by `return_scale` gives values
//! in return units.

use rand::Rng;

use super::{AgentConfig, Algorithm, GreedyPolicy, ObservationScaling};
use crate::env::{Action, Environment, Observation};
use crate::error::{Error, Result};
use crate::neural::{clip_global_norm, Activation, DenseNet, Optimizer};
use crate::rng::{self, SimRng};

pub const TRUNK_HIDDEN: [usize; 2] = [32, 128];
pub const CRITIC_HIDDEN: usize = 32;
const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
}

/// A trajectory of at most `rollout_length` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    /// Value of the observation after the last step in return units, or 0
    /// when the episode ended.
    pub bootstrap: f64,
    pub terminal: bool,
    pub final_observation: Observation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2cLosses {
    pub actor: f64,
    pub critic: f64,
}

/// Discounted n-step returns `R_k = r_k + γ R_{k+1}` seeded with `bootstrap`,
/// accumulated from the end of the trajectory.
pub fn n_step_returns(rewards: &[f64], bootstrap: f64, discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for (k, r) in rewards.iter().enumerate().rev() {
        running = r + discount * running;
        out[k] = running;
    }
    out
}

/// Shannon entropy in nats.
pub fn policy_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .map(|&p| p * p.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone)]
pub struct A2cAgent {
    trunk: DenseNet,
    actor: DenseNet,
    critic: DenseNet,
    opt_trunk: Optimizer,
    opt_actor: Optimizer,
    opt_critic: Optimizer,
    rollout_length: usize,
    discount: f64,
    return_scale: f64,
    entropy_coeff: f64,
    grad_clip: Option<f64>,
    steps: u64,
    aoi_max: u32,
    scaling: ObservationScaling,
    rng: SimRng,
}

impl A2cAgent {
    pub fn new(config: &AgentConfig, num_sensors: usize, aoi_max: u32, seed: u64) -> Result<Self> {
        if config.algorithm != Algorithm::MA2c {
            return Err(Error::Usage(format!(
                "{} is not an actor-critic algorithm",
                config.algorithm
            )));
        }
        let mut init = rng::seeded(rng::derive_seed(seed, 1));
        let trunk = DenseNet::new(
            &[num_sensors, TRUNK_HIDDEN[0], TRUNK_HIDDEN[1]],
            &[Activation::Relu, Activation::Relu],
            &mut init,
        )?;
        let actor = DenseNet::new(
            &[TRUNK_HIDDEN[1], Action::COUNT],
            &[Activation::Identity],
            &mut init,
        )?;
        let critic_out = if config.critic_tanh {
            Activation::Tanh
        } else {
            Activation::Identity
        };
        let critic = DenseNet::new(
            &[TRUNK_HIDDEN[1], CRITIC_HIDDEN, 1],
            &[Activation::Relu, critic_out],
            &mut init,
        )?;
        Self::from_networks(trunk, actor, critic, config, aoi_max, seed)
    }

    pub fn from_networks(
        trunk: DenseNet,
        actor: DenseNet,
        critic: DenseNet,
        config: &AgentConfig,
        aoi_max: u32,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if actor.input_size() != trunk.output_size() || critic.input_size() != trunk.output_size()
        {
            return Err(Error::Usage("heads do not match the trunk width".into()));
        }
        if actor.output_size() != Action::COUNT || critic.output_size() != 1 {
            return Err(Error::Usage("actor needs 3 outputs and critic 1".into()));
        }
        let opt = config.optimizer_config();
        Ok(Self {
            opt_trunk: Optimizer::new(opt, trunk.parameters().len()),
            opt_actor: Optimizer::new(opt, actor.parameters().len()),
            opt_critic: Optimizer::new(opt, critic.parameters().len()),
            trunk,
            actor,
            critic,
            rollout_length: config.rollout_length,
            discount: config.discount,
            return_scale: config.return_scale,
            entropy_coeff: config.entropy_coeff,
            grad_clip: config.grad_clip,
            steps: 0,
            aoi_max,
            scaling: config.observation_scaling,
            rng: rng::seeded(rng::derive_seed(seed, 2)),
        })
    }

    pub(crate) fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    pub fn trunk(&self) -> &DenseNet {
        &self.trunk
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNet {
        &self.critic
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

    pub fn return_scale(&self) -> f64 {
        self.return_scale
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn inputs(&self, observation: &Observation) -> Vec<f64> {
        self.scaling.normalize(observation, self.aoi_max)
    }

    /// Action probabilities, each at least `1e-8`, summing to one.
    pub fn policy(&self, observation: &Observation) -> Result<Vec<f64>> {
        let hidden = self.trunk.forward(&self.inputs(observation))?;
        let logits = self.actor.forward(&hidden)?;
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical("non-finite actor logits".into()));
        }
        let probs: Vec<f64> = softmax(&logits).iter().map(|p| p.max(PROB_FLOOR)).collect();
        let total: f64 = probs.iter().sum();
        Ok(probs.iter().map(|p| p / total).collect())
    }

    /// Critic estimate in return units.
    pub fn value(&self, observation: &Observation) -> Result<f64> {
        let hidden = self.trunk.forward(&self.inputs(observation))?;
        Ok(self.critic.forward(&hidden)?[0] * self.return_scale)
    }

    pub fn sample_action(&mut self, observation: &Observation) -> Result<Action> {
        let probs = self.policy(observation)?;
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (idx, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(Action::from_index(idx).unwrap());
            }
        }
        Ok(Action::ALL[Action::COUNT - 1])
    }

    /// Runs the current policy for up to `rollout_length` slots, stopping at
    /// the end of the episode. `on_step` sees every environment outcome.
    pub fn rollout_with(
        &mut self,
        env: &mut Environment,
        mut on_step: impl FnMut(Action, &crate::env::StepOutcome),
    ) -> Result<Rollout> {
        if env.is_terminal() {
            return Err(Error::Usage("rollout started on a terminal environment".into()));
        }
        let mut observation = env.observation().clone();
        let mut steps = Vec::with_capacity(self.rollout_length);
        let mut terminal = false;
        while steps.len() < self.rollout_length && !terminal {
            let action = self.sample_action(&observation)?;
            let outcome = env.step(action)?;
            on_step(action, &outcome);
            steps.push(RolloutStep {
                observation,
                action,
                reward: outcome.reward,
            });
            terminal = outcome.terminal;
            observation = outcome.next_observation;
            self.steps += 1;
        }
        let bootstrap = if terminal {
            0.0
        } else {
            self.value(&observation)?
        };
        Ok(Rollout {
            steps,
            bootstrap,
            terminal,
            final_observation: observation,
        })
    }

    pub fn a2c_rollout(&mut self, env: &mut Environment) -> Result<Rollout> {
        self.rollout_with(env, |_, _| {})
    }

    /// One synchronous update of actor and critic from a trajectory.
    ///
    /// For each step the return `R` is accumulated backwards from the
    /// bootstrap, the advantage is `R - V(obs)`, the actor follows the
    /// advantage-weighted log-probability gradient plus the entropy bonus,
    /// and the critic regresses `V(obs) / return_scale` onto
    /// `R / return_scale`. Gradients are summed over the trajectory and all
    /// three networks step together. The reported losses are per-step means,
    /// the critic's in return units.
    pub fn a2c_update(&mut self, rollout: &Rollout) -> Result<A2cLosses> {
        if rollout.steps.is_empty() {
            return Err(Error::Usage("empty rollout".into()));
        }
        let rewards: Vec<f64> = rollout.steps.iter().map(|s| s.reward).collect();
        let returns = n_step_returns(&rewards, rollout.bootstrap, self.discount);
        let mut g_trunk = vec![0.0; self.trunk.parameters().len()];
        let mut g_actor = vec![0.0; self.actor.parameters().len()];
        let mut g_critic = vec![0.0; self.critic.parameters().len()];
        let mut actor_loss = 0.0;
        let mut critic_loss = 0.0;
        let n = rollout.steps.len() as f64;

        for (step, ret) in rollout.steps.iter().zip(&returns) {
            let trunk_trace = self.trunk.forward_trace(&self.inputs(&step.observation))?;
            let hidden = trunk_trace.output();
            let actor_trace = self.actor.forward_trace(hidden)?;
            let critic_trace = self.critic.forward_trace(hidden)?;
            let logits = actor_trace.output();
            if logits.iter().any(|z| !z.is_finite()) {
                return Err(Error::Numerical("non-finite actor logits".into()));
            }
            let probs = softmax(logits);
            let value_scaled = critic_trace.output()[0];
            let advantage = ret - value_scaled * self.return_scale;
            let a = step.action.index();
            let log_prob = probs[a].max(PROB_FLOOR).ln();
            let entropy = policy_entropy(&probs);
            actor_loss += (-advantage * log_prob - self.entropy_coeff * entropy) / n;
            critic_loss += advantage * advantage / n;

            // d/dz of -(A log π_a + β H)
            let actor_up: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let onehot = if j == a { 1.0 } else { 0.0 };
                    -advantage * (onehot - p)
                        + self.entropy_coeff * p * (p.max(PROB_FLOOR).ln() + entropy)
                })
                .collect();
            // d/dv of (R/scale - v)^2
            let critic_up = [-2.0 * (ret / self.return_scale - value_scaled)];
            let mut hidden_grad =
                self.actor
                    .accumulate_backward(&actor_trace, &actor_up, &mut g_actor)?;
            let critic_hidden =
                self.critic
                    .accumulate_backward(&critic_trace, &critic_up, &mut g_critic)?;
            hidden_grad
                .iter_mut()
                .zip(&critic_hidden)
                .for_each(|(h, c)| *h += c);
            self.trunk
                .accumulate_backward(&trunk_trace, &hidden_grad, &mut g_trunk)?;
        }

        if let Some(clip) = self.grad_clip {
            clip_global_norm(&mut [&mut g_trunk, &mut g_actor, &mut g_critic], clip);
        }
        for g in [&g_trunk, &g_actor, &g_critic] {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite A2C gradient; update refused".into()));
            }
        }
        self.opt_trunk.step(self.trunk.parameters_mut(), &g_trunk)?;
        self.opt_actor.step(self.actor.parameters_mut(), &g_actor)?;
        self.opt_critic.step(self.critic.parameters_mut(), &g_critic)?;
        Ok(A2cLosses {
            actor: actor_loss,
            critic: critic_loss,
        })
    }

    /// Flat view of `(trunk, actor, critic)` parameters, for gradient checks.
    pub fn flat_parameters(&self) -> Vec<f64> {
        [
            self.trunk.parameters(),
            self.actor.parameters(),
            self.critic.parameters(),
        ]
        .concat()
    }

    pub fn set_flat_parameters(&mut self, params: &[f64]) -> Result<()> {
        let (nt, na) = (self.trunk.parameters().len(), self.actor.parameters().len());
        if params.len() != nt + na + self.critic.parameters().len() {
            return Err(Error::Usage("flat parameter vector has the wrong length".into()));
        }
        self.trunk.set_parameters(&params[..nt])?;
        self.actor.set_parameters(&params[nt..nt + na])?;
        self.critic.set_parameters(&params[nt + na..])
    }

    /// Scalar `Σ_k w_a·logit_k + w_v·v` through the shared trunk, with its
    /// backpropagated gradient over the flat parameter vector. Used to check
    /// the combined trunk/head backward pass numerically.
    pub fn probe_objective(
        &self,
        observation: &Observation,
        actor_weights: &[f64; 3],
        critic_weight: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let trunk_trace = self.trunk.forward_trace(&self.inputs(observation))?;
        let actor_trace = self.actor.forward_trace(trunk_trace.output())?;
        let critic_trace = self.critic.forward_trace(trunk_trace.output())?;
        let value: f64 = actor_trace
            .output()
            .iter()
            .zip(actor_weights)
            .map(|(z, w)| z * w)
            .sum::<f64>()
            + critic_weight * critic_trace.output()[0];
        let mut g_trunk = vec![0.0; self.trunk.parameters().len()];
        let mut g_actor = vec![0.0; self.actor.parameters().len()];
        let mut g_critic = vec![0.0; self.critic.parameters().len()];
        let mut hidden = self
            .actor
            .accumulate_backward(&actor_trace, actor_weights, &mut g_actor)?;
        let from_critic =
            self.critic
                .accumulate_backward(&critic_trace, &[critic_weight], &mut g_critic)?;
        hidden.iter_mut().zip(&from_critic).for_each(|(h, c)| *h += c);
        self.trunk
            .accumulate_backward(&trunk_trace, &hidden, &mut g_trunk)?;
        Ok((value, [g_trunk, g_actor, g_critic].concat()))
    }
}

impl GreedyPolicy for A2cAgent {
    fn num_sensors(&self) -> usize {
        self.trunk.input_size()
    }

    /// Most probable action.
    fn greedy_action(&self, observation: &Observation, rng: &mut SimRng) -> Action {
        let probs = self
            .policy(observation)
            .expect("observation matches network input size");
        Action::from_index(super::argmax_random_ties(&probs, rng)).unwrap()
    }
}
