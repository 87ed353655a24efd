//! Property tests over random situations, networks and trajectories.

use proptest::prelude::*;
use rand::Rng;

use aoi_maintain::agents::{
    A2cAgent, AgentConfig, Algorithm, DqnAgent, EpsilonSchedule, ReplayBuffer, Transition,
};
use aoi_maintain::env::{
    one_step_distribution, reward_fn, sample_transition, Action, Environment, HealthState,
    Observation, ScenarioConfig, SystemState, TwoStateChain,
};
use aoi_maintain::harness::{track_faults, TprReport, DEFAULT_THRESHOLDS};
use aoi_maintain::neural::{Activation, DenseNet, LossSpec, Optimizer, OptimizerConfig};
use aoi_maintain::rng;

fn health(faulty: bool) -> HealthState {
    if faulty {
        HealthState::Faulty
    } else {
        HealthState::Healthy
    }
}

fn arb_scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        1usize..=4,
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
        (1e-3..=1.0f64, 0.0..1.0f64, 1e-3..=1.0f64, 0.0..1.0f64),
        2u32..60,
    )
        .prop_map(|(m, (sp00, sp11, np00, np11), (g0, g1, d0, d1), aoi_max)| {
            let mut s = ScenarioConfig::permanent_faults().with_horizon(aoi_max);
            s.num_sensors = m;
            s.sensor_chain = TwoStateChain::new(sp00, sp11);
            s.network_chain = TwoStateChain::new(np00, np11);
            // A fault must strictly degrade both probabilities.
            s.gen_prob_healthy = g0;
            s.gen_prob_faulty = g0 * g1;
            s.deliver_prob_healthy = d0;
            s.deliver_prob_faulty = d0 * d1;
            s.validate().expect("strategy yields valid scenarios");
            s
        })
}

fn arb_situation(m: usize, aoi_max: u32) -> impl Strategy<Value = (SystemState, Observation)> {
    (
        prop::collection::vec(any::<bool>(), m),
        any::<bool>(),
        prop::collection::vec(1..=aoi_max, m),
    )
        .prop_map(|(sensors, network, aoi)| {
            (
                SystemState {
                    sensor_health: sensors.into_iter().map(health).collect(),
                    network_health: health(network),
                },
                Observation { aoi },
            )
        })
}

fn arb_case() -> impl Strategy<Value = (ScenarioConfig, SystemState, Observation, usize, u64)> {
    arb_scenario().prop_flat_map(|s| {
        let m = s.num_sensors;
        let max = s.aoi_max;
        (Just(s), arb_situation(m, max), 0usize..3, any::<u64>())
            .prop_map(|(s, (st, obs), a, seed)| (s, st, obs, a, seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn aoi_resets_or_increments((scenario, state, aoi, a, seed) in arb_case()) {
        let mut r = rng::seeded(seed);
        let action = Action::ALL[a];
        for _ in 0..20 {
            let (_, next, draws) = sample_transition(&scenario, &state, &aoi, action, &mut r);
            for (i, (&prev, &now)) in aoi.aoi.iter().zip(&next.aoi).enumerate() {
                let incremented = scenario.aoi_max.min(prev + 1);
                prop_assert!(now == 1 || now == incremented);
                let updated = draws.generated[i] && draws.delivered[i];
                prop_assert_eq!(now, if updated { 1 } else { incremented });
            }
        }
    }

    #[test]
    fn enumeration_sums_to_one((scenario, state, aoi, a, _) in arb_case()) {
        let dist = one_step_distribution(&scenario, &state, &aoi, Action::ALL[a]).unwrap();
        prop_assert!((dist.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn markov_property((scenario, state, aoi, a, seed) in arb_case(), warmup in 0usize..30) {
        // Different histories, same situation and same stream from here on.
        let mut fresh = Environment::new(scenario.clone(), 1).unwrap();
        let mut longer = scenario.clone();
        longer.horizon += 40;
        let mut used = Environment::new(longer, 2).unwrap();
        for _ in 0..warmup.min(used.config().horizon as usize - 1) {
            used.step(Action::NoMaintenance).unwrap();
        }
        fresh.set_situation(state.clone(), aoi.clone()).unwrap();
        used.set_situation(state.clone(), aoi.clone()).unwrap();
        let mut r1 = rng::seeded(seed);
        let mut r2 = rng::seeded(seed);
        let action = Action::ALL[a];
        let x = sample_transition(fresh.config(), fresh.state(), fresh.observation(), action, &mut r1);
        let y = sample_transition(used.config(), used.state(), used.observation(), action, &mut r2);
        prop_assert_eq!(x.0, y.0);
        prop_assert_eq!(x.1, y.1);
    }

    #[test]
    fn reward_bounds((scenario, _, aoi, a, _) in arb_case()) {
        let r = reward_fn(Action::ALL[a], &aoi, &scenario);
        let max_cost = scenario.maintenance_costs.iter().copied().fold(0.0, f64::max);
        let lower = 1.0 / (scenario.weight_cost * max_cost + scenario.weight_aoi * f64::from(scenario.aoi_max));
        let upper = 1.0 / scenario.weight_aoi;
        prop_assert!(r >= lower - 1e-15 && r <= upper + 1e-15, "{} not in [{}, {}]", r, lower, upper);
    }

    #[test]
    fn policy_is_a_distribution(seed in any::<u64>(), m in 1usize..6, aoi in prop::collection::vec(1u32..=100, 5)) {
        let agent = A2cAgent::new(&AgentConfig::new(Algorithm::MA2c), m, 100, seed).unwrap();
        let probs = agent.policy(&Observation { aoi: aoi[..m].to_vec() }).unwrap();
        prop_assert_eq!(probs.len(), 3);
        prop_assert!(probs.iter().all(|p| *p > 0.0 && *p <= 1.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_action_survives_positive_scaling(seed in any::<u64>(), scale in 0.01f64..100.0, aoi in prop::collection::vec(1u32..=50, 3)) {
        let mut r = rng::seeded(seed);
        let net = DenseNet::new(&[3, 16, 3], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        let mut params = net.parameters().to_vec();
        let first_layer = 3 * 16 + 16;
        for p in &mut params[first_layer..] {
            *p *= scale;
        }
        let scaled = DenseNet::from_parameters(net.layer_sizes(), net.activations(), params).unwrap();
        let cfg = AgentConfig::new(Algorithm::MDqn);
        let a = DqnAgent::from_network(net, &cfg, 50, 0).unwrap();
        let b = DqnAgent::from_network(scaled, &cfg, 50, 0).unwrap();
        let obs = Observation { aoi };
        let qa = a.q_values(&obs).unwrap();
        let qb = b.q_values(&obs).unwrap();
        let argmax = |q: &[f64]| (0..3).max_by(|&i, &j| q[i].total_cmp(&q[j])).unwrap();
        // Ties are broken at random, so compare only clear winners.
        let sorted = { let mut s = qa.clone(); s.sort_by(f64::total_cmp); s };
        if sorted[2] - sorted[1] > 1e-9 * sorted[2].abs().max(1.0) {
            prop_assert_eq!(argmax(&qa), argmax(&qb));
        }
    }

    #[test]
    fn replay_keeps_the_newest(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity);
        for t in 0..pushes {
            buf.push(Transition {
                observation: Observation { aoi: vec![t as u32 + 1] },
                action: Action::NoMaintenance,
                reward: 1.0,
                next_observation: Observation { aoi: vec![1] },
                terminal: false,
            });
        }
        let kept: Vec<u32> = buf.iter().map(|t| t.observation.aoi[0]).collect();
        let first = pushes.saturating_sub(capacity) as u32 + 1;
        prop_assert_eq!(kept, (first..=pushes as u32).collect::<Vec<_>>());
    }

    #[test]
    fn fault_records_partition_faulty_slots(
        bits in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), 0usize..3), 1..80)
    ) {
        let traj: Vec<(SystemState, Action)> = bits
            .iter()
            .map(|&(n, s0, s1, a)| {
                (
                    SystemState { sensor_health: vec![health(s0), health(s1)], network_health: health(n) },
                    Action::ALL[a],
                )
            })
            .collect();
        let records = track_faults(&traj);
        for (unit_idx, is_faulty) in [
            (None, Box::new(|s: &SystemState| s.network_health.is_faulty()) as Box<dyn Fn(&SystemState) -> bool>),
            (Some(0), Box::new(|s: &SystemState| s.sensor_health[0].is_faulty())),
            (Some(1), Box::new(|s: &SystemState| s.sensor_health[1].is_faulty())),
        ] {
            let mut covered = vec![0u32; traj.len()];
            for r in records.iter().filter(|r| match (unit_idx, r.unit) {
                (None, aoi_maintain::harness::FaultUnit::Network) => true,
                (Some(i), aoi_maintain::harness::FaultUnit::Sensor(j)) => i == j,
                _ => false,
            }) {
                prop_assert!(r.start_slot <= r.end_slot);
                prop_assert_eq!(r.detected, r.detection_slot.is_some());
                if let Some(d) = r.detection_slot {
                    prop_assert!(r.start_slot <= d && d <= r.end_slot);
                }
                for t in r.start_slot..=r.end_slot {
                    covered[t as usize] += 1;
                }
            }
            for (t, (state, _)) in traj.iter().enumerate() {
                prop_assert_eq!(covered[t], u32::from(is_faulty(state)));
            }
        }
        let report = TprReport::from_records(&records, &DEFAULT_THRESHOLDS).unwrap();
        for kind in aoi_maintain::harness::FaultType::ALL {
            let entries = report.entries(kind);
            for w in entries.windows(2) {
                prop_assert!(w[0].fault_count >= w[1].fault_count);
            }
            for e in entries {
                prop_assert_eq!(e.tpr.is_some(), e.fault_count > 0);
                if let Some(t) = e.tpr {
                    prop_assert!((0.0..=1.0).contains(&t));
                }
            }
        }
    }

    #[test]
    fn forward_and_backward_are_pure(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let net = DenseNet::new(&[3, 12, 2], &[Activation::Tanh, Activation::Identity], &mut r).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
        let a = net.backward(&x, &[1.0, -0.5]).unwrap();
        let b = net.backward(&x, &[1.0, -0.5]).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.input, b.input);
    }

    #[test]
    fn copied_nets_agree_bitwise(seed in any::<u64>(), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let mut r = rng::seeded(seed);
        let online = DenseNet::new(&[4, 8, 3], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        let mut target = DenseNet::new(&[4, 8, 3], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        target.copy_from(&online).unwrap();
        let a = online.forward(&x).unwrap();
        let b = target.forward(&x).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn small_step_does_not_increase_convex_loss(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let mut net = DenseNet::new(&[3, 2], &[Activation::Identity], &mut r).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let loss = LossSpec::SquaredError(vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]);
        let before = net.loss_gradient(&x, &loss).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::sgd(1e-3), net.parameters().len());
        let mut params = net.parameters().to_vec();
        opt.step(&mut params, &before.gradient).unwrap();
        net.set_parameters(&params).unwrap();
        let after = net.loss_gradient(&x, &loss).unwrap();
        prop_assert!(after.loss <= before.loss + 1e-15);
    }
}

#[test]
fn maintenance_repairs_with_certainty() {
    let mut scenario = ScenarioConfig::permanent_faults().with_horizon(20_000);
    scenario.sensor_chain = TwoStateChain::new(0.5, 1.0);
    scenario.network_chain = TwoStateChain::new(0.5, 1.0);
    let mut env = Environment::new(scenario, 3).unwrap();
    let mut r = rng::seeded(4);
    for _ in 0..10_000 {
        let action = Action::ALL[r.gen_range(0..3)];
        let out = env.step(action).unwrap();
        match action {
            Action::NetworkMaintenance => {
                assert_eq!(out.truth_next_state.network_health, HealthState::Healthy)
            }
            Action::SensorsMaintenance => assert!(out
                .truth_next_state
                .sensor_health
                .iter()
                .all(|h| *h == HealthState::Healthy)),
            Action::NoMaintenance => {}
        }
    }
}

#[test]
fn biased_policy_reduces_to_epsilon_greedy_at_zero() {
    let mut cfg = AgentConfig::new(Algorithm::MBegDqn);
    cfg.epsilon = EpsilonSchedule::constant(0.0);
    let agent = DqnAgent::new(&cfg, 3, 40, 8).unwrap();
    let mut r = rng::seeded(0);
    for _ in 0..500 {
        let obs = Observation {
            aoi: (0..3).map(|_| r.gen_range(1..=40)).collect(),
        };
        let mut r1 = rng::seeded(r.gen());
        let mut r2 = r1.clone();
        let biased = agent.act_biased(&obs, 0, &mut r1);
        let plain = agent.act_epsilon_greedy(&obs, 0, &mut r2);
        let q = agent.q_values(&obs).unwrap();
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(q[biased.index()], best);
        assert_eq!(q[plain.index()], best);
    }
}
