//! Exact one-slot transition law by enumeration.
//!
//! Used as the oracle for the sampled dynamics. Outcomes that coincide (for
//! example when `aoi_max = 1`, where reset and increment give the same AoI)
//! are merged.

use std::collections::BTreeMap;

use super::{
    delivery_prob, generation_prob, network_healthy_next, next_aoi, sensor_healthy_next, Action,
    HealthState, Observation, ScenarioConfig, SystemState,
};
use crate::error::{Error, Result};

pub const MAX_ENUMERATED_SENSORS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    outcomes: BTreeMap<(SystemState, Observation), f64>,
}

impl OutcomeDistribution {
    pub fn probability(&self, state: &SystemState, observation: &Observation) -> f64 {
        self.outcomes
            .get(&(state.clone(), observation.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.outcomes.values().sum()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SystemState, &Observation, f64)> {
        self.outcomes.iter().map(|((s, o), p)| (s, o, *p))
    }
}

/// Enumerates every (next state, next AoI) pair with its probability.
///
/// Zero-probability outcomes are omitted.
pub fn one_step_distribution(
    config: &ScenarioConfig,
    state: &SystemState,
    aoi: &Observation,
    action: Action,
) -> Result<OutcomeDistribution> {
    let m = config.num_sensors;
    if m > MAX_ENUMERATED_SENSORS {
        return Err(Error::Capability(format!(
            "exact enumeration supports at most {MAX_ENUMERATED_SENSORS} sensors, got {m}"
        )));
    }
    if state.sensor_health.len() != m || aoi.len() != m {
        return Err(Error::Usage(format!(
            "situation dimensions do not match num_sensors = {m}"
        )));
    }

    // Per-sensor factor: (updated, healthy next) with its probability.
    let p_deliver = delivery_prob(config, state.network_health);
    let per_sensor: Vec<[(bool, bool, f64); 4]> = (0..m)
        .map(|i| {
            let health = state.sensor_health[i];
            let p_update = generation_prob(config, health) * p_deliver;
            let p_healthy = sensor_healthy_next(config, i, health, action);
            [
                (true, true, p_update * p_healthy),
                (true, false, p_update * (1.0 - p_healthy)),
                (false, true, (1.0 - p_update) * p_healthy),
                (false, false, (1.0 - p_update) * (1.0 - p_healthy)),
            ]
        })
        .collect();
    let p_net_healthy = network_healthy_next(config, state.network_health, action);

    let mut outcomes = BTreeMap::new();
    let combos = 4usize.pow(m as u32);
    for code in 0..combos {
        let mut prob = 1.0;
        let mut health = Vec::with_capacity(m);
        let mut next = Vec::with_capacity(m);
        let mut rest = code;
        for (i, factors) in per_sensor.iter().enumerate() {
            let (updated, healthy, p) = factors[rest % 4];
            rest /= 4;
            prob *= p;
            health.push(if healthy {
                HealthState::Healthy
            } else {
                HealthState::Faulty
            });
            next.push(next_aoi(config, aoi.aoi[i], updated));
        }
        if prob == 0.0 {
            continue;
        }
        for (net, p_net) in [
            (HealthState::Healthy, p_net_healthy),
            (HealthState::Faulty, 1.0 - p_net_healthy),
        ] {
            let p = prob * p_net;
            if p == 0.0 {
                continue;
            }
            let key = (
                SystemState {
                    sensor_health: health.clone(),
                    network_health: net,
                },
                Observation { aoi: next.clone() },
            );
            *outcomes.entry(key).or_insert(0.0) += p;
        }
    }
    Ok(OutcomeDistribution { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use HealthState::{Faulty, Healthy};

    #[test]
    fn deterministic_config_has_single_outcome() {
        let cfg = ScenarioConfig {
            num_sensors: 3,
            deliver_prob_healthy: 1.0,
            ..ScenarioConfig::permanent_faults()
        };
        let cfg = ScenarioConfig {
            sensor_chain: super::super::TwoStateChain::new(1.0, 1.0),
            network_chain: super::super::TwoStateChain::new(1.0, 1.0),
            ..cfg
        };
        let state = SystemState {
            sensor_health: vec![Healthy, Faulty, Healthy],
            network_health: Healthy,
        };
        let dist =
            one_step_distribution(&cfg, &state, &Observation { aoi: vec![4, 4, 4] }, Action::NoMaintenance)
                .unwrap();
        assert_eq!(dist.len(), 1);
        let (s, o, p) = dist.iter().next().unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(s, &state);
        assert_eq!(o.aoi, vec![1, 5, 1]);
    }

    #[test]
    fn healthy_sensor_stays_healthy_with_p00() {
        let cfg = ScenarioConfig {
            num_sensors: 1,
            ..ScenarioConfig::intermittent_all()
        };
        let dist = one_step_distribution(
            &cfg,
            &SystemState::all_healthy(1),
            &Observation::fresh(1),
            Action::NoMaintenance,
        )
        .unwrap();
        let healthy: f64 = dist
            .iter()
            .filter(|(s, _, _)| s.sensor_health[0] == Healthy)
            .map(|(_, _, p)| p)
            .sum();
        assert!((healthy - 0.999).abs() < 1e-12);
        assert!((dist.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sums_to_one_for_every_action() {
        let mut cfg = ScenarioConfig::intermittent_all();
        cfg.num_sensors = 5;
        cfg.gen_prob_faulty = 0.25;
        cfg.deliver_prob_faulty = 0.5;
        let state = SystemState {
            sensor_health: vec![Healthy, Faulty, Healthy, Faulty, Faulty],
            network_health: Faulty,
        };
        for action in Action::ALL {
            let dist =
                one_step_distribution(&cfg, &state, &Observation { aoi: vec![1, 2, 3, 4, 5] }, action)
                    .unwrap();
            assert!((dist.total() - 1.0).abs() < 1e-12);
            for (s, o, _) in dist.iter() {
                if action == Action::SensorsMaintenance {
                    assert!(s.sensor_health.iter().all(|h| *h == Healthy));
                }
                if action == Action::NetworkMaintenance {
                    assert_eq!(s.network_health, Healthy);
                }
                for (i, &a) in o.aoi.iter().enumerate() {
                    assert!(a == 1 || a == (i as u32 + 2));
                }
            }
        }
    }

    #[test]
    fn coinciding_outcomes_merge() {
        let cfg = ScenarioConfig {
            num_sensors: 1,
            aoi_max: 1,
            ..ScenarioConfig::intermittent_all()
        };
        let dist = one_step_distribution(
            &cfg,
            &SystemState::all_healthy(1),
            &Observation::fresh(1),
            Action::NetworkMaintenance,
        )
        .unwrap();
        assert_eq!(dist.len(), 2);
        assert!((dist.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_sensors_is_capability_error() {
        let cfg = ScenarioConfig {
            num_sensors: 7,
            ..ScenarioConfig::permanent_faults()
        };
        let err = one_step_distribution(
            &cfg,
            &SystemState::all_healthy(7),
            &Observation::fresh(7),
            Action::NoMaintenance,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }
}
