//! Scenario parameters and the four shipped presets.

use std::collections::BTreeMap;

use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Two-state (healthy/faulty) time-homogeneous Markov chain.
///
/// Only the diagonal is stored; the off-diagonal entries are `1 - p00` and
/// `1 - p11`, so rows always sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateChain {
    /// Probability of staying healthy.
    pub p00: f64,
    /// Probability of staying faulty.
    pub p11: f64,
}

impl TwoStateChain {
    pub fn new(p00: f64, p11: f64) -> Self {
        Self { p00, p11 }
    }

    /// Probability that the next state is healthy given the current one.
    pub fn healthy_next(&self, currently_faulty: bool) -> f64 {
        if currently_faulty {
            1.0 - self.p11
        } else {
            self.p00
        }
    }

    /// Long-run fraction of slots spent healthy, `(1-p11) / ((1-p00) + (1-p11))`.
    ///
    /// Returns `None` for the reducible chains (both states absorbing).
    pub fn stationary_healthy(&self) -> Option<f64> {
        let leave_healthy = 1.0 - self.p00;
        let leave_faulty = 1.0 - self.p11;
        let total = leave_healthy + leave_faulty;
        (total > 0.0).then(|| leave_faulty / total)
    }

    fn validate(&self, field: &str) -> Result<()> {
        check_probability(&format!("{field}.p00"), self.p00)?;
        check_probability(&format!("{field}.p11"), self.p11)
    }
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(field, format!("{p} is not a probability")));
    }
    Ok(())
}

/// Every stochastic and economic parameter of a maintenance scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_sensors: usize,
    pub sensor_chain: TwoStateChain,
    /// Per-sensor chains replacing `sensor_chain` for selected indices.
    pub sensor_chain_overrides: BTreeMap<usize, TwoStateChain>,
    pub network_chain: TwoStateChain,
    pub gen_prob_healthy: f64,
    pub gen_prob_faulty: f64,
    pub deliver_prob_healthy: f64,
    pub deliver_prob_faulty: f64,
    /// Cost per action, indexed by `Action as usize`. Entry 0 must be zero.
    pub maintenance_costs: [f64; 3],
    pub weight_cost: f64,
    pub weight_aoi: f64,
    /// Slots per episode.
    pub horizon: u32,
    pub aoi_max: u32,
    /// Compute the reward from the AoI vector observed at the start of the
    /// slot instead of the one produced by the slot's deliveries.
    pub reward_uses_pre_transition_aoi: bool,
}

pub const SCENARIO_KEYS: &[&str] = &[
    "num_sensors",
    "sensor_chain.p00",
    "sensor_chain.p11",
    "network_chain.p00",
    "network_chain.p11",
    "gen_prob_healthy",
    "gen_prob_faulty",
    "deliver_prob_healthy",
    "deliver_prob_faulty",
    "maintenance_costs",
    "weight_cost",
    "weight_aoi",
    "horizon",
    "aoi_max",
    "reward_uses_pre_transition_aoi",
];

/// Names of the presets, in the order they are written.
pub const PRESET_NAMES: [&str; 4] = [
    "permanent_faults",
    "intermittent_network",
    "intermittent_sensors",
    "intermittent_all",
];

impl ScenarioConfig {
    /// Four sensors, healthy generation 1 / faulty 0, healthy delivery 0.99 /
    /// faulty 0, both chains `p00 = 0.999` and permanent faults, cost 100 for
    /// either maintenance action, unit weights, 5000-slot episodes.
    pub fn permanent_faults() -> Self {
        Self {
            num_sensors: 4,
            sensor_chain: TwoStateChain::new(0.999, 1.0),
            sensor_chain_overrides: BTreeMap::new(),
            network_chain: TwoStateChain::new(0.999, 1.0),
            gen_prob_healthy: 1.0,
            gen_prob_faulty: 0.0,
            deliver_prob_healthy: 0.99,
            deliver_prob_faulty: 0.0,
            maintenance_costs: [0.0, 100.0, 100.0],
            weight_cost: 1.0,
            weight_aoi: 1.0,
            horizon: 5000,
            aoi_max: 5000,
            reward_uses_pre_transition_aoi: false,
        }
    }

    pub fn intermittent_network() -> Self {
        Self {
            network_chain: TwoStateChain::new(0.999, 0.9),
            ..Self::permanent_faults()
        }
    }

    pub fn intermittent_sensors() -> Self {
        Self {
            sensor_chain: TwoStateChain::new(0.999, 0.9),
            ..Self::permanent_faults()
        }
    }

    pub fn intermittent_all() -> Self {
        Self {
            sensor_chain: TwoStateChain::new(0.999, 0.9),
            network_chain: TwoStateChain::new(0.999, 0.9),
            ..Self::permanent_faults()
        }
    }

    /// Degenerate scenario in which nothing ever fails and every update is
    /// delivered.
    pub fn no_faults() -> Self {
        Self {
            sensor_chain: TwoStateChain::new(1.0, 1.0),
            network_chain: TwoStateChain::new(1.0, 1.0),
            deliver_prob_healthy: 1.0,
            ..Self::permanent_faults()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "permanent_faults" => Some(Self::permanent_faults()),
            "intermittent_network" => Some(Self::intermittent_network()),
            "intermittent_sensors" => Some(Self::intermittent_sensors()),
            "intermittent_all" => Some(Self::intermittent_all()),
            _ => None,
        }
    }

    pub fn sensor_chain_for(&self, sensor: usize) -> TwoStateChain {
        self.sensor_chain_overrides
            .get(&sensor)
            .copied()
            .unwrap_or(self.sensor_chain)
    }

    /// Shrinks the episode length, keeping `aoi_max` equal to the horizon.
    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self.aoi_max = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sensors == 0 {
            return Err(Error::config("num_sensors", "must be positive"));
        }
        self.sensor_chain.validate("sensor_chain")?;
        self.network_chain.validate("network_chain")?;
        for (idx, chain) in &self.sensor_chain_overrides {
            if *idx >= self.num_sensors {
                return Err(Error::config(
                    format!("sensor_chain.{idx}"),
                    format!("sensor index out of range (num_sensors = {})", self.num_sensors),
                ));
            }
            chain.validate(&format!("sensor_chain.{idx}"))?;
        }
        check_probability("gen_prob_healthy", self.gen_prob_healthy)?;
        check_probability("gen_prob_faulty", self.gen_prob_faulty)?;
        check_probability("deliver_prob_healthy", self.deliver_prob_healthy)?;
        check_probability("deliver_prob_faulty", self.deliver_prob_faulty)?;
        if self.gen_prob_healthy <= self.gen_prob_faulty {
            return Err(Error::config(
                "gen_prob_healthy",
                "must exceed gen_prob_faulty",
            ));
        }
        if self.deliver_prob_healthy <= self.deliver_prob_faulty {
            return Err(Error::config(
                "deliver_prob_healthy",
                "must exceed deliver_prob_faulty",
            ));
        }
        if self.maintenance_costs[0] != 0.0 {
            return Err(Error::config(
                "maintenance_costs",
                "cost of no-maintenance must be zero",
            ));
        }
        if self
            .maintenance_costs
            .iter()
            .any(|c| !c.is_finite() || *c < 0.0)
        {
            return Err(Error::config("maintenance_costs", "costs must be nonnegative"));
        }
        if !(self.weight_cost > 0.0 && self.weight_cost.is_finite()) {
            return Err(Error::config("weight_cost", "must be positive"));
        }
        if !(self.weight_aoi > 0.0 && self.weight_aoi.is_finite()) {
            return Err(Error::config("weight_aoi", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be positive"));
        }
        if self.aoi_max == 0 {
            return Err(Error::config("aoi_max", "must be at least 1"));
        }
        Ok(())
    }

    pub fn is_known_key(key: &str) -> bool {
        if SCENARIO_KEYS.contains(&key) {
            return true;
        }
        parse_override_key(key).is_some()
    }

    /// Builds a scenario from a key-value file. Missing keys fall back to the
    /// permanent-faults preset.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let base = Self::permanent_faults();
        let mut overrides: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
        for key in kv.keys() {
            if let Some((idx, which)) = parse_override_key(key) {
                let value: f64 = kv.parse_required(key)?;
                let entry = overrides.entry(idx).or_default();
                match which {
                    ChainEntry::P00 => entry.0 = Some(value),
                    ChainEntry::P11 => entry.1 = Some(value),
                }
            }
        }
        let sensor_chain = TwoStateChain::new(
            kv.parse_or("sensor_chain.p00", base.sensor_chain.p00)?,
            kv.parse_or("sensor_chain.p11", base.sensor_chain.p11)?,
        );
        let costs = match kv.parse_list::<f64>("maintenance_costs")? {
            None => base.maintenance_costs,
            Some(list) => <[f64; 3]>::try_from(list.as_slice())
                .map_err(|_| Error::config("maintenance_costs", "expected exactly 3 values"))?,
        };
        let cfg = Self {
            num_sensors: kv.parse_or("num_sensors", base.num_sensors)?,
            sensor_chain,
            sensor_chain_overrides: overrides
                .into_iter()
                .map(|(idx, (p00, p11))| {
                    (
                        idx,
                        TwoStateChain::new(
                            p00.unwrap_or(sensor_chain.p00),
                            p11.unwrap_or(sensor_chain.p11),
                        ),
                    )
                })
                .collect(),
            network_chain: TwoStateChain::new(
                kv.parse_or("network_chain.p00", base.network_chain.p00)?,
                kv.parse_or("network_chain.p11", base.network_chain.p11)?,
            ),
            gen_prob_healthy: kv.parse_or("gen_prob_healthy", base.gen_prob_healthy)?,
            gen_prob_faulty: kv.parse_or("gen_prob_faulty", base.gen_prob_faulty)?,
            deliver_prob_healthy: kv.parse_or("deliver_prob_healthy", base.deliver_prob_healthy)?,
            deliver_prob_faulty: kv.parse_or("deliver_prob_faulty", base.deliver_prob_faulty)?,
            maintenance_costs: costs,
            weight_cost: kv.parse_or("weight_cost", base.weight_cost)?,
            weight_aoi: kv.parse_or("weight_aoi", base.weight_aoi)?,
            horizon: kv.parse_or("horizon", base.horizon)?,
            aoi_max: kv.parse_or("aoi_max", base.aoi_max)?,
            reward_uses_pre_transition_aoi: kv.parse_or(
                "reward_uses_pre_transition_aoi",
                base.reward_uses_pre_transition_aoi,
            )?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("num_sensors", self.num_sensors);
        kv.set("sensor_chain.p00", self.sensor_chain.p00);
        kv.set("sensor_chain.p11", self.sensor_chain.p11);
        for (idx, chain) in &self.sensor_chain_overrides {
            kv.set(format!("sensor_chain.{idx}.p00"), chain.p00);
            kv.set(format!("sensor_chain.{idx}.p11"), chain.p11);
        }
        kv.set("network_chain.p00", self.network_chain.p00);
        kv.set("network_chain.p11", self.network_chain.p11);
        kv.set("gen_prob_healthy", self.gen_prob_healthy);
        kv.set("gen_prob_faulty", self.gen_prob_faulty);
        kv.set("deliver_prob_healthy", self.deliver_prob_healthy);
        kv.set("deliver_prob_faulty", self.deliver_prob_faulty);
        kv.set(
            "maintenance_costs",
            self.maintenance_costs
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv.set("weight_cost", self.weight_cost);
        kv.set("weight_aoi", self.weight_aoi);
        kv.set("horizon", self.horizon);
        kv.set("aoi_max", self.aoi_max);
        kv.set(
            "reward_uses_pre_transition_aoi",
            self.reward_uses_pre_transition_aoi,
        );
        kv
    }
}

enum ChainEntry {
    P00,
    P11,
}

/// `sensor_chain.<index>.p00` / `sensor_chain.<index>.p11`
fn parse_override_key(key: &str) -> Option<(usize, ChainEntry)> {
    let rest = key.strip_prefix("sensor_chain.")?;
    let (idx, which) = rest.split_once('.')?;
    let idx = idx.parse().ok()?;
    match which {
        "p00" => Some((idx, ChainEntry::P00)),
        "p11" => Some((idx, ChainEntry::P11)),
        _ => None,
    }
}
