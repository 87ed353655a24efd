//! True-positive rate of fault detection by minimum fault duration.

use std::fmt;

use super::faults::{track_faults, FaultRecord, FaultUnit};
use crate::agents::GreedyPolicy;
use crate::env::{Environment, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed};

pub const DEFAULT_THRESHOLDS: [u32; 6] = [1, 4, 8, 12, 16, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultType {
    Network,
    Sensor,
    Combined,
}

impl FaultType {
    pub const ALL: [FaultType; 3] = [FaultType::Network, FaultType::Sensor, FaultType::Combined];

    pub fn name(self) -> &'static str {
        match self {
            FaultType::Network => "network",
            FaultType::Sensor => "sensor",
            FaultType::Combined => "combined",
        }
    }

    fn includes(self, unit: FaultUnit) -> bool {
        match self {
            FaultType::Network => unit.is_network(),
            FaultType::Sensor => !unit.is_network(),
            FaultType::Combined => true,
        }
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TprEntry {
    pub threshold: u32,
    pub fault_count: usize,
    pub detected_count: usize,
    /// Absent when no fault lasted at least `threshold` slots.
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TprReport {
    pub thresholds: Vec<u32>,
    pub network: Vec<TprEntry>,
    pub sensor: Vec<TprEntry>,
    pub combined: Vec<TprEntry>,
    /// Largest onset-to-detection lag among detected faults, in slots.
    pub slowest_detection_lag: Option<u32>,
}

impl TprReport {
    pub fn from_records(records: &[FaultRecord], thresholds: &[u32]) -> Result<Self> {
        validate_thresholds(thresholds)?;
        let entries = |kind: FaultType| -> Vec<TprEntry> {
            thresholds
                .iter()
                .map(|&threshold| {
                    let eligible = records
                        .iter()
                        .filter(|r| kind.includes(r.unit) && r.duration() >= threshold);
                    let (fault_count, detected_count) =
                        eligible.fold((0, 0), |(n, d), r| (n + 1, d + usize::from(r.detected)));
                    TprEntry {
                        threshold,
                        fault_count,
                        detected_count,
                        tpr: (fault_count > 0)
                            .then(|| detected_count as f64 / fault_count as f64),
                    }
                })
                .collect()
        };
        Ok(Self {
            thresholds: thresholds.to_vec(),
            network: entries(FaultType::Network),
            sensor: entries(FaultType::Sensor),
            combined: entries(FaultType::Combined),
            slowest_detection_lag: records.iter().filter_map(|r| r.detection_lag()).max(),
        })
    }

    pub fn entries(&self, kind: FaultType) -> &[TprEntry] {
        match kind {
            FaultType::Network => &self.network,
            FaultType::Sensor => &self.sensor,
            FaultType::Combined => &self.combined,
        }
    }

    pub fn entry(&self, kind: FaultType, threshold: u32) -> Option<&TprEntry> {
        self.entries(kind).iter().find(|e| e.threshold == threshold)
    }

    /// Rows in output order: every threshold of each fault type in turn.
    pub fn rows(&self) -> impl Iterator<Item = (FaultType, &TprEntry)> {
        FaultType::ALL
            .into_iter()
            .flat_map(move |kind| self.entries(kind).iter().map(move |e| (kind, e)))
    }
}

fn validate_thresholds(thresholds: &[u32]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::config("thresholds", "at least one threshold is required"));
    }
    if thresholds.contains(&0) {
        return Err(Error::config("thresholds", "thresholds are durations of at least 1 slot"));
    }
    Ok(())
}

/// Runs `episodes` greedy episodes and collects every fault record.
pub fn collect_fault_records(
    policy: &impl GreedyPolicy,
    scenario: &ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<FaultRecord>> {
    if policy.num_sensors() != scenario.num_sensors {
        return Err(Error::ShapeMismatch {
            expected: policy.num_sensors(),
            actual: scenario.num_sensors,
        });
    }
    let mut env = Environment::new(scenario.clone(), derive_seed(seed, 0))?;
    let mut policy_rng = rng::seeded(derive_seed(seed, 1));
    let mut records = Vec::new();
    let mut trajectory = Vec::with_capacity(scenario.horizon as usize);
    for _ in 0..episodes {
        env.reset();
        trajectory.clear();
        while !env.is_terminal() {
            let action = policy.greedy_action(env.observation(), &mut policy_rng);
            trajectory.push((env.state().clone(), action));
            env.step(action)?;
        }
        records.extend(track_faults(&trajectory));
    }
    Ok(records)
}

/// Greedy evaluation with fault tracking. The policy is only borrowed, so
/// its parameters cannot change.
pub fn evaluate_tpr(
    policy: &impl GreedyPolicy,
    scenario: &ScenarioConfig,
    episodes: usize,
    thresholds: &[u32],
    seed: u64,
) -> Result<TprReport> {
    validate_thresholds(thresholds)?;
    let records = collect_fault_records(policy, scenario, episodes, seed)?;
    TprReport::from_records(&records, thresholds)
}
