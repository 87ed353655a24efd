//! Fault intervals and whether the agent acted on them.

use crate::env::{Action, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultUnit {
    Network,
    Sensor(usize),
}

impl FaultUnit {
    /// The maintenance action that repairs this unit.
    pub fn matching_action(self) -> Action {
        match self {
            FaultUnit::Network => Action::NetworkMaintenance,
            FaultUnit::Sensor(_) => Action::SensorsMaintenance,
        }
    }

    pub fn is_network(self) -> bool {
        self == FaultUnit::Network
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCause {
    SelfHeal,
    Repaired,
    EpisodeEnd,
}

/// One maximal run of faulty slots of one unit, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    pub unit: FaultUnit,
    pub start_slot: u32,
    pub end_slot: u32,
    pub cause_of_end: EndCause,
    pub detected: bool,
    /// First slot in the interval at which the matching action was issued.
    pub detection_slot: Option<u32>,
}

impl FaultRecord {
    pub fn duration(&self) -> u32 {
        self.end_slot - self.start_slot + 1
    }

    /// Slots from fault onset to detection, inclusive.
    pub fn detection_lag(&self) -> Option<u32> {
        self.detection_slot.map(|d| d - self.start_slot + 1)
    }
}

/// Splits an instrumented episode, given as the true state at the start of
/// each slot and the action taken in it, into fault records.
///
/// A fault counts as detected when the unit's matching maintenance action
/// (network maintenance for the network, sensors maintenance for any sensor)
/// was issued at some slot of the interval. An interval that reaches the last
/// slot ends with the episode unless it was repaired in that very slot.
pub fn track_faults(trajectory: &[(SystemState, Action)]) -> Vec<FaultRecord> {
    let Some((first, _)) = trajectory.first() else {
        return Vec::new();
    };
    let units = std::iter::once(FaultUnit::Network)
        .chain((0..first.sensor_health.len()).map(FaultUnit::Sensor));
    let last = trajectory.len() - 1;
    let mut records = Vec::new();
    for unit in units {
        let faulty = |t: usize| {
            let state = &trajectory[t].0;
            match unit {
                FaultUnit::Network => state.network_health.is_faulty(),
                FaultUnit::Sensor(i) => state.sensor_health[i].is_faulty(),
            }
        };
        let mut t = 0;
        while t <= last {
            if !faulty(t) {
                t += 1;
                continue;
            }
            let start = t;
            while t < last && faulty(t + 1) {
                t += 1;
            }
            let end = t;
            let matching = unit.matching_action();
            let detection_slot = (start..=end)
                .find(|&s| trajectory[s].1 == matching)
                .map(|s| s as u32);
            let cause_of_end = if trajectory[end].1 == matching {
                EndCause::Repaired
            } else if end == last {
                EndCause::EpisodeEnd
            } else {
                EndCause::SelfHeal
            };
            records.push(FaultRecord {
                unit,
                start_slot: start as u32,
                end_slot: end as u32,
                cause_of_end,
                detected: detection_slot.is_some(),
                detection_slot,
            });
            t += 1;
        }
    }
    records
}
