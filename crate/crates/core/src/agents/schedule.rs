use crate::error::{Error, Result};

/// Linear exploration decay from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
            return Err(Error::config("epsilon_start", "epsilon must lie in [0, 1]"));
        }
        if start < end {
            return Err(Error::config("epsilon_start", "must be >= epsilon_end"));
        }
        if decay_steps == 0 {
            return Err(Error::config("epsilon_decay_steps", "must be positive"));
        }
        Ok(Self {
            start,
            end,
            decay_steps,
        })
    }

    pub fn constant(epsilon: f64) -> Self {
        Self {
            start: epsilon,
            end: epsilon,
            decay_steps: 1,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        let progress = step.min(self.decay_steps) as f64 / self.decay_steps as f64;
        self.start - (self.start - self.end) * progress
    }
}
