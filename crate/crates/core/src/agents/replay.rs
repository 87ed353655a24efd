use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use super::Transition;

/// Bounded FIFO experience memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(transition);
    }

    pub fn get(&self, idx: usize) -> Option<&Transition> {
        self.storage.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Indices of `batch_size` distinct stored transitions, uniformly at random.
    /// `None` when fewer than `batch_size` are stored.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<usize>> {
        (batch_size <= self.storage.len())
            .then(|| index::sample(rng, self.storage.len(), batch_size).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<Transition>> {
        self.sample_indices(batch_size, rng)
            .map(|idx| idx.into_iter().map(|i| self.storage[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Observation};
    use crate::rng;

    fn tagged(tag: u32) -> Transition {
        Transition {
            observation: Observation { aoi: vec![tag] },
            action: Action::NoMaintenance,
            reward: 1.0,
            next_observation: Observation { aoi: vec![1] },
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3);
        for tag in 1..=4 {
            buf.push(tagged(tag));
        }
        assert_eq!(buf.len(), 3);
        let tags: Vec<u32> = buf.iter().map(|t| t.observation.aoi[0]).collect();
        assert_eq!(tags, vec![2, 3, 4]);
    }

    #[test]
    fn batch_without_replacement() {
        let mut buf = ReplayBuffer::new(10);
        for tag in 0..10 {
            buf.push(tagged(tag));
        }
        let mut r = rng::seeded(3);
        for _ in 0..100 {
            let mut idx = buf.sample_indices(10, &mut r).unwrap();
            idx.sort_unstable();
            assert_eq!(idx, (0..10).collect::<Vec<_>>());
        }
        assert!(buf.sample(11, &mut r).is_none());
    }
}
