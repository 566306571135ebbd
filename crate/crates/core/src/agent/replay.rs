//! Prioritized experience replay over joint (all-node) transitions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::FrameState;
use crate::error::{Error, Result};

/// Added to every priority so no entry becomes unsampleable.
pub const PRIORITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityMode {
    /// `|r - mean of earlier rewards|`.
    #[default]
    RewardDeviation,
    /// `|TD error|`, refreshed after every update; new entries get the
    /// largest priority seen so far.
    TdError,
}

/// Binary tree of partial sums over leaf weights.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, weight: f64) {
        let mut p = self.leaves + i;
        self.nodes[p] = weight;
        while p > 1 {
            p /= 2;
            // Recomputed from the children so rounding never accumulates.
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u` in `[0, total)`.
    pub fn find(&self, mut u: f64) -> usize {
        let mut p = 1;
        while p < self.leaves {
            let left = self.nodes[2 * p];
            let right = self.nodes[2 * p + 1];
            if u < left || right <= 0.0 {
                p *= 2;
            } else {
                u -= left;
                p = 2 * p + 1;
            }
        }
        p - self.leaves
    }
}

/// One frame of every node: compact states, executed blocklengths, shared
/// learning reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: FrameState,
    pub actions: Vec<u32>,
    pub reward: f64,
    pub next_state: FrameState,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Experience>,
    priorities: Vec<f64>,
    next: usize,
    tree: SumTree,
    exponent: f64,
    mode: PriorityMode,
    reward_sum: f64,
    reward_count: u64,
    max_priority: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, exponent: f64, mode: PriorityMode) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            entries: Vec::new(),
            priorities: Vec::new(),
            next: 0,
            tree: SumTree::new(capacity),
            exponent,
            mode,
            reward_sum: 0.0,
            reward_count: 0,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.entries[i]
    }

    /// Raw priority (before the exponent) of entry `i`.
    pub fn priority(&self, i: usize) -> f64 {
        self.priorities[i]
    }

    /// Probability that one draw returns entry `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    fn write(&mut self, slot: usize, priority: f64) {
        self.priorities[slot] = priority;
        self.tree.set(slot, priority.powf(self.exponent));
    }

    /// Inserts `exp` with an explicit priority, overwriting the oldest entry
    /// when full.
    pub fn push_with_priority(&mut self, exp: Experience, priority: f64) -> usize {
        let slot = self.next;
        if self.entries.len() < self.capacity {
            self.entries.push(exp);
            self.priorities.push(0.0);
        } else {
            self.entries[slot] = exp;
        }
        self.write(slot, priority);
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    /// Inserts `exp` with the priority given by the buffer's rule. Returns
    /// the slot written.
    pub fn push(&mut self, exp: Experience) -> usize {
        let priority = match self.mode {
            PriorityMode::RewardDeviation => {
                let mean = if self.reward_count == 0 {
                    exp.reward
                } else {
                    self.reward_sum / self.reward_count as f64
                };
                (exp.reward - mean).abs() + PRIORITY_FLOOR
            }
            PriorityMode::TdError => self.max_priority,
        };
        self.reward_sum += exp.reward;
        self.reward_count += 1;
        self.push_with_priority(exp, priority)
    }

    /// `batch` indices drawn with replacement, each with probability
    /// proportional to `priority^exponent`.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.entries.is_empty() {
            return Err(Error::Contract("sampling an empty replay buffer".into()));
        }
        let total = self.tree.total();
        Ok((0..batch)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                self.tree.find(u).min(self.entries.len() - 1)
            })
            .collect())
    }

    /// Refreshes priorities from absolute TD errors; ignored unless the buffer
    /// prioritizes by TD error.
    pub fn update_td(&mut self, indices: &[usize], td_abs: &[f64]) {
        if self.mode != PriorityMode::TdError {
            return;
        }
        for (&i, &td) in indices.iter().zip(td_abs) {
            let p = td + PRIORITY_FLOOR;
            self.max_priority = self.max_priority.max(p);
            self.write(i, p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state() -> FrameState {
        FrameState {
            actions: vec![1],
            rates: vec![0.0],
            tx_powers: vec![0.0],
            total_power: 0.0,
            snr: vec![0.0],
            gains: vec![0.0],
        }
    }

    fn exp(reward: f64) -> Experience {
        Experience {
            state: state(),
            actions: vec![1],
            reward,
            next_state: state(),
        }
    }

    #[test]
    fn sum_tree_finds_intervals() {
        let mut t = SumTree::new(5);
        for (i, w) in [1.0, 0.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            t.set(i, w);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(9.999), 4);
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3, 1.0, PriorityMode::RewardDeviation);
        for r in 0..5 {
            b.push(exp(f64::from(r)));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn reward_deviation_priority() {
        let mut b = ReplayBuffer::new(10, 1.0, PriorityMode::RewardDeviation);
        b.push(exp(-1.0));
        b.push(exp(-3.0));
        b.push(exp(0.0));
        assert!((b.priority(0) - PRIORITY_FLOOR).abs() < 1e-15);
        assert!((b.priority(1) - (2.0 + PRIORITY_FLOOR)).abs() < 1e-12);
        assert!((b.priority(2) - (2.0 + PRIORITY_FLOOR)).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_refuses_sampling() {
        let b = ReplayBuffer::new(4, 0.6, PriorityMode::TdError);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(1, &mut rng).is_err());
    }

    #[test]
    fn td_mode_updates_priorities() {
        let mut b = ReplayBuffer::new(4, 1.0, PriorityMode::TdError);
        b.push(exp(0.0));
        b.push(exp(0.0));
        b.update_td(&[1], &[4.0]);
        assert!((b.priority(1) - 4.0).abs() < 1e-5);
        let slot = b.push(exp(0.0));
        assert!((b.priority(slot) - 4.0).abs() < 1e-5);
    }
}
