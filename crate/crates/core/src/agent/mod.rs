//! Learning agents: one set of Q-networks per node, trained from a shared
//! joint replay buffer.

pub mod learner;
pub mod policy;
pub mod replay;
pub mod schedules;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{ConfigError, Error, Result};
use crate::nn::{self, Activation, Head, QNetwork};

pub use learner::{Batch, LossReduction, NodeAgent, TdMode, TrainStats, UpdateSettings};
pub use replay::{Experience, PriorityMode, ReplayBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub discount: f64,
    pub soft_update_rate: f64,
    pub initial_learning_rate: f64,
    pub learning_rate_decay: f64,
    pub initial_epsilon: f64,
    pub epsilon_decay: f64,
    pub replay_capacity: usize,
    pub priority_exponent: f64,
    pub priority_mode: PriorityMode,
    pub td_mode: TdMode,
    pub loss_reduction: LossReduction,
    /// Global gradient-norm cap per update; `0` disables clipping.
    pub max_grad_norm: f64,
    pub rule_based_max_attempts: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden_layers: vec![32, 64, 300],
            activation: Activation::LeakyRelu,
            batch_size: 64,
            discount: 0.666,
            soft_update_rate: 1e-3,
            initial_learning_rate: 0.03,
            learning_rate_decay: 1e-3,
            initial_epsilon: 1.0,
            epsilon_decay: 1e-4,
            replay_capacity: 50_000,
            priority_exponent: 0.6,
            priority_mode: PriorityMode::RewardDeviation,
            td_mode: TdMode::Double,
            loss_reduction: LossReduction::Mean,
            max_grad_norm: 10.0,
            rule_based_max_attempts: policy::RULE_BASED_MAX_ATTEMPTS,
        }
    }
}

fn open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

impl AgentConfig {
    pub fn validate(&self, section: &str) -> Result<(), ConfigError> {
        let key = |k: &str| format!("{section}.{k}");
        let checks: [(&str, bool, &str); 12] = [
            ("hidden_layers", !self.hidden_layers.is_empty() && self.hidden_layers.iter().all(|&h| h > 0), "must be a non-empty list of positive widths"),
            ("batch_size", self.batch_size > 0, "must be positive"),
            ("discount", open_unit(self.discount), "must lie in (0, 1)"),
            ("soft_update_rate", self.soft_update_rate > 0.0 && self.soft_update_rate <= 1.0, "must lie in (0, 1]"),
            ("initial_learning_rate", self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite(), "must be positive"),
            ("learning_rate_decay", (0.0..1.0).contains(&self.learning_rate_decay), "must lie in [0, 1)"),
            ("initial_epsilon", self.initial_epsilon > 0.0 && self.initial_epsilon <= 1.0, "must lie in (0, 1]"),
            ("epsilon_decay", (0.0..1.0).contains(&self.epsilon_decay), "must lie in [0, 1)"),
            ("replay_capacity", self.replay_capacity >= self.batch_size, "must be at least batch_size"),
            ("priority_exponent", self.priority_exponent >= 0.0 && self.priority_exponent.is_finite(), "must be non-negative"),
            ("max_grad_norm", self.max_grad_norm >= 0.0 && self.max_grad_norm.is_finite(), "must be >= 0"),
            ("rule_based_max_attempts", self.rule_based_max_attempts > 0, "must be positive"),
        ];
        for (k, ok, reason) in checks {
            if !ok {
                return Err(ConfigError::invalid(&key(k), reason));
            }
        }
        Ok(())
    }

    pub fn epsilon_at(&self, frame: u64) -> f64 {
        schedules::epsilon_at(frame, self.initial_epsilon, self.epsilon_decay)
    }

    pub fn lr_at(&self, update: u64) -> f64 {
        schedules::lr_at(update, self.initial_learning_rate, self.learning_rate_decay)
    }

    pub fn new_buffer(&self) -> ReplayBuffer {
        ReplayBuffer::new(self.replay_capacity, self.priority_exponent, self.priority_mode)
    }
}

/// Roles of the three per-node networks, in checkpoint file order.
pub const ROLES: [&str; 3] = ["train", "target", "local"];

pub fn checkpoint_path(dir: &Path, node: usize, role: &str) -> std::path::PathBuf {
    dir.join(format!("node{node:03}_{role}.qnet"))
}

/// Agents of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPool {
    pub agents: Vec<NodeAgent>,
    max_blocklength: u32,
}

impl AgentPool {
    /// Fresh networks; `init_rng(i)` seeds node `i`.
    pub fn new<R: Rng, F: FnMut(usize) -> R>(
        nodes: usize,
        max_blocklength: u32,
        head: Head,
        config: &AgentConfig,
        mut init_rng: F,
    ) -> Self {
        let input = Observation::dimension(nodes);
        let agents = (0..nodes)
            .map(|i| {
                let mut rng = init_rng(i);
                NodeAgent::new(
                    input,
                    &config.hidden_layers,
                    max_blocklength as usize,
                    head,
                    config.activation,
                    &mut rng,
                )
            })
            .collect();
        AgentPool {
            agents,
            max_blocklength,
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Q-values of every node's acting network for the current frame.
    pub fn local_q(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>> {
        self.agents
            .iter()
            .zip(observations)
            .map(|(a, o)| Ok(a.local.forward(&o.features(self.max_blocklength))?))
            .collect()
    }

    pub fn sync_local(&mut self) {
        self.agents.iter_mut().for_each(NodeAgent::sync_local);
    }

    /// One update of every node on a shared prioritized sample. Returns the
    /// per-node stats; TD priorities are refreshed with the node-averaged
    /// error.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &mut ReplayBuffer,
        config: &AgentConfig,
        update: u64,
        rng: &mut R,
    ) -> Result<Vec<TrainStats>> {
        let indices = buffer.sample(config.batch_size, rng)?;
        let settings = UpdateSettings {
            learning_rate: config.lr_at(update),
            discount: config.discount,
            soft_update_rate: config.soft_update_rate,
            td_mode: config.td_mode,
            reduction: config.loss_reduction,
            max_grad_norm: config.max_grad_norm,
        };
        let rewards: Vec<f64> = indices.iter().map(|&j| buffer.get(j).reward).collect();
        let mut stats = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let mut states = Vec::new();
            let mut next = Vec::new();
            let mut actions = Vec::with_capacity(indices.len());
            for &j in &indices {
                let e = buffer.get(j);
                states.extend(e.state.features(i, self.max_blocklength));
                next.extend(e.next_state.features(i, self.max_blocklength));
                actions.push(e.actions[i] as usize - 1);
            }
            let batch = Batch {
                states: &states,
                actions: &actions,
                rewards: &rewards,
                next_states: &next,
            };
            stats.push(agent.train_step(&batch, &settings)?);
        }
        let n = stats.len().max(1) as f64;
        let td: Vec<f64> = (0..indices.len())
            .map(|b| stats.iter().map(|s| s.td_abs[b]).sum::<f64>() / n)
            .collect();
        buffer.update_td(&indices, &td);
        Ok(stats)
    }

    pub fn is_finite(&self) -> bool {
        self.agents
            .iter()
            .all(|a| a.train.is_finite() && a.target.is_finite() && a.local.is_finite())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, a) in self.agents.iter().enumerate() {
            for (role, net) in ROLES.iter().zip([&a.train, &a.target, &a.local]) {
                nn::save(net, &checkpoint_path(dir, i, role))?;
            }
        }
        Ok(())
    }

    /// Loads `nodes` agents and checks them against the expected shape.
    pub fn load(dir: &Path, nodes: usize, max_blocklength: u32, head: Head) -> Result<Self> {
        let input = Observation::dimension(nodes);
        let mut agents = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let mut nets: Vec<QNetwork> = Vec::with_capacity(3);
            for role in ROLES {
                let net = nn::load(&checkpoint_path(dir, i, role))?;
                if net.input_size() != input
                    || net.actions() != max_blocklength as usize
                    || net.head != head
                {
                    return Err(Error::Contract(format!(
                        "checkpoint node {i} {role}: {} inputs / {} actions / {:?} head, expected {input} / {max_blocklength} / {head:?}",
                        net.input_size(),
                        net.actions(),
                        net.head
                    )));
                }
                nets.push(net);
            }
            let local = nets.pop().expect("three roles");
            let target = nets.pop().expect("three roles");
            let train = nets.pop().expect("three roles");
            agents.push(NodeAgent::from_parts(train, target, local)?);
        }
        Ok(AgentPool {
            agents,
            max_blocklength,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_validate() {
        AgentConfig::default().validate("agent").unwrap();
        let bad = AgentConfig {
            discount: 1.0,
            ..AgentConfig::default()
        };
        let err = bad.validate("agent").unwrap_err().to_string();
        assert!(err.contains("agent.discount"), "{err}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let config = AgentConfig {
            hidden_layers: vec![4],
            ..AgentConfig::default()
        };
        let pool = AgentPool::new(2, 5, Head::Dueling, &config, |i| ChaCha8Rng::seed_from_u64(i as u64));
        let dir = tempfile::tempdir().unwrap();
        pool.save(dir.path()).unwrap();
        let back = AgentPool::load(dir.path(), 2, 5, Head::Dueling).unwrap();
        assert_eq!(back, pool);
        assert!(AgentPool::load(dir.path(), 2, 6, Head::Dueling).is_err());
        assert!(AgentPool::load(dir.path(), 2, 5, Head::Plain).is_err());
    }
}
