//! Per-node networks and the temporal-difference update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, Head, QNetwork};

use super::policy::argmax;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdMode {
    /// Train network picks the next action, target network scores it.
    #[default]
    Double,
    /// `r + gamma * max Q_target(s')`.
    Literal,
}

/// How the per-sample squared errors are combined before differentiation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    Sum,
    #[default]
    Mean,
}

pub fn td_target(
    reward: f64,
    q_next_train: &[f64],
    q_next_target: &[f64],
    discount: f64,
    mode: TdMode,
) -> f64 {
    let bootstrap = match mode {
        TdMode::Double => q_next_target[argmax(q_next_train)],
        TdMode::Literal => q_next_target[argmax(q_next_target)],
    };
    reward + discount * bootstrap
}

/// One mini-batch for a single node, row-major `batch x input`.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub states: &'a [f64],
    /// 0-based action indices.
    pub actions: &'a [usize],
    pub rewards: &'a [f64],
    pub next_states: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub learning_rate: f64,
    pub discount: f64,
    pub soft_update_rate: f64,
    pub td_mode: TdMode,
    pub reduction: LossReduction,
    /// Global L2 cap on the gradient; `0` disables clipping.
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// `sum (y - q[a])^2` before the update.
    pub loss: f64,
    /// `|y - q[a]|` per sample, before the update.
    pub td_abs: Vec<f64>,
}

/// Bootstrap targets of a batch.
pub fn batch_targets(
    train: &QNetwork,
    target: &QNetwork,
    batch: &Batch<'_>,
    discount: f64,
    mode: TdMode,
) -> Result<Vec<f64>> {
    let n = batch.actions.len();
    let width = target.actions();
    let q_target = target.forward_batch(batch.next_states, n)?.q;
    let q_train = match mode {
        TdMode::Double => train.forward_batch(batch.next_states, n)?.q,
        TdMode::Literal => Vec::new(),
    };
    Ok((0..n)
        .map(|b| {
            let t = &q_target[b * width..(b + 1) * width];
            let s = match mode {
                TdMode::Double => &q_train[b * width..(b + 1) * width],
                TdMode::Literal => t,
            };
            td_target(batch.rewards[b], s, t, discount, mode)
        })
        .collect())
}

fn scale(grads: &mut Gradients, factor: f64) {
    for l in &mut grads.layers {
        l.weights.iter_mut().chain(&mut l.bias).for_each(|g| *g *= factor);
    }
}

/// Train, target and local (acting) network of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAgent {
    pub train: QNetwork,
    pub target: QNetwork,
    pub local: QNetwork,
}

impl NodeAgent {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        actions: usize,
        head: Head,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let train = QNetwork::new(input, hidden, actions, head, activation, rng);
        NodeAgent {
            target: train.clone(),
            local: train.clone(),
            train,
        }
    }

    pub fn from_parts(train: QNetwork, target: QNetwork, local: QNetwork) -> Result<Self> {
        if !train.same_shape(&target) || !train.same_shape(&local) {
            return Err(Error::Contract("train/target/local shapes differ".into()));
        }
        Ok(NodeAgent { train, target, local })
    }

    /// Copies the train parameters into the acting network.
    pub fn sync_local(&mut self) {
        self.local.clone_from(&self.train);
    }

    /// One SGD step on the squared TD error, then a soft target update.
    pub fn train_step(&mut self, batch: &Batch<'_>, s: &UpdateSettings) -> Result<TrainStats> {
        let n = batch.actions.len();
        if n == 0 || batch.rewards.len() != n {
            return Err(Error::Contract(format!(
                "batch of {n} actions with {} rewards",
                batch.rewards.len()
            )));
        }
        let targets = batch_targets(&self.train, &self.target, batch, s.discount, s.td_mode)?;
        let cache = self.train.forward_batch(batch.states, n)?;
        let width = self.train.actions();
        let mut dq = vec![0.0; n * width];
        let mut loss = 0.0;
        let mut td_abs = Vec::with_capacity(n);
        for (b, (&a, &y)) in batch.actions.iter().zip(&targets).enumerate() {
            if a >= width {
                return Err(Error::Contract(format!("action index {a} >= {width}")));
            }
            let err = y - cache.q[b * width + a];
            loss += err * err;
            td_abs.push(err.abs());
            dq[b * width + a] = -2.0 * err;
        }
        let mut grads = self.train.backward(&cache, &dq)?;
        if s.reduction == LossReduction::Mean {
            scale(&mut grads, 1.0 / n as f64);
        }
        let norm = grads.norm();
        if s.max_grad_norm > 0.0 && norm > s.max_grad_norm {
            scale(&mut grads, s.max_grad_norm / norm);
        }
        self.train.sgd_step(&grads, s.learning_rate)?;
        self.target.soft_update(&self.train, s.soft_update_rate)?;
        Ok(TrainStats { loss, td_abs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_discount_returns_reward() {
        let a = [1.0, 3.0, 2.0];
        let b = [0.5, -1.0, 4.0];
        for mode in [TdMode::Double, TdMode::Literal] {
            assert_eq!(td_target(-2.5, &a, &b, 0.0, mode), -2.5);
        }
    }

    #[test]
    fn modes_diverge_by_constructed_gap() {
        // train prefers action 1, target prefers action 2
        let train = [0.0, 5.0, 1.0];
        let target = [0.0, 2.0, 7.0];
        let d = td_target(1.0, &train, &target, 0.5, TdMode::Double);
        let l = td_target(1.0, &train, &target, 0.5, TdMode::Literal);
        assert_eq!(d, 1.0 + 0.5 * 2.0);
        assert_eq!(l, 1.0 + 0.5 * 7.0);
        assert_eq!(td_target(1.0, &target, &target, 0.5, TdMode::Double), l);
    }

    fn agent(seed: u64) -> NodeAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NodeAgent::new(4, &[8, 8], 3, Head::Dueling, Activation::LeakyRelu, &mut rng)
    }

    fn settings() -> UpdateSettings {
        UpdateSettings {
            learning_rate: 1e-3,
            discount: 0.666,
            soft_update_rate: 1e-3,
            td_mode: TdMode::Double,
            reduction: LossReduction::Sum,
            max_grad_norm: 0.0,
        }
    }

    #[test]
    fn loss_matches_recomputation() {
        let mut a = agent(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let states: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let next: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let actions = [0, 2, 1];
        let rewards = [-0.3, -1.0, 0.2];
        let batch = Batch {
            states: &states,
            actions: &actions,
            rewards: &rewards,
            next_states: &next,
        };
        let before = a.clone();
        let stats = a.train_step(&batch, &settings()).unwrap();
        let mut expected = 0.0;
        for b in 0..3 {
            let qn = before.train.forward(&next[b * 4..b * 4 + 4]).unwrap();
            let qt = before.target.forward(&next[b * 4..b * 4 + 4]).unwrap();
            let y = td_target(rewards[b], &qn, &qt, 0.666, TdMode::Double);
            let q = before.train.forward(&states[b * 4..b * 4 + 4]).unwrap();
            expected += (y - q[actions[b]]).powi(2);
        }
        assert!((stats.loss - expected).abs() <= 1e-12 * expected.max(1.0));
        assert_ne!(a.train, before.train);
    }

    #[test]
    fn exact_targets_leave_parameters_unchanged() {
        let mut a = agent(8);
        let states = [0.1, 0.2, 0.3, 0.4];
        let next = [0.0; 4];
        // With discount 0 the target is the reward, so choose reward = q[a].
        let q = a.train.forward(&states).unwrap();
        let rewards = [q[1]];
        let batch = Batch {
            states: &states,
            actions: &[1],
            rewards: &rewards,
            next_states: &next,
        };
        let before = a.train.clone();
        let s = UpdateSettings {
            discount: 0.0,
            ..settings()
        };
        let stats = a.train_step(&batch, &s).unwrap();
        assert_eq!(stats.loss, 0.0);
        assert_eq!(a.train, before);
    }

    #[test]
    fn sync_local_copies_train() {
        let mut a = agent(1);
        a.train.layers[0].bias[0] += 1.0;
        assert_ne!(a.local, a.train);
        a.sync_local();
        assert_eq!(a.local, a.train);
    }
}
