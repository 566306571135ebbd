//! The per-frame decision process.
//!
//! Each frame every node picks a blocklength. The environment evaluates the
//! joint action on the current channel, advances the fading, and exposes to
//! every node its view of the previous frame: all blocklengths, its own rate,
//! all transmit powers, the total power, its SNR under the new gain, and all
//! current gains.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ChannelParams, ChannelSnapshot};
use crate::error::{Error, Result};
use crate::fbl;
use crate::optimality::NodeEvaluation;
use crate::params::NetworkParams;
use crate::rng::Stream;
use crate::safety::{self, FeasibilityReport};

/// Bound applied to the learning reward and to every network feature.
pub const FEATURE_CLAMP: f64 = 10.0;
/// Smallest power, Watts, represented in the logarithmic features.
const POWER_FLOOR_W: f64 = 1e-20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Negative power only.
    #[default]
    Safe,
    /// Negative power minus a fixed weight per violated constraint.
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Test,
}

/// Per-node view of the previous frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub prev_actions: Vec<u32>,
    /// This node's rate in the previous frame, bits/s/Hz.
    pub prev_rate: f64,
    /// Transmit powers of all nodes in the previous frame, Watts.
    pub prev_powers: Vec<f64>,
    /// Summed node power of the previous frame, Watts.
    pub prev_total_power: f64,
    /// Current gain times this node's previous transmit power over noise.
    pub snr: f64,
    pub gains: Vec<f64>,
}

fn dbm(w: f64) -> f64 {
    10.0 * (w.max(POWER_FLOOR_W) * 1e3).log10()
}

impl Observation {
    pub fn dimension(nodes: usize) -> usize {
        3 * nodes + 3
    }

    /// Physical values in flattened order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Observation::dimension(self.gains.len()));
        v.extend(self.prev_actions.iter().map(|&m| f64::from(m)));
        v.push(self.prev_rate);
        v.extend_from_slice(&self.prev_powers);
        v.push(self.prev_total_power);
        v.push(self.snr);
        v.extend_from_slice(&self.gains);
        v
    }

    /// Network input: blocklengths over `M_th`, powers in dBm / 30, SNR and
    /// gains in dB, the rate as `ln(1 + R) / 5`; each clamped to
    /// `+-FEATURE_CLAMP`.
    pub fn features(&self, max_blocklength: u32) -> Vec<f64> {
        let mut v = Vec::with_capacity(Observation::dimension(self.gains.len()));
        let scale = f64::from(max_blocklength);
        v.extend(self.prev_actions.iter().map(|&m| f64::from(m) / scale));
        v.push(self.prev_rate.max(0.0).ln_1p() / 5.0);
        v.extend(self.prev_powers.iter().map(|&w| dbm(w) / 30.0));
        v.push(dbm(self.prev_total_power) / 30.0);
        v.push(10.0 * self.snr.max(POWER_FLOOR_W).log10() / 30.0);
        v.extend(
            self.gains
                .iter()
                .map(|&g| (10.0 * g.max(POWER_FLOOR_W).log10() + 100.0) / 20.0),
        );
        for x in &mut v {
            *x = x.clamp(-FEATURE_CLAMP, FEATURE_CLAMP);
        }
        v
    }
}

/// What the environment remembers of the previous frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub actions: Vec<u32>,
    pub rates: Vec<f64>,
    pub tx_powers: Vec<f64>,
    pub total_power: f64,
    pub snr: Vec<f64>,
    pub gains: Vec<f64>,
}

impl FrameState {
    pub fn nodes(&self) -> usize {
        self.actions.len()
    }

    pub fn observation(&self, node: usize) -> Observation {
        Observation {
            prev_actions: self.actions.clone(),
            prev_rate: self.rates[node],
            prev_powers: self.tx_powers.clone(),
            prev_total_power: self.total_power,
            snr: self.snr[node],
            gains: self.gains.clone(),
        }
    }

    /// Network input of `node`; see [`Observation::features`].
    pub fn features(&self, node: usize, max_blocklength: u32) -> Vec<f64> {
        self.observation(node).features(max_blocklength)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    /// `-sum W*`, Watts.
    pub reward: f64,
    /// Normalised, clipped, and in penalty mode penalised reward used for
    /// learning.
    pub learning_reward: f64,
    pub report: FeasibilityReport,
    pub nodes: Vec<NodeEvaluation>,
    /// `C1` of the frame the action was evaluated on.
    pub c1: Vec<f64>,
}

impl StepResult {
    pub fn node_powers(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.eval.w_star).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardShaping {
    pub mode: RewardMode,
    pub penalty_weight: f64,
}

impl Default for RewardShaping {
    fn default() -> Self {
        RewardShaping {
            mode: RewardMode::Safe,
            penalty_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Env {
    params: NetworkParams,
    channel: Channel,
    snapshot: ChannelSnapshot,
    state: FrameState,
    shaping: RewardShaping,
    noise_w: f64,
    power_scale_w: f64,
}

impl Env {
    /// Draws the topology of `seed` and runs the hidden bootstrap frame.
    pub fn new(
        params: &NetworkParams,
        channel: &ChannelParams,
        seed: u64,
        phase: Phase,
        shaping: RewardShaping,
    ) -> Result<Self> {
        params.validate("network")?;
        channel.validate("channel")?;
        let fading = match phase {
            Phase::Train => Stream::Fading,
            Phase::Test => Stream::TestFading,
        };
        let ch = Channel::new(
            channel,
            params.nodes,
            seed,
            fading,
            params.bandwidth_hz,
            params.noise_psd_dbm_hz,
        )?;
        let snapshot = ch.snapshot()?;
        let n = params.nodes;
        // Power of a node idling at mid blocklength with negligible radio cost,
        // the unit of the learning reward.
        let m_ref = f64::from(params.max_blocklength);
        let power_scale_w = (params.circuit_power_w + 1e-3 * params.max_tx_power_w) * m_ref
            / (params.window_symbols() - m_ref);
        let mut env = Env {
            params: params.clone(),
            channel: ch,
            snapshot,
            state: FrameState {
                actions: vec![0; n],
                rates: vec![0.0; n],
                tx_powers: vec![0.0; n],
                total_power: 0.0,
                snr: vec![0.0; n],
                gains: vec![0.0; n],
            },
            shaping,
            noise_w: params.noise_power_w(),
            power_scale_w,
        };
        let bootstrap = vec![params.bootstrap_blocklength(); n];
        env.step(&bootstrap)?;
        Ok(env)
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn nodes(&self) -> usize {
        self.params.nodes
    }

    /// Channel the next action will be evaluated on.
    pub fn snapshot(&self) -> &ChannelSnapshot {
        &self.snapshot
    }

    pub fn c1(&self) -> &[f64] {
        &self.snapshot.c1
    }

    pub fn frame_state(&self) -> &FrameState {
        &self.state
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn set_shaping(&mut self, shaping: RewardShaping) {
        self.shaping = shaping;
    }

    pub fn observation(&self, node: usize) -> Observation {
        self.state.observation(node)
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.nodes()).map(|i| self.observation(i)).collect()
    }

    /// Network inputs of every node, concatenated.
    pub fn features(&self) -> Vec<f64> {
        let m_th = self.params.max_blocklength;
        (0..self.nodes())
            .flat_map(|i| self.observation(i).features(m_th))
            .collect()
    }

    /// Learning reward of a physical reward and its violation count.
    pub fn learning_reward(&self, reward: f64, violations: usize) -> f64 {
        let n = self.nodes() as f64;
        let base = (reward / (n * self.power_scale_w)).max(-FEATURE_CLAMP);
        match self.shaping.mode {
            RewardMode::Safe => base,
            RewardMode::Penalty => base - self.shaping.penalty_weight * violations as f64,
        }
    }

    /// Applies `action` to the current channel and advances to the next frame.
    pub fn step(&mut self, action: &[u32]) -> Result<StepResult> {
        let n = self.nodes();
        if action.len() != n {
            return Err(Error::Contract(format!(
                "action has {} entries, expected {n}",
                action.len()
            )));
        }
        if let Some(m) = action
            .iter()
            .find(|&&m| m == 0 || m > self.params.max_blocklength)
        {
            return Err(Error::Contract(format!(
                "blocklength {m} outside [1, {}]",
                self.params.max_blocklength
            )));
        }
        let c1 = self.snapshot.c1.clone();
        let assessment = safety::assess(&self.params, action, &c1)?;
        let nodes: Vec<NodeEvaluation> = assessment
            .evals
            .into_iter()
            .map(|e| e.expect("blocklength range checked above"))
            .collect();
        let total_power: f64 = nodes.iter().map(|e| e.eval.w_star).sum();
        let reward = -total_power;

        let mut rates = Vec::with_capacity(n);
        for (e, &c) in nodes.iter().zip(&c1) {
            let snr = e.eval.w_tx_star / c;
            let rate = if snr > 0.0 && snr.is_finite() {
                fbl::coding_rate(snr, e.blocklength, e.triple.p_star)?
            } else {
                0.0
            };
            rates.push(rate);
        }
        let tx_powers: Vec<f64> = nodes.iter().map(|e| e.eval.w_tx_star).collect();

        self.channel.advance();
        self.snapshot = self.channel.snapshot()?;
        let snr = tx_powers
            .iter()
            .zip(&self.snapshot.gains)
            .map(|(&w, &g)| g * w.max(0.0) / self.noise_w)
            .collect();
        self.state = FrameState {
            actions: action.to_vec(),
            rates,
            tx_powers,
            total_power,
            snr,
            gains: self.snapshot.gains.clone(),
        };

        let report = assessment.report;
        let learning_reward = self.learning_reward(reward, report.violation_count());
        Ok(StepResult {
            observations: self.observations(),
            reward,
            learning_reward,
            report,
            nodes,
            c1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(nodes: usize, seed: u64) -> Env {
        let params = NetworkParams {
            nodes,
            ..Default::default()
        };
        Env::new(
            &params,
            &ChannelParams::default(),
            seed,
            Phase::Train,
            RewardShaping::default(),
        )
        .unwrap()
    }

    #[test]
    fn observation_dimension() {
        for n in [1, 20, 50] {
            let e = env(n, 1);
            assert_eq!(e.observation(0).flatten().len(), 3 * n + 3);
            assert_eq!(e.features().len(), n * (3 * n + 3));
        }
    }

    #[test]
    fn reset_is_deterministic() {
        assert_eq!(env(5, 9).observations(), env(5, 9).observations());
        assert_ne!(env(5, 9).observations(), env(5, 10).observations());
    }

    #[test]
    fn bootstrap_fills_history() {
        let e = env(4, 3);
        let s = e.frame_state();
        assert!(s.actions.iter().all(|&m| m == 100));
        assert!(s.total_power > 0.0);
        assert_eq!(s.gains, e.snapshot().gains);
    }

    #[test]
    fn reward_is_negative_total_power() {
        let mut e = env(6, 2);
        let r = e.step(&[120; 6]).unwrap();
        let sum: f64 = r.node_powers().iter().sum();
        assert_eq!(r.reward, -sum);
        assert_eq!(e.frame_state().total_power, sum);
    }

    #[test]
    fn rejects_malformed_actions() {
        let mut e = env(3, 2);
        assert!(matches!(e.step(&[1, 2]), Err(Error::Contract(_))));
        assert!(matches!(e.step(&[1, 2, 201]), Err(Error::Contract(_))));
        assert!(matches!(e.step(&[0, 2, 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn features_are_bounded() {
        let mut e = env(5, 4);
        e.step(&[1; 5]).unwrap();
        for x in e.features() {
            assert!(x.abs() <= FEATURE_CLAMP && x.is_finite());
        }
    }
}
