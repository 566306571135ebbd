//! Summaries recomputed from the raw event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::PolicyKind;
use super::events::{Event, FrameRecord, RunPhase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub frames: usize,
    pub episodes: usize,
    /// Fraction of episodes in which some node broke its power cap.
    pub episode_violation_rate: f64,
    /// Mean over episodes and nodes of the per-node violation indicator.
    pub node_violation_rate: f64,
    /// Fraction of episodes with the load bound broken.
    pub scheduling_violation_rate: f64,
    /// Node-frames over the power cap.
    pub power_violations: usize,
    /// Frames over the load bound.
    pub scheduling_violations: usize,
    pub violating_frames: usize,
    pub outage_frames: usize,
    pub violating_frames_outside_outage: usize,
    pub interventions: usize,
    pub safety_faults: usize,
    /// Episode reward is the sum of its frame rewards.
    pub mean_episode_reward: f64,
    pub episode_reward_p5: f64,
    pub episode_reward_p50: f64,
    pub episode_reward_p95: f64,
    pub mean_total_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: Option<PolicyKind>,
    pub seed: Option<u64>,
    pub phases: BTreeMap<RunPhase, PhaseSummary>,
    /// Mean wall time per frame, from the timing sidecar when available.
    pub mean_step_ms: Option<f64>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

struct Episode {
    reward: f64,
    node_violated: Vec<bool>,
    sched_violated: bool,
}

fn summarize(frames: &[&FrameRecord], faults: usize) -> PhaseSummary {
    let mut episodes: BTreeMap<u64, Episode> = BTreeMap::new();
    let mut s = PhaseSummary {
        frames: frames.len(),
        episodes: 0,
        episode_violation_rate: 0.0,
        node_violation_rate: 0.0,
        scheduling_violation_rate: 0.0,
        power_violations: 0,
        scheduling_violations: 0,
        violating_frames: 0,
        outage_frames: 0,
        violating_frames_outside_outage: 0,
        interventions: 0,
        safety_faults: faults,
        mean_episode_reward: 0.0,
        episode_reward_p5: 0.0,
        episode_reward_p50: 0.0,
        episode_reward_p95: 0.0,
        mean_total_power_w: 0.0,
    };
    for f in frames {
        let e = episodes.entry(f.episode).or_insert_with(|| Episode {
            reward: 0.0,
            node_violated: vec![false; f.power_ok.len()],
            sched_violated: false,
        });
        e.reward += f.reward;
        for (v, &ok) in e.node_violated.iter_mut().zip(&f.power_ok) {
            *v |= !ok;
        }
        e.sched_violated |= !f.sched_ok;
        s.power_violations += f.power_violations();
        s.scheduling_violations += usize::from(!f.sched_ok);
        s.violating_frames += usize::from(f.violated());
        s.outage_frames += usize::from(f.outage);
        s.violating_frames_outside_outage += usize::from(f.violated() && !f.outage);
        s.interventions += usize::from(f.intervened);
        s.mean_total_power_w += f.total_power_w();
    }
    if frames.is_empty() {
        return s;
    }
    s.mean_total_power_w /= frames.len() as f64;
    let n = episodes.len() as f64;
    s.episodes = episodes.len();
    let mut node_slots = 0usize;
    let mut node_hits = 0usize;
    let mut rewards = Vec::with_capacity(episodes.len());
    for e in episodes.values() {
        if e.node_violated.iter().any(|&v| v) {
            s.episode_violation_rate += 1.0;
        }
        if e.sched_violated {
            s.scheduling_violation_rate += 1.0;
        }
        node_slots += e.node_violated.len();
        node_hits += e.node_violated.iter().filter(|&&v| v).count();
        rewards.push(e.reward);
    }
    s.episode_violation_rate /= n;
    s.scheduling_violation_rate /= n;
    s.node_violation_rate = node_hits as f64 / node_slots.max(1) as f64;
    s.mean_episode_reward = rewards.iter().sum::<f64>() / n;
    rewards.sort_by(f64::total_cmp);
    s.episode_reward_p5 = percentile(&rewards, 0.05);
    s.episode_reward_p50 = percentile(&rewards, 0.5);
    s.episode_reward_p95 = percentile(&rewards, 0.95);
    s
}

/// Per-phase summary of an event log.
pub fn compute_metrics(events: &[Event]) -> Result<Summary> {
    let frames: Vec<&FrameRecord> = events.iter().filter_map(Event::as_frame).collect();
    if frames.is_empty() {
        return Err(Error::Contract("event log holds no frames".into()));
    }
    let mut phases = BTreeMap::new();
    for phase in [RunPhase::Warmup, RunPhase::Train, RunPhase::Test] {
        let subset: Vec<&FrameRecord> = frames.iter().copied().filter(|f| f.phase == phase).collect();
        if subset.is_empty() {
            continue;
        }
        let faults = events
            .iter()
            .filter(|e| matches!(e, Event::SafetyFault(f) if f.phase == phase))
            .count();
        phases.insert(phase, summarize(&subset, faults));
    }
    let first = frames[0];
    let uniform = frames.iter().all(|f| f.policy == first.policy && f.seed == first.seed);
    Ok(Summary {
        policy: uniform.then_some(first.policy),
        seed: uniform.then_some(first.seed),
        phases,
        mean_step_ms: None,
    })
}

/// Empirical CDF of the per-frame total power: sorted `(power, F(power))`.
pub fn power_cdf<'a>(frames: impl IntoIterator<Item = &'a FrameRecord>) -> Vec<(f64, f64)> {
    let mut powers: Vec<f64> = frames.into_iter().map(FrameRecord::total_power_w).collect();
    powers.sort_by(f64::total_cmp);
    let n = powers.len() as f64;
    powers
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, (i + 1) as f64 / n))
        .collect()
}
