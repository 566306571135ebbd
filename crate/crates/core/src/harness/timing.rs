//! Wall-clock cost of one decision frame as the network grows.

use serde::Serialize;

use super::config::{PolicyKind, RunConfig};
use super::events::RunPhase;
use super::runner::run_training;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub policy: PolicyKind,
    pub nodes: usize,
    pub frames: u64,
    pub mean_ms: f64,
}

/// Mean time of `frames` training frames (action, teacher, environment and
/// update) for every policy and node count. Each run warms its buffer with
/// exactly one batch first; warm-up frames are not timed.
///
/// With `repeats > 1` the whole sweep is run that many times, round-robin over
/// the configurations, so slow drift of the host hits every size alike.
/// `frames` in the result is the total over repeats.
pub fn time_steps(
    base: &RunConfig,
    nodes: &[usize],
    policies: &[PolicyKind],
    frames: u64,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    let configs: Vec<(PolicyKind, usize)> = policies
        .iter()
        .flat_map(|&p| nodes.iter().map(move |&n| (p, n)))
        .collect();
    let mut totals = vec![(0.0f64, 0u64); configs.len()];
    for _ in 0..repeats.max(1) {
        for (slot, &(policy, n)) in totals.iter_mut().zip(&configs) {
            let mut c = base.clone();
            c.network.nodes = n;
            c.run.policy = policy;
            c.run.warmup_frames = c.agent.batch_size as u64;
            c.run.steps_per_episode = 1;
            c.run.episodes = frames;
            let c = c.finalize()?;
            let out = run_training(&c)?;
            for t in out.step_times.iter().filter(|t| t.phase == RunPhase::Train) {
                slot.0 += t.seconds;
                slot.1 += 1;
            }
        }
    }
    Ok(configs
        .iter()
        .zip(totals)
        .map(|(&(policy, nodes), (secs, count))| TimingRow {
            policy,
            nodes,
            frames: count,
            mean_ms: 1e3 * secs / count.max(1) as f64,
        })
        .collect())
}

/// Least-squares line `y = a + b x` and its coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - b * mx, b, r2)
}

/// `policy,nodes,frames,mean_ms` rows.
pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = String::from("policy,nodes,frames,mean_ms\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.policy, r.nodes, r.frames, r.mean_ms));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_r2() {
        let (a, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_lowers_r2() {
        let (_, _, r2) = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        assert!(r2 < 0.9);
    }
}
