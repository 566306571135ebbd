//! Short training run of the safe learner followed by a greedy test phase.
//! Extra `section.key=value` arguments override the configuration.

use safe_wncs::harness::{compute_metrics, run_testing, run_training, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut overrides = vec![
        "network.nodes=4".to_string(),
        "run.episodes=200".to_string(),
        "run.test_episodes=100".to_string(),
        "run.warmup_frames=100".to_string(),
    ];
    overrides.extend(std::env::args().skip(1));
    let config = RunConfig::load(None, &overrides)?;

    let train = run_training(&config)?;
    let test = run_testing(&config, train.agents)?;
    for (label, events) in [("train", &train.events), ("test", &test.events)] {
        let summary = compute_metrics(events)?;
        for (phase, s) in &summary.phases {
            println!(
                "{label}/{}: {} frames, mean reward {:.4e} W, {} violating frames, {} interventions",
                phase.name(),
                s.frames,
                s.mean_episode_reward,
                s.violating_frames,
                s.interventions
            );
        }
    }
    Ok(())
}
