// Drives the environment with the minimum-power blocklength of every node.

use safe_wncs::channel::ChannelParams;
use safe_wncs::env::{Env, Phase, RewardShaping};
use safe_wncs::safety::min_power_blocklength;
use safe_wncs::NetworkParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = NetworkParams {
        nodes: 5,
        ..NetworkParams::default()
    };
    let mut env = Env::new(&params, &ChannelParams::default(), 1, Phase::Train, RewardShaping::default())?;
    println!("observation size {}", env.features().len() / env.nodes());
    for frame in 0..10 {
        let action = env
            .c1()
            .iter()
            .map(|&c| min_power_blocklength(&params, c))
            .collect::<Result<Vec<_>, _>>()?;
        let step = env.step(&action)?;
        println!(
            "frame {frame}: action {:?} power {:.4e} W load {:.3} feasible {}",
            action, -step.reward, step.report.load, step.report.overall
        );
    }
    Ok(())
}
