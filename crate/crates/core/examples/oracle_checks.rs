//! Runs the reduced oracle suite, optionally with a deliberate fault injected
//! (`floor-off-by-one` or `frozen-k`) to show that the checks catch it.

use safe_wncs::channel::ChannelParams;
use safe_wncs::harness::validate::{validate, Sabotage, ValidateSizes};
use safe_wncs::NetworkParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sabotage = match std::env::args().nth(1).as_deref() {
        None | Some("none") => Sabotage::None,
        Some("floor-off-by-one") => Sabotage::FloorOffByOne,
        Some("frozen-k") => Sabotage::FrozenK,
        Some(other) => return Err(format!("unknown sabotage {other}").into()),
    };
    let sizes = ValidateSizes {
        q_draws: 2000,
        k_instances: 300,
        fading_steps: 100_000,
        shadow_draws: 20_000,
        ..ValidateSizes::default()
    };
    let checks = validate(&NetworkParams::default(), &ChannelParams::default(), sizes, 7, sabotage)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(())
}
