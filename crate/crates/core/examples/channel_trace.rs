//! Samples a small network and prints the per-node gain and `C1` trace over a
//! few frames.

use safe_wncs::channel::{Channel, ChannelParams};
use safe_wncs::rng::Stream;
use safe_wncs::NetworkParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = NetworkParams {
        nodes: 4,
        ..NetworkParams::default()
    };
    let cp = ChannelParams::default();
    let mut ch = Channel::new(&cp, net.nodes, 42, Stream::Fading, net.bandwidth_hz, net.noise_psd_dbm_hz)?;
    for (i, p) in ch.profiles().iter().enumerate() {
        println!("node {i}: {p:?}");
    }
    for frame in 0..8 {
        let s = ch.snapshot()?;
        let gains: Vec<String> = s.gains.iter().map(|g| format!("{:.2}", 10.0 * g.log10())).collect();
        println!("frame {frame}: gain dB [{}]", gains.join(", "));
        ch.advance();
    }
    Ok(())
}
