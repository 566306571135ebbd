//! Transmit power and node power from the finite-blocklength formulas, for a
//! sweep of blocklengths at a fixed channel.

use safe_wncs::fbl::RadioMathInputs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>4} {:>14} {:>14} {:>10}", "m", "W_tx [W]", "W [W]", "delay [ms]");
    for m in [20u32, 40, 60, 80, 100, 150, 200] {
        let r = RadioMathInputs {
            blocklength: m,
            packet_error_prob: 1e-5,
            packet_bits: 20,
            c1: 1e-9,
            bandwidth_hz: 1e5,
            sampling_period_s: 0.02,
            circuit_power_w: 0.01,
        };
        println!(
            "{:>4} {:>14.6e} {:>14.6e} {:>10.3}",
            m,
            r.transmit_power()?,
            r.node_power()?,
            1e3 * r.packet_delay()?
        );
    }
    Ok(())
}
