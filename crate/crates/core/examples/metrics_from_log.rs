//! Recomputes the summary and the power CDF from an `events.jsonl` file.
//!
//!     cargo run --example metrics_from_log -- out/events.jsonl

use std::path::PathBuf;

use safe_wncs::harness::events::read_events;
use safe_wncs::harness::{compute_metrics, power_cdf};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args().nth(1).ok_or("usage: metrics_from_log EVENTS.jsonl")?.into();
    let events = read_events(&path)?;
    let summary = compute_metrics(&events)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);

    let cdf = power_cdf(events.iter().filter_map(|e| e.as_frame()));
    for q in [0.05, 0.5, 0.95] {
        if let Some((w, _)) = cdf.iter().find(|(_, p)| *p >= q) {
            println!("P{:.0}: {w:.4e} W", 100.0 * q);
        }
    }
    Ok(())
}
