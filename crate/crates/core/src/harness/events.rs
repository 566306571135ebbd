//! Raw per-frame event log, one JSON object per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PolicyKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunPhase {
    Warmup,
    Train,
    Test,
}

impl RunPhase {
    pub fn name(self) -> &'static str {
        match self {
            RunPhase::Warmup => "warmup",
            RunPhase::Train => "train",
            RunPhase::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub policy: PolicyKind,
    pub seed: u64,
    pub phase: RunPhase,
    /// Frame index within the phase.
    pub frame: u64,
    pub episode: u64,
    pub step: u64,
    pub epsilon: f64,
    pub proposal: Vec<u32>,
    pub action: Vec<u32>,
    pub intervened: bool,
    /// Feasibility checks spent by the rule-based redraw loop.
    pub attempts: u32,
    /// Negative total power, Watts.
    pub reward: f64,
    pub learning_reward: f64,
    pub power_ok: Vec<bool>,
    pub power_margin_w: Vec<f64>,
    pub sched_ok: bool,
    pub load: f64,
    pub load_margin: f64,
    /// No joint action was feasible on this frame's channel.
    pub outage: bool,
    /// Node-averaged TD loss of the update made after this frame.
    pub loss: Option<f64>,
}

impl FrameRecord {
    pub fn total_power_w(&self) -> f64 {
        -self.reward
    }

    pub fn power_violations(&self) -> usize {
        self.power_ok.iter().filter(|&&ok| !ok).count()
    }

    pub fn violated(&self) -> bool {
        !self.sched_ok || self.power_violations() > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub phase: RunPhase,
    pub frame: u64,
    pub node: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Frame(FrameRecord),
    SafetyFault(FaultRecord),
}

impl Event {
    pub fn as_frame(&self) -> Option<&FrameRecord> {
        match self {
            Event::Frame(f) => Some(f),
            Event::SafetyFault(_) => None,
        }
    }
}

/// Non-finite margins cannot be written as JSON numbers.
pub fn json_safe(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

pub fn write_events<W: Write>(events: &[Event], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)),
            )
        })?;
        events.push(event);
    }
    Ok(events)
}
