//! Files written by a run directory.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::config::RunConfig;
use super::events::{write_events, Event, FrameRecord, RunPhase};
use super::metrics::{compute_metrics, power_cdf, Summary};
use super::runner::StepTime;
use crate::error::{Error, Result};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const STEP_TIMES_FILE: &str = "step_times.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn frames(events: &[Event]) -> impl Iterator<Item = &FrameRecord> {
    events.iter().filter_map(Event::as_frame)
}

pub fn rewards_csv(events: &[Event]) -> String {
    let mut s = String::from("phase,episode,step,reward,total_power_w,learning_reward\n");
    for f in frames(events) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            f.phase.name(),
            f.episode,
            f.step,
            f.reward,
            f.total_power_w(),
            f.learning_reward
        );
    }
    s
}

pub fn violations_csv(events: &[Event]) -> String {
    let mut s = String::from("phase,episode,step,power_violations,sched_ok,load_margin,outage,intervened\n");
    for f in frames(events) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            f.phase.name(),
            f.episode,
            f.step,
            f.power_violations(),
            f.sched_ok,
            f.load_margin,
            f.outage,
            f.intervened
        );
    }
    s
}

/// CDF of the test phase if present, else of the training frames.
pub fn power_cdf_csv(events: &[Event]) -> String {
    let phase = if frames(events).any(|f| f.phase == RunPhase::Test) {
        RunPhase::Test
    } else {
        RunPhase::Train
    };
    let mut s = String::from("policy,total_power_w,cumulative_prob\n");
    let selected: Vec<&FrameRecord> = frames(events).filter(|f| f.phase == phase).collect();
    let policy = selected.first().map_or("", |f| f.policy.name());
    for (p, c) in power_cdf(selected) {
        let _ = writeln!(s, "{policy},{p},{c}");
    }
    s
}

pub fn step_times_csv(times: &[StepTime]) -> String {
    let mut s = String::from("phase,frame,seconds\n");
    for t in times {
        let _ = writeln!(s, "{},{},{}", t.phase.name(), t.frame, t.seconds);
    }
    s
}

pub fn mean_step_ms(times: &[StepTime]) -> Option<f64> {
    (!times.is_empty()).then(|| 1e3 * times.iter().map(|t| t.seconds).sum::<f64>() / times.len() as f64)
}

/// Writes the event log, derived CSV files, the summary and the resolved
/// config. Wall times go to their own file so the event log stays
/// reproducible.
pub fn write_run(dir: &Path, config: &RunConfig, events: &[Event], times: &[StepTime]) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(EVENTS_FILE);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_events(events, std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
    write_file(&dir.join("rewards.csv"), rewards_csv(events).as_bytes())?;
    write_file(&dir.join("violations.csv"), violations_csv(events).as_bytes())?;
    write_file(&dir.join("power_cdf.csv"), power_cdf_csv(events).as_bytes())?;
    write_file(&dir.join(STEP_TIMES_FILE), step_times_csv(times).as_bytes())?;
    write_file(&dir.join("config.toml"), config.to_toml().as_bytes())?;
    let mut summary = compute_metrics(events)?;
    summary.mean_step_ms = mean_step_ms(times);
    write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, summary)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the wall-time sidecar back.
pub fn read_step_times(path: &Path) -> Result<Vec<StepTime>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: &str| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad row `{line}`")),
        )
    };
    let mut out = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let mut it = line.split(',');
        let phase = match it.next() {
            Some("warmup") => RunPhase::Warmup,
            Some("train") => RunPhase::Train,
            Some("test") => RunPhase::Test,
            _ => return Err(bad(line)),
        };
        let frame = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?;
        let seconds = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?;
        out.push(StepTime { phase, frame, seconds });
    }
    Ok(out)
}
