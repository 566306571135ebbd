//! Experiment orchestration: configuration, runs, metrics, oracle validation
//! and timing.

pub mod config;
pub mod events;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::{PolicyKind, RunConfig};
pub use events::{Event, FaultRecord, FrameRecord, RunPhase};
pub use metrics::{compute_metrics, power_cdf, PhaseSummary, Summary};
pub use runner::{run_testing, run_training, RunOutcome, StepTime};
pub mod validate;
pub mod timing;
