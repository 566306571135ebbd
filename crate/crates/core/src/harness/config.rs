//! Run configuration: TOML with one table per concern.
//!
//! ```toml
//! [network]      # nodes, max_blocklength, ..., noise_psd_dbm_hz
//! [channel]      # correlation, cell_radius_m, ...
//! [agent]        # network shape, schedules, replay
//! [run]          # policy, seed, episode counts
//! [optimality]   # cap_rule, k_rounding
//! [safety]       # k_policy
//! ```
//!
//! Omitted keys take their defaults, unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::channel::ChannelParams;
use crate::env::RewardMode;
use crate::error::{ConfigError, Error, Result};
use crate::nn::Head;
use crate::optimality::KStarRule;
use crate::params::NetworkParams;
use crate::safety::KPolicy;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Dueling network whose proposals are projected by the safety layer.
    #[default]
    TeacherStudent,
    /// Dueling network whose infeasible proposals are replaced by uniform
    /// redraws.
    RuleBased,
    /// Unconstrained dueling double Q-learning with penalty rewards.
    D3qn,
    /// Unconstrained double Q-learning (plain head) with penalty rewards.
    Ddqn,
    /// Uniform blocklengths.
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::TeacherStudent,
        PolicyKind::RuleBased,
        PolicyKind::D3qn,
        PolicyKind::Ddqn,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::TeacherStudent => "teacher_student",
            PolicyKind::RuleBased => "rule_based",
            PolicyKind::D3qn => "d3qn",
            PolicyKind::Ddqn => "ddqn",
            PolicyKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Network head, `None` when the policy does not learn.
    pub fn head(self) -> Option<Head> {
        match self {
            PolicyKind::TeacherStudent | PolicyKind::RuleBased | PolicyKind::D3qn => {
                Some(Head::Dueling)
            }
            PolicyKind::Ddqn => Some(Head::Plain),
            PolicyKind::Random => None,
        }
    }

    pub fn reward_mode(self) -> RewardMode {
        match self {
            PolicyKind::D3qn | PolicyKind::Ddqn => RewardMode::Penalty,
            _ => RewardMode::Safe,
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
    pub seed: u64,
    /// Training episodes after the warm-up.
    pub episodes: u64,
    pub test_episodes: u64,
    pub steps_per_episode: u64,
    /// Frames of uniform proposals collected before any update.
    pub warmup_frames: u64,
    /// Seeds of a sweep: `seed, seed + 1, ...`.
    pub seeds: u64,
    /// Reward subtracted per violated constraint for the penalty-trained
    /// policies.
    pub penalty_weight: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            policy: PolicyKind::TeacherStudent,
            seed: 0,
            episodes: 2500,
            test_episodes: 2500,
            steps_per_episode: 1,
            warmup_frames: 500,
            seeds: 10,
            penalty_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetySection {
    pub k_policy: KPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkParams,
    pub channel: ChannelParams,
    pub agent: AgentConfig,
    pub run: RunSection,
    pub optimality: KStarRule,
    pub safety: SafetySection,
}

impl RunConfig {
    /// Validates every section and propagates `[optimality]` into the network
    /// parameters.
    pub fn finalize(mut self) -> Result<Self, ConfigError> {
        self.network.k_rule = self.optimality;
        self.network.validate("network")?;
        self.channel.validate("channel")?;
        self.agent.validate("agent")?;
        let r = &self.run;
        if r.steps_per_episode == 0 {
            return Err(ConfigError::invalid("run.steps_per_episode", "must be >= 1"));
        }
        if r.seeds == 0 {
            return Err(ConfigError::invalid("run.seeds", "must be >= 1"));
        }
        if !(r.penalty_weight >= 0.0 && r.penalty_weight.is_finite()) {
            return Err(ConfigError::invalid("run.penalty_weight", "must be >= 0"));
        }
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_table(parse_table(text)?)
    }

    fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.finalize()
    }

    /// Reads `path` (or starts from defaults when `None`) and applies
    /// `section.key=value` overrides before validation.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_table(&text)?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Ok(Self::from_table(table)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn total_train_frames(&self) -> u64 {
        self.run.warmup_frames + self.run.episodes * self.run.steps_per_episode
    }
}

fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Sets `section.key` in `table`. The value is read as a TOML literal, and as
/// a bare string when that fails (`run.policy=random`).
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override `{assignment}` is not key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| ConfigError::Parse(format!("override key `{path}` is not section.key")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(ConfigError::Parse(format!("`{section}` is not a table"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_schema_is_the_default() {
        let c = RunConfig::from_toml_str(include_str!("../../config/default.toml")).unwrap();
        assert_eq!(c, RunConfig::default().finalize().unwrap());
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.network.nodes, 50);
        assert_eq!(c.network.paoi_threshold_s, 0.101);
        assert_eq!(c.network.delta, 0.99);
        assert_eq!(c.agent.batch_size, 64);
        assert_eq!(c.run.policy, PolicyKind::TeacherStudent);
    }

    #[test]
    fn range_errors_name_the_key() {
        let e = RunConfig::from_toml_str("[network]\nutilization_bound = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("network.utilization_bound"), "{e}");
        let e = RunConfig::from_toml_str("[network]\npaoi_threshold_s = 0.001\n").unwrap_err();
        assert!(e.to_string().contains("network.paoi_threshold_s"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[network]\nnodez = 3\n").is_err());
        assert!(RunConfig::from_toml_str("[nope]\n").is_err());
        assert!(RunConfig::from_toml_str("[network]\ncap_rule = \"direct\"\n").is_err());
    }

    #[test]
    fn optimality_section_reaches_network() {
        let c = RunConfig::from_toml_str("[optimality]\ncap_rule = \"direct\"\nk_rounding = \"floor\"\n")
            .unwrap();
        assert_eq!(c.network.k_rule, c.optimality);
        assert_eq!(c.network.k_rule.variant, crate::optimality::CapRule::Direct);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::load(
            None,
            &["run.policy=random".into(), "network.nodes = 7".into(), "agent.hidden_layers=[8, 8]".into()],
        )
        .unwrap();
        assert_eq!(c.run.policy, PolicyKind::Random);
        assert_eq!(c.network.nodes, 7);
        assert_eq!(c.agent.hidden_layers, vec![8, 8]);
        assert!(RunConfig::load(None, &["nodes=3".into()]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default().finalize().unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }
}
