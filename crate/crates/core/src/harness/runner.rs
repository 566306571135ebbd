//! Training and testing loops.
//!
//! Training runs `warmup_frames` frames of uniform proposals (no updates),
//! then `episodes x steps_per_episode` frames of epsilon-greedy proposals with
//! one update of every node per frame. Acting networks are synced from the
//! train networks at the end of each episode. Testing is greedy, never
//! updates, and uses a separate fading realisation.

use std::time::Instant;

use rand::SeedableRng;

use super::config::{PolicyKind, RunConfig};
use super::events::{json_safe, Event, FaultRecord, FrameRecord, RunPhase};
use crate::agent::{policy, AgentPool, Experience, ReplayBuffer};
use crate::env::{Env, Phase, RewardShaping};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream, StreamRng};
use crate::safety::{self, SafetyFault};

#[derive(Debug, Clone, PartialEq)]
pub struct StepTime {
    pub phase: RunPhase,
    pub frame: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub events: Vec<Event>,
    pub step_times: Vec<StepTime>,
    /// Trained (or loaded) networks of learning policies.
    pub agents: Option<AgentPool>,
}

impl RunOutcome {
    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.events.iter().filter_map(Event::as_frame)
    }
}

struct Decision {
    proposal: Vec<u32>,
    action: Vec<u32>,
    attempts: u32,
    faults: Vec<SafetyFault>,
}

struct Session<'a> {
    config: &'a RunConfig,
    policy: PolicyKind,
    env: Env,
    agents: Option<AgentPool>,
    buffer: Option<ReplayBuffer>,
    explore: StreamRng,
    replay: StreamRng,
    baseline: StreamRng,
    events: Vec<Event>,
    step_times: Vec<StepTime>,
    updates: u64,
}

impl<'a> Session<'a> {
    fn new(config: &'a RunConfig, phase: Phase, agents: Option<AgentPool>) -> Result<Self> {
        let policy = config.run.policy;
        let seed = config.run.seed;
        let shaping = RewardShaping {
            mode: policy.reward_mode(),
            penalty_weight: config.run.penalty_weight,
        };
        let env = Env::new(&config.network, &config.channel, seed, phase, shaping)?;
        let baseline = match phase {
            Phase::Train => Stream::Baseline,
            Phase::Test => Stream::TestBaseline,
        };
        Ok(Session {
            config,
            policy,
            env,
            agents,
            buffer: None,
            explore: stream_rng(seed, Stream::Exploration),
            replay: stream_rng(seed, Stream::Replay),
            baseline: stream_rng(seed, baseline),
            events: Vec::new(),
            step_times: Vec::new(),
            updates: 0,
        })
    }

    fn propose(&mut self, phase: RunPhase, epsilon: f64) -> Result<Vec<u32>> {
        let params = self.env.params();
        match (&self.agents, phase) {
            (Some(agents), RunPhase::Train | RunPhase::Test) => {
                let q = agents.local_q(&self.env.observations())?;
                Ok(q.iter()
                    .map(|qi| policy::select_action(qi, epsilon, &mut self.explore))
                    .collect())
            }
            _ => Ok(policy::random_select(params.nodes, params.max_blocklength, &mut self.baseline)),
        }
    }

    fn decide(&mut self, phase: RunPhase, epsilon: f64) -> Result<Decision> {
        let proposal = self.propose(phase, epsilon)?;
        let params = self.env.params();
        let c1 = self.env.c1();
        Ok(match self.policy {
            PolicyKind::TeacherStudent => {
                let (advised, faults) =
                    safety::advise_or_fallback(params, &proposal, c1, self.config.safety.k_policy)?;
                Decision {
                    action: advised.action,
                    proposal,
                    attempts: 0,
                    faults,
                }
            }
            PolicyKind::RuleBased => {
                let out = policy::rule_based_select(
                    params,
                    proposal.clone(),
                    c1,
                    self.config.agent.rule_based_max_attempts,
                    &mut self.baseline,
                )?;
                Decision {
                    proposal,
                    action: out.action,
                    attempts: out.attempts as u32,
                    faults: out.faults,
                }
            }
            PolicyKind::D3qn | PolicyKind::Ddqn | PolicyKind::Random => Decision {
                action: proposal.clone(),
                proposal,
                attempts: 0,
                faults: Vec::new(),
            },
        })
    }

    /// Runs one frame and records it. `learn` pushes the transition and, when
    /// `update` is set, trains every node.
    fn frame(
        &mut self,
        phase: RunPhase,
        frame: u64,
        epsilon: f64,
        learn: bool,
        update: bool,
    ) -> Result<()> {
        let start = Instant::now();
        let steps = self.config.run.steps_per_episode;
        let c1 = self.env.c1().to_vec();
        let state = self.env.frame_state().clone();
        let d = self.decide(phase, epsilon)?;
        let result = self.env.step(&d.action)?;
        let report = &result.report;
        let outage = !report.overall && !safety::any_feasible_action(self.env.params(), &c1)?;

        let mut loss = None;
        if learn {
            let buffer = self
                .buffer
                .get_or_insert_with(|| self.config.agent.new_buffer());
            buffer.push(Experience {
                state,
                actions: d.action.clone(),
                reward: result.learning_reward,
                next_state: self.env.frame_state().clone(),
            });
            if let (true, Some(agents)) = (update, self.agents.as_mut()) {
                if buffer.len() >= self.config.agent.batch_size {
                    let stats = agents.train_step(buffer, &self.config.agent, self.updates, &mut self.replay)?;
                    self.updates += 1;
                    loss = Some(stats.iter().map(|s| s.loss).sum::<f64>() / stats.len() as f64);
                }
            }
        }
        if (frame + 1).is_multiple_of(steps) {
            if let Some(agents) = self.agents.as_mut() {
                agents.sync_local();
            }
        }

        for f in d.faults {
            self.events.push(Event::SafetyFault(FaultRecord {
                phase,
                frame,
                node: f.node,
                reason: f.reason,
            }));
        }
        self.events.push(Event::Frame(FrameRecord {
            policy: self.policy,
            seed: self.config.run.seed,
            phase,
            frame,
            episode: frame / steps,
            step: frame % steps,
            epsilon,
            intervened: d.action != d.proposal,
            proposal: d.proposal,
            action: d.action,
            attempts: d.attempts,
            reward: result.reward,
            learning_reward: result.learning_reward,
            power_ok: report.power_ok.clone(),
            power_margin_w: report.power_margin_w.iter().map(|&m| json_safe(m)).collect(),
            sched_ok: report.sched_ok,
            load: json_safe(report.load),
            load_margin: json_safe(report.load_margin),
            outage,
            loss,
        }));
        self.step_times.push(StepTime {
            phase,
            frame,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    fn finish(self) -> Result<RunOutcome> {
        if let Some(agents) = &self.agents {
            if !agents.is_finite() {
                return Err(Error::Contract("network parameters became non-finite".into()));
            }
        }
        Ok(RunOutcome {
            events: self.events,
            step_times: self.step_times,
            agents: self.agents,
        })
    }
}

fn fresh_agents(config: &RunConfig) -> Option<AgentPool> {
    let seed = config.run.seed;
    config.run.policy.head().map(|head| {
        AgentPool::new(
            config.network.nodes,
            config.network.max_blocklength,
            head,
            &config.agent,
            |i| StreamRng::seed_from_u64(crate::rng::stream_seed(seed, Stream::NetworkInit(i))),
        )
    })
}

/// Warm-up plus training frames of the configured policy.
pub fn run_training(config: &RunConfig) -> Result<RunOutcome> {
    let mut s = Session::new(config, Phase::Train, fresh_agents(config))?;
    let learns = s.agents.is_some();
    for frame in 0..config.run.warmup_frames {
        s.frame(RunPhase::Warmup, frame, 1.0, learns, false)?;
    }
    let frames = config.run.episodes * config.run.steps_per_episode;
    for frame in 0..frames {
        let eps = config.agent.epsilon_at(frame);
        s.frame(RunPhase::Train, frame, eps, learns, true)?;
    }
    s.finish()
}

/// Greedy evaluation of `agents` (ignored for the random policy) over
/// `test_episodes`.
pub fn run_testing(config: &RunConfig, agents: Option<AgentPool>) -> Result<RunOutcome> {
    let agents = match (config.run.policy.head(), agents) {
        (None, _) => None,
        (Some(_), Some(a)) => {
            if a.len() != config.network.nodes {
                return Err(Error::Contract(format!(
                    "checkpoint has {} nodes, config {}",
                    a.len(),
                    config.network.nodes
                )));
            }
            Some(a)
        }
        (Some(_), None) => {
            return Err(Error::Contract(format!(
                "policy {} needs trained networks",
                config.run.policy
            )))
        }
    };
    let mut s = Session::new(config, Phase::Test, agents)?;
    let frames = config.run.test_episodes * config.run.steps_per_episode;
    for frame in 0..frames {
        s.frame(RunPhase::Test, frame, 0.0, false, false)?;
    }
    s.finish()
}
