use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use safe_wncs::agent::AgentPool;
use safe_wncs::harness::events::read_events;
use safe_wncs::harness::output::{self, read_step_times, write_run, CHECKPOINT_DIR};
use safe_wncs::harness::timing::{linear_fit, time_steps, timing_csv};
use safe_wncs::harness::validate::{validate, Sabotage, ValidateSizes};
use safe_wncs::harness::{compute_metrics, power_cdf, run_testing, run_training, PolicyKind, RunConfig};
use safe_wncs::{ConfigError, Error, Result};

#[derive(Parser)]
#[command(name = "safe-wncs", version, about = "Safe multi-agent blocklength allocation for wireless control loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set network.nodes=10`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: &[String]) -> Result<RunConfig> {
        let mut all = self.overrides.clone();
        all.extend_from_slice(extra);
        RunConfig::load(self.config.as_deref(), &all)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    policy: String,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        if PolicyKind::parse(&self.policy).is_none() {
            return Err(ConfigError::invalid("run.policy", format!("unknown policy `{}`", self.policy)).into());
        }
        self.config.load(&[
            format!("run.seed={}", self.seed),
            format!("run.policy=\"{}\"", self.policy),
        ])
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SabotageArg {
    None,
    FloorOffByOne,
    FrozenK,
}

#[derive(Subcommand)]
enum Command {
    /// Warm-up and training; writes the event log, derived CSVs and checkpoints.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Run this many consecutive seeds, one sub-directory each.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Greedy evaluation of a trained checkpoint.
    Test {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint directory written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Runs every oracle; exit status 3 if any fails.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inject a known defect to confirm the oracles catch it.
        #[arg(long, value_enum, default_value = "none")]
        sabotage: SabotageArg,
    },
    /// Mean time per frame for several node counts.
    Timing {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        nodes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "teacher_student,random")]
        policies: Vec<String>,
        #[arg(long, default_value_t = 10)]
        frames: u64,
        /// Interleaved passes over all sizes; frames per size is `frames * repeats`.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recomputes summaries from event logs.
    Metrics {
        /// Event logs (`events.jsonl`).
        #[arg(long, required = true)]
        events: Vec<PathBuf>,
        /// Combined power CDF of all logs, one series per policy.
        #[arg(long)]
        cdf_out: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_summary(dir: &Path, summary: &safe_wncs::harness::Summary) {
    println!("{}", dir.display());
    for (phase, s) in &summary.phases {
        println!(
            "  {:<6} frames {:>6}  mean reward {:.4e}  power violations {}  scheduling violations {}  outage frames {}  interventions {}",
            phase.name(),
            s.frames,
            s.mean_episode_reward,
            s.power_violations,
            s.scheduling_violations,
            s.outage_frames,
            s.interventions
        );
    }
}

fn train(config: &RunConfig, dir: &Path) -> Result<()> {
    let out = run_training(config)?;
    let summary = write_run(dir, config, &out.events, &out.step_times)?;
    if let Some(agents) = &out.agents {
        agents.save(&dir.join(CHECKPOINT_DIR))?;
    }
    print_summary(dir, &summary);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { run, seeds } => {
            let config = run.load()?;
            match seeds {
                None => train(&config, &run.out_dir),
                Some(n) => {
                    for s in config.run.seed..config.run.seed + n {
                        let mut c = config.clone();
                        c.run.seed = s;
                        train(&c, &run.out_dir.join(format!("seed{s}")))?;
                    }
                    Ok(())
                }
            }
        }
        Command::Test { run, checkpoint } => {
            let config = run.load()?;
            let agents = match (config.run.policy.head(), checkpoint) {
                (None, _) => None,
                (Some(head), Some(dir)) => Some(
                    AgentPool::load(&dir, config.network.nodes, config.network.max_blocklength, head)
                        .map_err(|e| match e {
                            Error::Contract(msg) => ConfigError::invalid("checkpoint", msg).into(),
                            other => other,
                        })?,
                ),
                (Some(_), None) => {
                    return Err(ConfigError::invalid("checkpoint", "required for learning policies").into())
                }
            };
            let out = run_testing(&config, agents)?;
            let summary = write_run(&run.out_dir, &config, &out.events, &out.step_times)?;
            print_summary(&run.out_dir, &summary);
            Ok(())
        }
        Command::Validate { config, seed, sabotage } => {
            let c = config.load(&[])?;
            let sabotage = match sabotage {
                SabotageArg::None => Sabotage::None,
                SabotageArg::FloorOffByOne => Sabotage::FloorOffByOne,
                SabotageArg::FrozenK => Sabotage::FrozenK,
            };
            let checks = validate(&c.network, &c.channel, ValidateSizes::default(), seed, sabotage)?;
            for check in &checks {
                println!("{check}");
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::OracleFailure(failed.join(", ")))
            }
        }
        Command::Timing { config, nodes, policies, frames, repeats, out } => {
            let c = config.load(&[])?;
            let policies = policies
                .iter()
                .map(|p| {
                    PolicyKind::parse(p)
                        .ok_or_else(|| ConfigError::invalid("policies", format!("unknown policy `{p}`")))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let rows = time_steps(&c, &nodes, &policies, frames, repeats)?;
            let csv = timing_csv(&rows);
            print!("{csv}");
            for p in &policies {
                let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .filter(|r| r.policy == *p)
                    .map(|r| (r.nodes as f64, r.mean_ms))
                    .unzip();
                let (a, b, r2) = linear_fit(&xs, &ys);
                println!("# {p}: {a:.3} + {b:.4} ms/node, R^2 = {r2:.4}");
            }
            if let Some(path) = out {
                write(&path, &csv)?;
            }
            Ok(())
        }
        Command::Metrics { events, cdf_out } => {
            let mut cdf = String::from("policy,total_power_w,cumulative_prob\n");
            for path in &events {
                let log = read_events(path)?;
                let mut summary = compute_metrics(&log)?;
                let times = path.with_file_name(output::STEP_TIMES_FILE);
                if times.exists() {
                    summary.mean_step_ms = output::mean_step_ms(&read_step_times(&times)?);
                }
                output::write_summary(&path.with_file_name(output::SUMMARY_FILE), &summary)?;
                print_summary(path, &summary);
                let policy = summary.policy.map_or("mixed", PolicyKind::name);
                for (p, c) in power_cdf(log.iter().filter_map(|e| e.as_frame())) {
                    cdf.push_str(&format!("{policy},{p},{c}\n"));
                }
            }
            if let Some(path) = cdf_out {
                write(&path, &cdf)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
