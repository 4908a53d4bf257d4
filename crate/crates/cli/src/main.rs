use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dog_barometer::approx::checkpoint;
use dog_barometer::dynamics::EnvParams;
use dog_barometer::harness::report::{enumeration_csv, eval_text, resolve_policy, solve, solve_csv, solve_text};
use dog_barometer::harness::{reproduce, run_experiment, train_agent, AgentKind, ExperimentConfig, Preset, ReproduceOptions};
use dog_barometer::oracle::{evaluate_exact, evaluate_mc};
use dog_barometer::strategies::classify;

#[derive(Parser)]
#[command(name = "dogbaro", version, about = "Dog-barometer reinforcement learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EnvArgs {
    /// `exp1` (the default), `exp2` or `custom`.
    #[arg(long)]
    preset: Option<Preset>,
    /// Pressure is not observed (the default).
    #[arg(long, conflicts_with = "visible")]
    hidden: bool,
    /// Pressure is part of the observation.
    #[arg(long)]
    visible: bool,
}

impl EnvArgs {
    fn params(&self) -> EnvParams {
        self.preset.unwrap_or(Preset::Exp1).params().with_visibility(self.visible)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Value iteration on the full state.
    Solve {
        #[command(flatten)]
        env: EnvArgs,
        /// Write the value table as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact (and optionally Monte-Carlo) return of a policy.
    Evaluate {
        /// Strategy label, compact action string, policy file or network checkpoint.
        policy: String,
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        discounted: bool,
        /// Also estimate by simulating this many episodes.
        #[arg(long)]
        eval_episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rank every deterministic policy.
    Enumerate {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        discounted: bool,
        /// Write the full ranking as CSV to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one agent and report its policy.
    Train {
        #[command(flatten)]
        env: EnvArgs,
        /// Defaults to the config's agent, or `dqn`.
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment config whose agent settings to use.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the training episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        /// Directory for `policy.txt` and, for network agents, `network.ckpt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate several seeds, then write the tables.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, conflicts_with = "visible")]
        hidden: bool,
        #[arg(long)]
        visible: bool,
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        eval_episodes: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the four published cells of an experiment.
    Reproduce {
        experiment: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 10_000)]
        eval_episodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { env, out } => {
            let params = env.params();
            let sol = solve(&params)?;
            print!("{}", solve_text(&params, &sol));
            if let Some(path) = out {
                write_or_print(Some(&path), &solve_csv(&sol))?;
            }
        }
        Command::Evaluate { policy, env, discounted, eval_episodes, seed } => {
            let params = env.params();
            let table = resolve_policy(&policy, &params)?;
            let report = evaluate_exact(&table, &params, discounted)?;
            print!("{}", eval_text(&table, &params, &report));
            if let Some(n) = eval_episodes {
                let mc = evaluate_mc(&table, &params, n, seed)?;
                let exact = evaluate_exact(&table, &params, false)?.expected_return;
                println!(
                    "monte carlo {:.4} +/- {:.4} over {} episodes ({})",
                    mc.mean,
                    mc.std_error,
                    mc.episodes,
                    if mc.agrees_with(exact) { "agrees within 3 SE" } else { "DISAGREES beyond 3 SE" }
                );
            }
        }
        Command::Enumerate { env, discounted, out } => {
            write_or_print(out.as_deref(), &enumeration_csv(&env.params(), discounted)?)?;
        }
        Command::Train { env, agent, seed, config, episodes, out } => {
            let mut cfg = match config {
                Some(path) => {
                    let mut cfg = load_config(&path)?;
                    if let Some(a) = agent.filter(|a| *a != cfg.agent) {
                        cfg.agent = a;
                        cfg.agent_config = a.default_config();
                    }
                    if let Some(p) = env.preset {
                        cfg.env = EnvParams { pressure_visible: cfg.env.pressure_visible, ..p.params() };
                        cfg.preset = p;
                    }
                    if env.visible || env.hidden {
                        cfg.env.pressure_visible = env.visible;
                    }
                    cfg
                }
                None => ExperimentConfig::new(env.preset.unwrap_or(Preset::Exp1), env.visible, agent.unwrap_or(AgentKind::Dqn)),
            };
            if let Some(n) = episodes {
                cfg.agent_config.set_episodes(n);
            }
            cfg.validate()?;
            let trained = train_agent(&cfg, seed)?;
            let policy = trained.greedy.greedify();
            let label = classify(&policy, &cfg.env)?.label;
            let exact = evaluate_exact(&policy, &cfg.env, false)?.expected_return;
            println!(
                "{} seed {seed}: policy {} ({label}), exact return {exact:.4}, {} episodes",
                cfg.agent,
                policy.compact().unwrap_or_default(),
                trained.episodes
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("policy.txt"), policy.to_text())?;
                if let Some(net) = &trained.network {
                    std::fs::write(dir.join("network.ckpt"), checkpoint::encode(net))?;
                }
                if let Some(stochastic) = &trained.stochastic {
                    std::fs::write(dir.join("policy_stochastic.txt"), stochastic.to_text())?;
                }
                println!("wrote {}", dir.display());
            }
        }
        Command::Experiment { config, preset, hidden, visible, agent, seed, runs, eval_episodes, episodes, out } => {
            let mut cfg = match (&config, agent) {
                (Some(path), _) => load_config(path)?,
                (None, Some(agent)) => ExperimentConfig::new(preset.unwrap_or(Preset::Exp1), visible, agent),
                (None, None) => bail!("either --config or --agent is required"),
            };
            if let Some(p) = preset {
                if config.is_some() {
                    cfg.env = EnvParams { pressure_visible: cfg.env.pressure_visible, ..p.params() };
                    cfg.preset = p;
                }
            }
            if let Some(a) = agent {
                if a != cfg.agent {
                    cfg.agent = a;
                    cfg.agent_config = a.default_config();
                }
            }
            if visible || hidden {
                cfg.env.pressure_visible = visible;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(n) = runs {
                cfg.n_runs = n;
            }
            if let Some(n) = eval_episodes {
                cfg.eval_episodes = n;
            }
            if let Some(n) = episodes {
                cfg.agent_config.set_episodes(n);
            }
            if out.is_some() {
                cfg.output = out;
            }
            let summary = run_experiment(&cfg)?;
            for r in &summary.runs {
                println!(
                    "run {:>2} seed {:>4}: {:<6} {:<8} exact {:>7.4}  mc {:>7.4} +/- {:.4}",
                    r.run, r.seed, r.label.as_str(), r.policy, r.exact_return, r.mc.mean, r.mc.std_error
                );
            }
            println!(
                "{} {} {}: mean reward {:.4} over {} runs",
                summary.preset,
                summary.agent,
                summary.mode(),
                summary.mean_reward,
                summary.n_runs
            );
            let counts: Vec<String> =
                summary.counts.iter().filter(|(_, n)| **n > 0).map(|(l, n)| format!("{l} {n}")).collect();
            println!("strategies: {}", counts.join(", "));
            if let Some(dir) = &cfg.output {
                println!("wrote {}", dir.display());
            }
        }
        Command::Reproduce { experiment, seed, runs, eval_episodes, out } => {
            let opts = ReproduceOptions { base_seed: seed, n_runs: runs, eval_episodes, output: out.clone() };
            let rep = reproduce(experiment, &opts)?;
            print!("{}", rep.render());
            if let Some(dir) = out {
                println!("wrote {}", dir.join(experiment.as_str()).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
