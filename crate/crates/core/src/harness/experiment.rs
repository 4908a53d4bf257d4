use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentConfig, AgentKind, EvaluationMode, ExperimentConfig};
use crate::agents::{train_actor_critic, train_q_replay, train_sarsa};
use crate::approx::{train_a2c, train_dqn, Mlp};
use crate::error::{Error, Result};
use crate::oracle::{evaluate_exact, evaluate_mc, McEstimate};
use crate::policy::{mode_name, PolicyTable};
use crate::strategies::{classify, StrategyLabel};

/// What a training run hands to evaluation.
#[derive(Clone, Debug)]
pub struct TrainedAgent {
    pub greedy: PolicyTable,
    /// The learner's own softmax policy, for actor-critic methods.
    pub stochastic: Option<PolicyTable>,
    pub episodes: usize,
    /// Environment steps taken, when the learner reports them.
    pub env_steps: Option<usize>,
    pub network: Option<Mlp>,
}

pub fn train_agent(cfg: &ExperimentConfig, seed: u64) -> Result<TrainedAgent> {
    let params = &cfg.env;
    let budget = cfg.agent_config.episodes();
    match (&cfg.agent_config, cfg.agent) {
        (AgentConfig::Tabular(c), AgentKind::QReplay) => {
            let (_, greedy) = train_q_replay(params, c, seed)?;
            Ok(TrainedAgent { greedy, stochastic: None, episodes: budget, env_steps: None, network: None })
        }
        (AgentConfig::Tabular(c), AgentKind::Sarsa) => {
            let (_, greedy) = train_sarsa(params, c, seed)?;
            Ok(TrainedAgent { greedy, stochastic: None, episodes: budget, env_steps: None, network: None })
        }
        (AgentConfig::Tabular(c), AgentKind::ActorCritic) => {
            let (ac, greedy) = train_actor_critic(params, c, seed)?;
            Ok(TrainedAgent { greedy, stochastic: Some(ac.stochastic_policy()), episodes: budget, env_steps: None, network: None })
        }
        (AgentConfig::Dqn(c), AgentKind::Dqn) => {
            let out = train_dqn(params, c, seed)?;
            Ok(TrainedAgent {
                greedy: out.policy,
                stochastic: None,
                episodes: out.episodes,
                env_steps: Some(out.env_steps),
                network: Some(out.network),
            })
        }
        (AgentConfig::A2c(c), AgentKind::A2c) => {
            let out = train_a2c(params, c, seed)?;
            Ok(TrainedAgent {
                greedy: out.policy,
                stochastic: Some(out.stochastic),
                episodes: budget,
                env_steps: Some(out.env_steps),
                network: Some(out.network),
            })
        }
        _ => Err(Error::InvalidParams { name: "agent", reason: "agent config does not match the agent kind".into() }),
    }
}

/// Seed for the Monte-Carlo evaluation of the run trained with `seed`.
pub fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x5851_F42D_4C95_7F2D)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub label: StrategyLabel,
    /// Catalog entries consistent with the policy; more than one means the
    /// label is `other` because of ambiguity.
    pub agreeing: Vec<StrategyLabel>,
    /// Action letters of the greedy policy in observation order.
    pub policy: String,
    pub exact_return: f64,
    pub mc: McEstimate,
    pub train_episodes: usize,
    pub env_steps: Option<usize>,
    pub wall_time_s: f64,
}

/// Train, classify and evaluate a single run.
pub fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<RunResult> {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let started = Instant::now();
    let trained = train_agent(cfg, seed)?;
    let greedy = trained.greedy.greedify();
    let class = classify(&greedy, &cfg.env)?;
    let scored = match (cfg.evaluation, &trained.stochastic) {
        (EvaluationMode::Stochastic, Some(p)) => p,
        _ => &greedy,
    };
    let exact = evaluate_exact(scored, &cfg.env, false)?.expected_return;
    let mc = evaluate_mc(scored, &cfg.env, cfg.eval_episodes, eval_seed(seed))?;
    if !mc.agrees_with(exact) {
        return Err(Error::OracleDisagreement { run, seed, mc: mc.mean, exact, se: mc.std_error });
    }
    Ok(RunResult {
        run,
        seed,
        label: class.label,
        agreeing: class.agreeing,
        policy: greedy.compact().expect("greedified policy is deterministic"),
        exact_return: exact,
        mc,
        train_episodes: trained.episodes,
        env_steps: trained.env_steps,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub preset: String,
    pub agent: AgentKind,
    pub pressure_visible: bool,
    pub evaluation: EvaluationMode,
    pub n_runs: usize,
    /// Mean over runs of the Monte-Carlo evaluation mean.
    pub mean_reward: f64,
    pub mean_exact: f64,
    /// Count per label, every label present.
    pub counts: BTreeMap<StrategyLabel, usize>,
    pub runs: Vec<RunResult>,
}

impl SummaryTable {
    pub fn from_runs(cfg: &ExperimentConfig, runs: Vec<RunResult>) -> Self {
        let n = runs.len() as f64;
        let mut counts: BTreeMap<StrategyLabel, usize> = StrategyLabel::ALL.into_iter().map(|l| (l, 0)).collect();
        for r in &runs {
            *counts.get_mut(&r.label).expect("every label has a slot") += 1;
        }
        SummaryTable {
            preset: cfg.preset.to_string(),
            agent: cfg.agent,
            pressure_visible: cfg.env.pressure_visible,
            evaluation: cfg.evaluation,
            n_runs: runs.len(),
            mean_reward: runs.iter().map(|r| r.mc.mean).sum::<f64>() / n,
            mean_exact: runs.iter().map(|r| r.exact_return).sum::<f64>() / n,
            counts,
            runs,
        }
    }

    pub fn count(&self, label: StrategyLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    /// Counts merged by family (`nc`, `nw`, `nb`, `nwc`, `nbb`, `other`).
    pub fn family_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for (label, n) in &self.counts {
            *out.entry(label.family()).or_insert(0) += n;
        }
        out
    }

    pub fn mode(&self) -> &'static str {
        mode_name(self.pressure_visible)
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from(
            "run,seed,label,policy,exact_return,mc_mean,mc_std_error,eval_episodes,train_episodes,env_steps\n",
        );
        for r in &self.runs {
            let steps = r.env_steps.map(|n| n.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
                r.run, r.seed, r.label, r.policy, r.exact_return, r.mc.mean, r.mc.std_error, r.mc.episodes,
                r.train_episodes, steps
            )
            .unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("preset,agent,mode,evaluation,runs,mean_reward,mean_exact");
        for l in StrategyLabel::ALL {
            write!(s, ",{l}").unwrap();
        }
        s.push('\n');
        let evaluation = match self.evaluation {
            EvaluationMode::Greedy => "greedy",
            EvaluationMode::Stochastic => "stochastic",
        };
        write!(
            s,
            "{},{},{},{},{},{:.6},{:.6}",
            self.preset,
            self.agent,
            self.mode(),
            evaluation,
            self.n_runs,
            self.mean_reward,
            self.mean_exact
        )
        .unwrap();
        for l in StrategyLabel::ALL {
            write!(s, ",{}", self.count(l)).unwrap();
        }
        s.push('\n');
        s
    }

    /// `runs.csv`, `summary.csv` and `result.json` under `dir`. Only the JSON
    /// carries timing, so the CSVs are reproducible byte for byte.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path, wall_time_s: f64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        let doc = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "summary": self,
            "wall_time_s": wall_time_s,
        });
        std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }
}

/// Train `n_runs` agents with seeds `base_seed + i`, classify and evaluate
/// each, and write the tables when `cfg.output` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SummaryTable> {
    cfg.validate()?;
    let started = Instant::now();
    let runs = (0..cfg.n_runs).into_par_iter().map(|i| run_once(cfg, i)).collect::<Result<Vec<_>>>()?;
    let summary = SummaryTable::from_runs(cfg, runs);
    if let Some(dir) = &cfg.output {
        summary.write(cfg, dir, started.elapsed().as_secs_f64())?;
    }
    Ok(summary)
}
