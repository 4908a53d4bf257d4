use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::TabularConfig;
use crate::approx::{A2cConfig, DqnConfig};
use crate::dynamics::EnvParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Exp1,
    Exp2,
    /// Starts from `exp1` and allows every coefficient to be overridden.
    Custom,
}

impl Preset {
    pub fn params(self) -> EnvParams {
        match self {
            Preset::Exp1 | Preset::Custom => EnvParams::exp1(),
            Preset::Exp2 => EnvParams::exp2(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Exp1 => "exp1",
            Preset::Exp2 => "exp2",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Preset::Exp1),
            "exp2" => Ok(Preset::Exp2),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::InvalidParams { name: "preset", reason: format!("unknown preset `{s}`") }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    QReplay,
    Sarsa,
    ActorCritic,
    Dqn,
    A2c,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] =
        [AgentKind::QReplay, AgentKind::Sarsa, AgentKind::ActorCritic, AgentKind::Dqn, AgentKind::A2c];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::QReplay => "q_replay",
            AgentKind::Sarsa => "sarsa",
            AgentKind::ActorCritic => "actor_critic",
            AgentKind::Dqn => "dqn",
            AgentKind::A2c => "a2c",
        }
    }

    /// Learns the greedy policy's values from data gathered by another policy.
    pub fn is_off_policy(self) -> bool {
        matches!(self, AgentKind::QReplay | AgentKind::Dqn)
    }

    pub fn default_config(self) -> AgentConfig {
        match self {
            AgentKind::QReplay => AgentConfig::Tabular(TabularConfig::q_replay()),
            AgentKind::Sarsa | AgentKind::ActorCritic => AgentConfig::Tabular(TabularConfig::default()),
            AgentKind::Dqn => AgentConfig::Dqn(DqnConfig::default()),
            AgentKind::A2c => AgentConfig::A2c(A2cConfig::default()),
        }
    }

    fn section(self) -> &'static str {
        match self {
            AgentKind::QReplay | AgentKind::Sarsa | AgentKind::ActorCritic => "tabular",
            AgentKind::Dqn => "dqn",
            AgentKind::A2c => "a2c",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParams { name: "agent", reason: format!("unknown agent `{s}`") })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentConfig {
    Tabular(TabularConfig),
    Dqn(DqnConfig),
    A2c(A2cConfig),
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            AgentConfig::Tabular(c) => c.validate(),
            AgentConfig::Dqn(c) => c.validate(),
            AgentConfig::A2c(c) => c.validate(),
        }
    }

    /// Training episode budget (an upper bound when a step budget is also set).
    pub fn episodes(&self) -> usize {
        match self {
            AgentConfig::Tabular(c) => c.episodes,
            AgentConfig::Dqn(c) => c.episodes,
            AgentConfig::A2c(c) => c.episodes,
        }
    }

    pub fn set_episodes(&mut self, episodes: usize) {
        match self {
            AgentConfig::Tabular(c) => c.episodes = episodes,
            AgentConfig::Dqn(c) => c.episodes = episodes,
            AgentConfig::A2c(c) => c.episodes = episodes,
        }
    }
}

/// Which policy a trained agent is scored with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// The argmax policy, which is also the one classified.
    #[default]
    Greedy,
    /// The agent's softmax policy for actor-critic learners; greedy for the rest.
    Stochastic,
}

impl FromStr for EvaluationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(EvaluationMode::Greedy),
            "stochastic" => Ok(EvaluationMode::Stochastic),
            _ => Err(Error::InvalidParams { name: "evaluation", reason: format!("unknown mode `{s}`") }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub env: EnvParams,
    pub agent: AgentKind,
    pub agent_config: AgentConfig,
    pub n_runs: usize,
    pub eval_episodes: usize,
    pub base_seed: u64,
    pub evaluation: EvaluationMode,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_EVAL_EPISODES: usize = 10_000;

impl ExperimentConfig {
    pub fn new(preset: Preset, pressure_visible: bool, agent: AgentKind) -> Self {
        ExperimentConfig {
            preset,
            env: preset.params().with_visibility(pressure_visible),
            agent,
            agent_config: agent.default_config(),
            n_runs: DEFAULT_RUNS,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            base_seed: 0,
            evaluation: EvaluationMode::Greedy,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidParams { name: "n_runs", reason: "must be at least 1".into() });
        }
        if self.eval_episodes < 2 {
            return Err(Error::InvalidParams { name: "eval_episodes", reason: "must be at least 2".into() });
        }
        if self.preset != Preset::Custom {
            let base = self.preset.params();
            let changed = if self.env.rho_ll != base.rho_ll {
                Some("rho_ll")
            } else if self.env.rho_hh != base.rho_hh {
                Some("rho_hh")
            } else {
                None
            };
            if let Some(name) = changed {
                return Err(Error::InvalidParams {
                    name,
                    reason: format!("preset {} fixes pressure persistence; use preset = \"custom\"", self.preset),
                });
            }
        }
        let agent_matches = matches!(
            (self.agent, &self.agent_config),
            (AgentKind::QReplay | AgentKind::Sarsa | AgentKind::ActorCritic, AgentConfig::Tabular(_))
                | (AgentKind::Dqn, AgentConfig::Dqn(_))
                | (AgentKind::A2c, AgentConfig::A2c(_))
        );
        if !agent_matches {
            return Err(Error::InvalidParams { name: "agent", reason: "agent config does not match the agent kind".into() });
        }
        self.env.validate()?;
        self.agent_config.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Parse a TOML document. Every error carries the 1-based line it refers to.
    ///
    /// ```toml
    /// preset = "exp2"
    /// pressure_visible = false
    /// agent = "dqn"
    /// n_runs = 10
    /// base_seed = 0
    ///
    /// [dqn]
    /// total_timesteps = 100000
    /// ```
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        let preset = raw.preset.unwrap_or(Preset::Exp1);
        let mut env = preset.params().with_visibility(raw.pressure_visible.unwrap_or(false));
        if let Some(o) = &raw.env {
            o.apply(&mut env);
        }
        let agent = raw.agent;
        let agent_config = match agent {
            AgentKind::QReplay | AgentKind::Sarsa | AgentKind::ActorCritic => {
                let mut c = raw.tabular.clone().unwrap_or_else(|| match agent.default_config() {
                    AgentConfig::Tabular(c) => c,
                    _ => unreachable!(),
                });
                // The replay learner's longer budget applies unless one was given.
                if agent == AgentKind::QReplay && key_line(text, Some("tabular"), "episodes").is_none() {
                    c.episodes = TabularConfig::q_replay().episodes;
                }
                AgentConfig::Tabular(c)
            }
            AgentKind::Dqn => AgentConfig::Dqn(raw.dqn.clone().unwrap_or_default()),
            AgentKind::A2c => AgentConfig::A2c(raw.a2c.clone().unwrap_or_default()),
        };
        let cfg = ExperimentConfig {
            preset,
            env,
            agent,
            agent_config,
            n_runs: raw.n_runs.unwrap_or(DEFAULT_RUNS),
            eval_episodes: raw.eval_episodes.unwrap_or(DEFAULT_EVAL_EPISODES),
            base_seed: raw.base_seed.unwrap_or(0),
            evaluation: raw.evaluation.unwrap_or_default(),
            output: raw.output,
        };
        cfg.validate().map_err(|e| locate(text, agent, e))?;
        Ok(cfg)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    pressure_visible: Option<bool>,
    agent: AgentKind,
    n_runs: Option<usize>,
    eval_episodes: Option<usize>,
    base_seed: Option<u64>,
    evaluation: Option<EvaluationMode>,
    output: Option<PathBuf>,
    env: Option<EnvOverrides>,
    tabular: Option<TabularConfig>,
    dqn: Option<DqnConfig>,
    a2c: Option<A2cConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvOverrides {
    rho_ll: Option<f64>,
    rho_hh: Option<f64>,
    alpha_l: Option<f64>,
    alpha_h: Option<f64>,
    omega_rl: Option<f64>,
    omega_sh: Option<f64>,
    r_ns: Option<f64>,
    r_cr: Option<f64>,
    r_cs: Option<f64>,
    r_nr: Option<f64>,
    r_wait: Option<f64>,
    gamma: Option<f64>,
    t_max: Option<u32>,
    p_initial_high: Option<f64>,
}

impl EnvOverrides {
    fn apply(&self, p: &mut EnvParams) {
        let floats = [
            (self.rho_ll, &mut p.rho_ll),
            (self.rho_hh, &mut p.rho_hh),
            (self.alpha_l, &mut p.alpha_l),
            (self.alpha_h, &mut p.alpha_h),
            (self.omega_rl, &mut p.omega_rl),
            (self.omega_sh, &mut p.omega_sh),
            (self.r_ns, &mut p.r_ns),
            (self.r_cr, &mut p.r_cr),
            (self.r_cs, &mut p.r_cs),
            (self.r_nr, &mut p.r_nr),
            (self.r_wait, &mut p.r_wait),
            (self.gamma, &mut p.gamma),
            (self.p_initial_high, &mut p.p_initial_high),
        ];
        for (value, slot) in floats {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(t) = self.t_max {
            p.t_max = t;
        }
    }
}

const TOP_LEVEL_KEYS: [&str; 8] =
    ["preset", "pressure_visible", "agent", "n_runs", "eval_episodes", "base_seed", "evaluation", "output"];

/// Attach a line number to a validation error by finding the offending key.
fn locate(text: &str, agent: AgentKind, err: Error) -> Error {
    let Error::InvalidParams { name, reason } = err else {
        return Error::Config { line: 1, message: err.to_string() };
    };
    let line = if TOP_LEVEL_KEYS.contains(&name) {
        key_line(text, None, name)
    } else {
        key_line(text, Some("env"), name)
            .or_else(|| key_line(text, Some(agent.section()), name))
            .or_else(|| section_line(text, agent.section()))
            .or_else(|| key_line(text, None, "preset"))
    };
    Error::Config { line: line.unwrap_or(1), message: format!("invalid `{name}`: {reason}") }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn header(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[')?.strip_suffix(']').map(str::trim)
}

/// Line of `key = ...` inside `[section]`, or at top level for `None`.
fn key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<&str> = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(h) = header(line) {
            current = Some(h);
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        if current == section && k.trim().trim_matches('"') == key {
            return Some(i + 1);
        }
    }
    None
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines().position(|l| header(l) == Some(section)).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of_err(text: &str) -> usize {
        match ExperimentConfig::from_toml(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("agent = \"dqn\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Preset::Exp1, false, AgentKind::Dqn));
    }

    #[test]
    fn full_config() {
        let text = r#"
preset = "exp2"
pressure_visible = true
agent = "q_replay"
n_runs = 3
eval_episodes = 500
base_seed = 42
evaluation = "stochastic"
output = "out/q"

[env]
r_wait = -0.5

[tabular]
learning_rate = 0.2
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.preset, Preset::Exp2);
        assert!(cfg.env.pressure_visible);
        assert_eq!(cfg.env.rho_ll, 0.75);
        assert_eq!(cfg.env.r_wait, -0.5);
        assert_eq!(cfg.n_runs, 3);
        assert_eq!(cfg.base_seed, 42);
        assert_eq!(cfg.evaluation, EvaluationMode::Stochastic);
        let AgentConfig::Tabular(t) = &cfg.agent_config else { panic!() };
        assert_eq!(t.learning_rate, 0.2);
        assert_eq!(t.episodes, 100_000);
    }

    #[test]
    fn sarsa_keeps_the_shorter_budget() {
        let cfg = ExperimentConfig::from_toml("agent = \"sarsa\"").unwrap();
        assert_eq!(cfg.agent_config.episodes(), 20_000);
        let cfg = ExperimentConfig::from_toml("agent = \"q_replay\"\n[tabular]\nepisodes = 7\n").unwrap();
        assert_eq!(cfg.agent_config.episodes(), 7);
    }

    #[test]
    fn syntax_and_type_errors_report_lines() {
        assert_eq!(line_of_err("agent = \"dqn\"\nn_runs = \"ten\"\n"), 2);
        assert_eq!(line_of_err("agent = \"dqn\"\n\n[dqn]\nbogus = 1\n"), 4);
        assert_eq!(line_of_err("agent = \"dqn\"\npreset = \"exp9\"\n"), 2);
        assert_eq!(line_of_err("agent = \"dqn\"\n[env]\nalpha_l = \"high\"\n"), 3);
        assert_eq!(line_of_err("agent = \"dqn\"\nn_runs = 1\nn_runs = 2\n"), 3);
    }

    #[test]
    fn validation_errors_report_lines() {
        assert_eq!(line_of_err("agent = \"dqn\"\nn_runs = 0\n"), 2);
        assert_eq!(line_of_err("agent = \"dqn\"\n[env]\nr_wait = -1\nalpha_l = 1.5\n"), 4);
        assert_eq!(line_of_err("agent = \"dqn\"\n\n[dqn]\nlearning_rate = -1.0\n"), 4);
        assert_eq!(line_of_err("preset = \"exp1\"\nagent = \"a2c\"\n[env]\nrho_ll = 0.9\n"), 4);
    }

    #[test]
    fn custom_preset_allows_persistence_overrides() {
        let cfg = ExperimentConfig::from_toml("preset = \"custom\"\nagent = \"a2c\"\n[env]\nrho_ll = 0.9\n").unwrap();
        assert_eq!(cfg.env.rho_ll, 0.9);
        assert_eq!(cfg.env.rho_hh, 0.5);
    }

    #[test]
    fn missing_agent_is_an_error() {
        assert!(matches!(ExperimentConfig::from_toml("n_runs = 2\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn names_round_trip() {
        for a in AgentKind::ALL {
            assert_eq!(a.as_str().parse::<AgentKind>().unwrap(), a);
        }
        for p in [Preset::Exp1, Preset::Exp2, Preset::Custom] {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
    }
}
