//! Tabular learners on the raw observation signal.
//!
//! [`train_q_replay`] is off-policy Q-learning fed from a uniform replay
//! memory. [`train_sarsa`] and [`train_actor_critic`] learn strictly from
//! the transition just taken by the current policy.

mod actor_critic;
mod q_replay;
mod replay;
mod sarsa;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, EnvParams, Observation, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::policy::{argmax, PolicyTable};

pub use actor_critic::{train_actor_critic, ActorCriticParams};
pub use q_replay::train_q_replay;
pub use replay::ReplayBuffer;
pub use sarsa::train_sarsa;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    /// Constant step size for Q-values (and the actor in actor-critic).
    pub learning_rate: f64,
    /// Critic step size for actor-critic.
    pub critic_learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    /// Initial value of every Q entry.
    pub initial_q: f64,
    /// Overrides the environment discount when set.
    pub gamma: Option<f64>,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            learning_rate: 0.1,
            critic_learning_rate: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            batch_size: 32,
            buffer_capacity: 10_000,
            episodes: 20_000,
            initial_q: 0.0,
            gamma: None,
        }
    }
}

impl TabularConfig {
    /// Default budget for the replay learner.
    pub fn q_replay() -> Self {
        TabularConfig { episodes: 100_000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParams { name, reason: reason.into() });
        for (name, rate) in [("learning_rate", self.learning_rate), ("critic_learning_rate", self.critic_learning_rate)] {
            if !(rate > 0.0 && rate <= 1.0) {
                return bad(name, "must be in (0, 1]");
            }
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return bad(name, "must be in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad("epsilon_decay_fraction", "must be in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.episodes == 0 {
            return bad("budget", "batch_size, buffer_capacity and episodes must be positive");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad("gamma", "must be in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn discount(&self, params: &EnvParams) -> f64 {
        self.gamma.unwrap_or(params.gamma)
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        linear_schedule(self.epsilon_start, self.epsilon_end, self.epsilon_decay_fraction, episode, self.episodes)
    }
}

/// Linear interpolation from `start` to `end` over the first `fraction`
/// of `total`, constant afterwards.
pub fn linear_schedule(start: f64, end: f64, fraction: f64, progress: usize, total: usize) -> f64 {
    let horizon = fraction * total as f64;
    if horizon <= 0.0 {
        return end;
    }
    let t = (progress as f64 / horizon).min(1.0);
    start + t * (end - start)
}

/// Action-value estimates per observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pressure_visible: bool,
    values: Vec<[f64; NUM_ACTIONS]>,
}

impl QTable {
    pub fn new(pressure_visible: bool, initial: f64) -> Self {
        QTable { pressure_visible, values: vec![[initial; NUM_ACTIONS]; Observation::count(pressure_visible)] }
    }

    pub fn pressure_visible(&self) -> bool {
        self.pressure_visible
    }

    pub fn row(&self, obs: &Observation) -> &[f64; NUM_ACTIONS] {
        &self.values[obs.index()]
    }

    pub fn get(&self, obs: &Observation, action: Action) -> f64 {
        self.values[obs.index()][action.index()]
    }

    pub fn get_mut(&mut self, obs: &Observation, action: Action) -> &mut f64 {
        &mut self.values[obs.index()][action.index()]
    }

    pub fn max(&self, obs: &Observation) -> f64 {
        self.row(obs).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, obs: &Observation) -> Action {
        Action::ALL[argmax(self.row(obs))]
    }

    pub fn greedy_policy(&self) -> PolicyTable {
        PolicyTable::greedy_from_scores(self.pressure_visible, &self.values).expect("table matches its mode")
    }

    pub fn rows(&self) -> &[[f64; NUM_ACTIONS]] {
        &self.values
    }

    /// CSV dump with header `observation,action,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "observation,action,value")?;
        for (i, row) in self.values.iter().enumerate() {
            let obs = Observation::from_index(i, self.pressure_visible);
            for a in Action::ALL {
                writeln!(out, "{obs},{a},{}", row[a.index()])?;
            }
        }
        Ok(())
    }
}

/// Epsilon-greedy choice. The uniform branch picks any of the four actions.
pub(crate) fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, obs: &Observation, epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Action::ALL[rng.gen_range(0..NUM_ACTIONS)]
    } else {
        q.greedy(obs)
    }
}

/// Seed for a learner's own random source, distinct from the environment's.
pub(crate) fn agent_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let cfg = TabularConfig { episodes: 100, ..TabularConfig::default() };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(25) - 0.525).abs() < 1e-12);
        assert!((cfg.epsilon(50) - 0.05).abs() < 1e-12);
        assert!((cfg.epsilon(99) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TabularConfig::default().validate().is_ok());
        assert!(TabularConfig { learning_rate: 0.0, ..TabularConfig::default() }.validate().is_err());
        assert!(TabularConfig { epsilon_end: 1.5, ..TabularConfig::default() }.validate().is_err());
        assert!(TabularConfig { episodes: 0, ..TabularConfig::default() }.validate().is_err());
    }

    #[test]
    fn q_csv_has_one_row_per_pair() {
        let q = QTable::new(false, 0.0);
        let mut out = Vec::new();
        q.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 16);
        assert!(text.contains("HS,n,0"));
    }

    #[test]
    fn greedy_step_on_fresh_table_waits() {
        let q = QTable::new(false, 0.0);
        let mut rng = crate::dynamics::seeded_rng(0);
        for obs in Observation::all(false) {
            assert_eq!(epsilon_greedy(&q, &obs, 0.0, &mut rng), Action::Wait);
        }
    }
}
