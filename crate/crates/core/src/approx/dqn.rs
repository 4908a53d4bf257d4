use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{clip_grad_norm, Mlp};
use super::optim::Optimizer;
use super::{encoded_inputs, layer_sizes};
use crate::agents::{linear_schedule, ReplayBuffer};
use crate::dynamics::{
    encoded_len, seeded_rng, Action, DogBarometerEnv, EnvParams, Observation, TransitionRecord, NUM_ACTIONS,
};
use crate::error::{Error, Result};
use crate::policy::{argmax, PolicyTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub episodes: usize,
    /// Stop after this many environment steps, even mid-episode, and decay
    /// epsilon over steps rather than episodes. Zero disables the step budget.
    pub total_timesteps: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between target-network copies.
    pub target_sync_steps: usize,
    /// Environment steps between gradient updates.
    pub train_freq: usize,
    /// Uniformly random actions, and no updates, for this many steps.
    pub learning_starts: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training budget over which epsilon decays.
    pub exploration_fraction: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    /// Overrides the environment discount when set.
    pub gamma: Option<f64>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            episodes: 100_000,
            total_timesteps: 100_000,
            buffer_capacity: 1_000_000,
            batch_size: 32,
            target_sync_steps: 10_000,
            train_freq: 4,
            learning_starts: 50_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            exploration_fraction: 0.1,
            learning_rate: 1e-4,
            max_grad_norm: 10.0,
            hidden: vec![64, 64],
            gamma: None,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParams { name, reason: reason.into() });
        if self.episodes == 0 || self.buffer_capacity == 0 || self.batch_size == 0 {
            return bad("budget", "episodes, buffer_capacity and batch_size must be positive");
        }
        if self.target_sync_steps == 0 {
            return bad("target_sync_steps", "must be at least 1");
        }
        if self.train_freq == 0 {
            return bad("train_freq", "must be at least 1");
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return bad(name, "must be in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.exploration_fraction) {
            return bad("exploration_fraction", "must be in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate", "learning_rate and max_grad_norm must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad("gamma", "must be in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Online and target Q-networks with their optimizer.
#[derive(Clone, Debug)]
pub struct DqnLearner {
    online: Mlp,
    target: Mlp,
    /// Target-network Q-values for every observation, refreshed on sync.
    target_q: Vec<[f64; NUM_ACTIONS]>,
    inputs: Vec<Vec<f64>>,
    optimizer: Optimizer,
    gamma: f64,
    max_grad_norm: f64,
    pressure_visible: bool,
}

fn q_row(out: &[f64]) -> [f64; NUM_ACTIONS] {
    [out[0], out[1], out[2], out[3]]
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(params: &EnvParams, cfg: &DqnConfig, rng: &mut R) -> Self {
        let sizes = layer_sizes(encoded_len(params.pressure_visible), &cfg.hidden, NUM_ACTIONS);
        let online = Mlp::fan_in_uniform(&sizes, rng);
        let optimizer = Optimizer::adam(online.params().len(), cfg.learning_rate);
        let mut learner = DqnLearner {
            target: online.clone(),
            online,
            target_q: Vec::new(),
            inputs: encoded_inputs(params.pressure_visible),
            optimizer,
            gamma: cfg.gamma.unwrap_or(params.gamma),
            max_grad_norm: cfg.max_grad_norm,
            pressure_visible: params.pressure_visible,
        };
        learner.sync_target();
        learner
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn q_values(&self, obs: &Observation) -> [f64; NUM_ACTIONS] {
        q_row(&self.online.forward(&self.inputs[obs.index()]).expect("encoded input matches network"))
    }

    pub fn q_table(&self) -> Vec<[f64; NUM_ACTIONS]> {
        (0..self.inputs.len())
            .map(|i| q_row(&self.online.forward(&self.inputs[i]).expect("encoded input matches network")))
            .collect()
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
        self.target_q = self
            .inputs
            .iter()
            .map(|x| q_row(&self.target.forward(x).expect("encoded input matches network")))
            .collect();
    }

    /// `r + gamma * (1 - terminal) * max_a Q_target(o', a)`.
    pub fn td_targets<'a>(&self, batch: impl IntoIterator<Item = &'a TransitionRecord>) -> Vec<f64> {
        batch
            .into_iter()
            .map(|t| {
                let bootstrap = if t.terminal() {
                    0.0
                } else {
                    self.target_q[t.next_obs.index()].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                t.reward + self.gamma * bootstrap
            })
            .collect()
    }

    /// One gradient step on the mean Huber TD loss. Returns the loss.
    pub fn train_batch(&mut self, batch: &[&TransitionRecord]) -> f64 {
        let targets = self.td_targets(batch.iter().copied());
        let n_obs = self.inputs.len();
        let traces: Vec<_> = self
            .inputs
            .iter()
            .map(|x| self.online.forward_trace(x).expect("encoded input matches network"))
            .collect();
        // Only a handful of distinct inputs exist, so per-sample output
        // gradients are summed per observation and backpropagated once each.
        let mut upstream = vec![[0.0; NUM_ACTIONS]; n_obs];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let o = t.obs.index();
            let err = traces[o].output()[t.action.index()] - y;
            loss += if err.abs() <= 1.0 { 0.5 * err * err } else { err.abs() - 0.5 };
            upstream[o][t.action.index()] += err.clamp(-1.0, 1.0) * scale;
        }
        let mut grad = self.online.zero_grad();
        for (o, up) in upstream.iter().enumerate() {
            if up.iter().any(|&g| g != 0.0) {
                self.online.backward_into(&traces[o], up, &mut grad).expect("shapes match");
            }
        }
        clip_grad_norm(&mut grad, self.max_grad_norm);
        self.optimizer.step(self.online.params_mut(), &grad);
        loss * scale
    }

    pub fn greedy_policy(&self) -> PolicyTable {
        PolicyTable::greedy_from_scores(self.pressure_visible, &self.q_table()).expect("table matches its mode")
    }
}

#[derive(Clone, Debug)]
pub struct DqnOutcome {
    pub policy: PolicyTable,
    pub network: Mlp,
    /// Final online Q-values per observation.
    pub q_values: Vec<[f64; NUM_ACTIONS]>,
    /// Episodes started, including one cut short by the step budget.
    pub episodes: usize,
    pub env_steps: usize,
    pub updates: usize,
}

/// Q-learning with a replay memory, a periodically synced target network
/// and epsilon-greedy exploration.
pub fn train_dqn(params: &EnvParams, cfg: &DqnConfig, seed: u64) -> Result<DqnOutcome> {
    params.validate()?;
    cfg.validate()?;
    let mut env = DogBarometerEnv::new(params.clone(), seed);
    let mut rng = seeded_rng(crate::agents::agent_seed(seed));
    let mut learner = DqnLearner::new(params, cfg, &mut rng);
    let mut memory: ReplayBuffer<TransitionRecord> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut steps = 0usize;
    let mut updates = 0usize;

    let step_limit = if cfg.total_timesteps == 0 { usize::MAX } else { cfg.total_timesteps };
    let mut episodes = 0usize;
    'episodes: for episode in 0..cfg.episodes {
        if steps >= step_limit {
            break;
        }
        episodes += 1;
        let mut obs = env.reset();
        loop {
            let epsilon = match cfg.total_timesteps {
                0 => linear_schedule(cfg.epsilon_start, cfg.epsilon_end, cfg.exploration_fraction, episode, cfg.episodes),
                total => linear_schedule(cfg.epsilon_start, cfg.epsilon_end, cfg.exploration_fraction, steps, total),
            };
            let explore = steps < cfg.learning_starts || rng.gen::<f64>() < epsilon;
            let action = if explore {
                Action::ALL[rng.gen_range(0..NUM_ACTIONS)]
            } else {
                Action::ALL[argmax(&learner.q_values(&obs))]
            };
            let record = env.step(action)?;
            memory.push(record);
            steps += 1;

            if steps >= cfg.learning_starts && steps.is_multiple_of(cfg.train_freq) && memory.len() >= cfg.batch_size {
                let batch: Vec<&TransitionRecord> = memory.sample(&mut rng, cfg.batch_size).collect();
                learner.train_batch(&batch);
                updates += 1;
            }
            if steps.is_multiple_of(cfg.target_sync_steps) {
                learner.sync_target();
            }
            if steps >= step_limit {
                break 'episodes;
            }
            if record.done {
                break;
            }
            obs = record.next_obs;
        }
    }
    Ok(DqnOutcome {
        policy: learner.greedy_policy(),
        q_values: learner.q_table(),
        network: learner.online().clone(),
        episodes,
        env_steps: steps,
        updates,
    })
}
