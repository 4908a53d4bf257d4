use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{seeded_rng, Action, DogBarometerEnv, EnvParams, Observation, NUM_ACTIONS};
use crate::error::Result;
use crate::policy::PolicyTable;

use super::{agent_seed, TabularConfig};

/// Softmax actor over preferences plus a state-value critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticParams {
    pressure_visible: bool,
    pub preferences: Vec<[f64; NUM_ACTIONS]>,
    pub values: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|z| (z - m).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

impl ActorCriticParams {
    pub fn new(pressure_visible: bool) -> Self {
        let n = Observation::count(pressure_visible);
        ActorCriticParams { pressure_visible, preferences: vec![[0.0; NUM_ACTIONS]; n], values: vec![0.0; n] }
    }

    pub fn probabilities(&self, obs: &Observation) -> [f64; NUM_ACTIONS] {
        softmax(&self.preferences[obs.index()])
    }

    pub fn stochastic_policy(&self) -> PolicyTable {
        let rows = self.preferences.iter().map(softmax).collect();
        PolicyTable::stochastic(self.pressure_visible, rows).expect("softmax rows are distributions")
    }

    /// Argmax of the preferences per observation.
    pub fn greedy_policy(&self) -> PolicyTable {
        PolicyTable::greedy_from_scores(self.pressure_visible, &self.preferences).expect("table matches its mode")
    }

    fn sample<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Action {
        let probs = self.probabilities(obs);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Action::ALL[i];
            }
        }
        Action::ALL[NUM_ACTIONS - 1]
    }
}

/// One-step actor-critic. `learning_rate` drives the actor and
/// `critic_learning_rate` the critic; exploration comes from the softmax
/// itself.
pub fn train_actor_critic(
    params: &EnvParams,
    cfg: &TabularConfig,
    seed: u64,
) -> Result<(ActorCriticParams, PolicyTable)> {
    params.validate()?;
    cfg.validate()?;
    let gamma = cfg.discount(params);
    let mut env = DogBarometerEnv::new(params.clone(), seed);
    let mut rng = seeded_rng(agent_seed(seed));
    let mut ac = ActorCriticParams::new(params.pressure_visible);

    for _ in 0..cfg.episodes {
        let mut obs = env.reset();
        loop {
            let action = ac.sample(&obs, &mut rng);
            let t = env.step(action)?;
            let bootstrap = if t.terminal() { 0.0 } else { ac.values[t.next_obs.index()] };
            let i = obs.index();
            let delta = t.reward + gamma * bootstrap - ac.values[i];
            ac.values[i] += cfg.critic_learning_rate * delta;
            let probs = softmax(&ac.preferences[i]);
            for (k, pref) in ac.preferences[i].iter_mut().enumerate() {
                let indicator = if k == action.index() { 1.0 } else { 0.0 };
                *pref += cfg.learning_rate * delta * (indicator - probs[k]);
            }
            if t.done {
                break;
            }
            obs = t.next_obs;
        }
    }
    let policy = ac.greedy_policy();
    Ok((ac, policy))
}
