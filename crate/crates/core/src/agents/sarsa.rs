use crate::dynamics::{seeded_rng, DogBarometerEnv, EnvParams};
use crate::error::Result;
use crate::policy::PolicyTable;

use super::{agent_seed, epsilon_greedy, QTable, TabularConfig};

/// On-policy SARSA: the target bootstraps from the action the behaviour
/// policy actually picks next, and each transition is used once.
pub fn train_sarsa(params: &EnvParams, cfg: &TabularConfig, seed: u64) -> Result<(QTable, PolicyTable)> {
    params.validate()?;
    cfg.validate()?;
    let gamma = cfg.discount(params);
    let mut env = DogBarometerEnv::new(params.clone(), seed);
    let mut rng = seeded_rng(agent_seed(seed));
    let mut q = QTable::new(params.pressure_visible, cfg.initial_q);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let obs = env.reset();
        let mut action = epsilon_greedy(&q, &obs, epsilon, &mut rng);
        loop {
            let t = env.step(action)?;
            if t.terminal() {
                let v = q.get_mut(&t.obs, t.action);
                *v += cfg.learning_rate * (t.reward - *v);
                break;
            }
            let next_action = epsilon_greedy(&q, &t.next_obs, epsilon, &mut rng);
            let target = t.reward + gamma * q.get(&t.next_obs, next_action);
            let v = q.get_mut(&t.obs, t.action);
            *v += cfg.learning_rate * (target - *v);
            if t.done {
                break;
            }
            action = next_action;
        }
    }
    let policy = q.greedy_policy();
    Ok((q, policy))
}
