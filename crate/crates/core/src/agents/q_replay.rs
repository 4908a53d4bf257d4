use crate::dynamics::{seeded_rng, DogBarometerEnv, EnvParams, TransitionRecord};
use crate::error::Result;
use crate::policy::PolicyTable;

use super::{agent_seed, epsilon_greedy, QTable, ReplayBuffer, TabularConfig};

/// Off-policy Q-learning from a uniform replay memory.
///
/// Every environment step is stored; once the memory holds a full batch,
/// each step is followed by `batch_size` sampled one-step updates
/// `Q(o,a) += lr * (r + gamma * (1 - terminal) * max_b Q(o',b) - Q(o,a))`.
pub fn train_q_replay(params: &EnvParams, cfg: &TabularConfig, seed: u64) -> Result<(QTable, PolicyTable)> {
    params.validate()?;
    cfg.validate()?;
    let gamma = cfg.discount(params);
    let mut env = DogBarometerEnv::new(params.clone(), seed);
    let mut rng = seeded_rng(agent_seed(seed));
    let mut q = QTable::new(params.pressure_visible, cfg.initial_q);
    let mut memory: ReplayBuffer<TransitionRecord> = ReplayBuffer::new(cfg.buffer_capacity);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut obs = env.reset();
        loop {
            let action = epsilon_greedy(&q, &obs, epsilon, &mut rng);
            let record = env.step(action)?;
            memory.push(record);
            if memory.len() >= cfg.batch_size {
                for idx in memory.sample_indices(&mut rng, cfg.batch_size) {
                    let t = memory.get(idx).expect("sampled index in range");
                    let bootstrap = if t.terminal() { 0.0 } else { q.max(&t.next_obs) };
                    let target = t.reward + gamma * bootstrap;
                    let v = q.get_mut(&t.obs, t.action);
                    *v += cfg.learning_rate * (target - *v);
                }
            }
            if record.done {
                break;
            }
            obs = record.next_obs;
        }
    }
    let policy = q.greedy_policy();
    Ok((q, policy))
}
