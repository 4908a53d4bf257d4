use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{clip_grad_norm, Mlp};
use super::optim::Optimizer;
use super::{encoded_inputs, layer_sizes};
use crate::dynamics::{encoded_len, seeded_rng, Action, DogBarometerEnv, EnvParams, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::policy::PolicyTable;

/// Output layout of the shared-trunk network: four policy logits, then the
/// state value.
const OUTPUTS: usize = NUM_ACTIONS + 1;
const VALUE: usize = NUM_ACTIONS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub episodes: usize,
    /// Rollout length between updates.
    pub n_steps: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub rms_alpha: f64,
    pub rms_eps: f64,
    pub hidden: Vec<usize>,
    /// Overrides the environment discount when set.
    pub gamma: Option<f64>,
}

impl Default for A2cConfig {
    fn default() -> Self {
        A2cConfig {
            episodes: 20_000,
            n_steps: 5,
            learning_rate: 7e-4,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            rms_alpha: 0.99,
            rms_eps: 1e-5,
            hidden: vec![64, 64],
            gamma: None,
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParams { name, reason: reason.into() });
        if self.episodes == 0 || self.n_steps == 0 {
            return bad("budget", "episodes and n_steps must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate", "learning_rate and max_grad_norm must be positive");
        }
        if !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("value_coef", "loss weights must be non-negative");
        }
        if !(0.0..1.0).contains(&self.rms_alpha) || !(self.rms_eps > 0.0) {
            return bad("rms_alpha", "rms_alpha must be in [0, 1) and rms_eps positive");
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

#[derive(Clone, Debug)]
pub struct A2cOutcome {
    /// Argmax of the logits per observation.
    pub policy: PolicyTable,
    /// The softmax policy itself.
    pub stochastic: PolicyTable,
    pub network: Mlp,
    /// Critic estimate per observation.
    pub values: Vec<f64>,
    pub env_steps: usize,
    pub updates: usize,
}

fn softmax(logits: &[f64]) -> [f64; NUM_ACTIONS] {
    let m = logits[..NUM_ACTIONS].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_ACTIONS];
    for (k, z) in logits[..NUM_ACTIONS].iter().enumerate() {
        p[k] = (z - m).exp();
    }
    let total: f64 = p.iter().sum();
    p.map(|x| x / total)
}

fn sample<R: Rng + ?Sized>(probs: &[f64; NUM_ACTIONS], rng: &mut R) -> Action {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action::ALL[k];
        }
    }
    Action::ALL[NUM_ACTIONS - 1]
}

struct Step {
    obs: usize,
    action: Action,
    reward: f64,
    terminal: bool,
    truncated: bool,
    next_obs: usize,
}

/// Gradient of the combined loss
/// `-A log pi(a|o) + value_coef (R - V(o))^2 - entropy_coef H(pi(.|o))`
/// with respect to the five network outputs, for one sample.
fn output_gradient(out: &[f64], action: Action, ret: f64, cfg: &A2cConfig) -> [f64; OUTPUTS] {
    let probs = softmax(out);
    let value = out[VALUE];
    let advantage = ret - value;
    let entropy: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    let mut g = [0.0; OUTPUTS];
    for k in 0..NUM_ACTIONS {
        let indicator = if k == action.index() { 1.0 } else { 0.0 };
        g[k] = -advantage * (indicator - probs[k]);
        if cfg.entropy_coef > 0.0 && probs[k] > 0.0 {
            g[k] += cfg.entropy_coef * probs[k] * (probs[k].ln() + entropy);
        }
    }
    g[VALUE] = cfg.value_coef * 2.0 * (value - ret);
    g
}

/// Synchronous advantage actor-critic with `n_steps` rollouts, a shared
/// tanh trunk and a five-output head.
pub fn train_a2c(params: &EnvParams, cfg: &A2cConfig, seed: u64) -> Result<A2cOutcome> {
    params.validate()?;
    cfg.validate()?;
    let gamma = cfg.gamma.unwrap_or(params.gamma);
    let mut env = DogBarometerEnv::new(params.clone(), seed);
    let mut rng = seeded_rng(crate::agents::agent_seed(seed));
    let inputs = encoded_inputs(params.pressure_visible);

    let sizes = layer_sizes(encoded_len(params.pressure_visible), &cfg.hidden, OUTPUTS);
    let mut gains = vec![std::f64::consts::SQRT_2; cfg.hidden.len()];
    gains.push(1.0);
    let mut net = Mlp::orthogonal(&sizes, &gains, &mut rng);
    {
        // Near-uniform initial policy: shrink the logit rows.
        let last = net.num_layers() - 1;
        let cols = sizes[sizes.len() - 2];
        let (w, _) = net.layer_mut(last);
        for v in &mut w[..NUM_ACTIONS * cols] {
            *v *= 0.01;
        }
    }
    let mut optimizer = Optimizer::rms_prop(net.params().len(), cfg.learning_rate, cfg.rms_alpha, cfg.rms_eps);

    let mut obs = env.reset().index();
    let mut episodes_done = 0usize;
    let mut steps = 0usize;
    let mut updates = 0usize;
    let mut rollout: Vec<Step> = Vec::with_capacity(cfg.n_steps);
    while episodes_done < cfg.episodes {
        rollout.clear();
        for _ in 0..cfg.n_steps {
            let out = net.forward(&inputs[obs])?;
            let action = sample(&softmax(&out), &mut rng);
            let t = env.step(action)?;
            steps += 1;
            rollout.push(Step {
                obs,
                action,
                reward: t.reward,
                terminal: t.terminal(),
                truncated: t.truncated,
                next_obs: t.next_obs.index(),
            });
            if t.done {
                episodes_done += 1;
                obs = env.reset().index();
                if episodes_done == cfg.episodes {
                    break;
                }
            } else {
                obs = t.next_obs.index();
            }
        }

        let value_of = |o: usize| -> Result<f64> { Ok(net.forward(&inputs[o])?[VALUE]) };
        let last = rollout.last().expect("rollout has at least one step");
        let mut ret = if last.terminal || last.truncated { 0.0 } else { value_of(last.next_obs)? };
        let mut returns = vec![0.0; rollout.len()];
        for (k, s) in rollout.iter().enumerate().rev() {
            ret = if s.terminal {
                s.reward
            } else if s.truncated {
                s.reward + gamma * value_of(s.next_obs)?
            } else {
                s.reward + gamma * ret
            };
            returns[k] = ret;
        }

        let mut grad = net.zero_grad();
        let scale = 1.0 / rollout.len() as f64;
        for (s, ret) in rollout.iter().zip(&returns) {
            let trace = net.forward_trace(&inputs[s.obs])?;
            let g = output_gradient(trace.output(), s.action, *ret, cfg).map(|x| x * scale);
            net.backward_into(&trace, &g, &mut grad)?;
        }
        clip_grad_norm(&mut grad, cfg.max_grad_norm);
        optimizer.step(net.params_mut(), &grad);
        updates += 1;
    }

    let outputs: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x)).collect::<Result<_>>()?;
    let logits: Vec<[f64; NUM_ACTIONS]> = outputs.iter().map(|o| [o[0], o[1], o[2], o[3]]).collect();
    let policy = PolicyTable::greedy_from_scores(params.pressure_visible, &logits)?;
    let stochastic = PolicyTable::stochastic(params.pressure_visible, outputs.iter().map(|o| softmax(o)).collect())?;
    Ok(A2cOutcome {
        policy,
        stochastic,
        values: outputs.iter().map(|o| o[VALUE]).collect(),
        network: net,
        env_steps: steps,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of the scalar loss against the analytic output gradient.
    #[test]
    fn output_gradient_matches_finite_differences() {
        let cfg = A2cConfig { entropy_coef: 0.3, ..A2cConfig::default() };
        let out = [0.3, -1.2, 0.7, 0.1, 2.5];
        let action = Action::Press;
        let ret = 4.0;
        let loss = |o: &[f64; OUTPUTS]| {
            let p = softmax(o);
            let adv = ret - out[VALUE]; // advantage is held fixed
            let h: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
            -adv * p[action.index()].ln() + cfg.value_coef * (ret - o[VALUE]).powi(2) - cfg.entropy_coef * h
        };
        let g = output_gradient(&out, action, ret, &cfg);
        for k in 0..OUTPUTS {
            let h = 1e-6;
            let mut plus = out;
            plus[k] += h;
            let mut minus = out;
            minus[k] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "output {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(A2cConfig::default().validate().is_ok());
        assert!(A2cConfig { n_steps: 0, ..A2cConfig::default() }.validate().is_err());
        assert!(A2cConfig { rms_alpha: 1.0, ..A2cConfig::default() }.validate().is_err());
    }
}
