//! Neural learners: a small tanh MLP with hand-written backpropagation, a
//! DQN-style agent and an A2C-style agent.

mod a2c;
pub mod checkpoint;
mod dqn;
mod mlp;
mod optim;

pub use a2c::{train_a2c, A2cConfig, A2cOutcome};
pub use dqn::{train_dqn, DqnConfig, DqnLearner, DqnOutcome};
pub use mlp::{clip_grad_norm, param_count, Mlp, Trace};
pub use optim::Optimizer;

use crate::dynamics::{encode, encoded_len, Observation, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::policy::PolicyTable;

/// Greedy observation policy of a network whose first four outputs score
/// the actions (Q-values or logits). The mode follows from the input width.
pub fn network_policy(net: &Mlp) -> Result<PolicyTable> {
    let pressure_visible = match net.input_len() {
        n if n == encoded_len(false) => false,
        n if n == encoded_len(true) => true,
        n => return Err(Error::ShapeMismatch { expected: encoded_len(false), found: n }),
    };
    if net.output_len() < NUM_ACTIONS {
        return Err(Error::ShapeMismatch { expected: NUM_ACTIONS, found: net.output_len() });
    }
    let scores = encoded_inputs(pressure_visible)
        .iter()
        .map(|x| net.forward(x).map(|out| [out[0], out[1], out[2], out[3]]))
        .collect::<Result<Vec<_>>>()?;
    PolicyTable::greedy_from_scores(pressure_visible, &scores)
}

/// Encoded input vector for every observation of a mode, in index order.
pub(crate) fn encoded_inputs(pressure_visible: bool) -> Vec<Vec<f64>> {
    Observation::all(pressure_visible).map(|o| encode(&o)).collect()
}

/// `[input, hidden..., output]`.
pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}
