//! The dog-barometer laboratory.
//!
//! A dog chooses whether to wear a coat for its walk. The barometer in the
//! house predicts the weather, but the dog can also press the barometer's
//! button and force a high reading, which destroys the prediction. The
//! crate bundles the environment ([`dynamics`]), exact solvers
//! ([`oracle`]), a strategy classifier ([`strategies`]), tabular learners
//! ([`agents`]), neural learners ([`approx`]) and the experiment runner
//! ([`harness`]).

// `!(x > 0.0)` style checks are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod approx;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod policy;
pub mod strategies;

pub use dynamics::{Action, EnvParams, Observation};
pub use error::{Error, Result};
pub use policy::PolicyTable;
pub use strategies::StrategyLabel;
