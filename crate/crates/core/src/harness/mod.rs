//! Experiment orchestration: configuration, multi-seed runs, evaluation,
//! strategy counts, reproduction of the published tables and report output.

pub mod config;
pub mod experiment;
pub mod report;
pub mod reproduce;

pub use config::{AgentConfig, AgentKind, EvaluationMode, ExperimentConfig, Preset};
pub use experiment::{run_experiment, run_once, train_agent, RunResult, SummaryTable, TrainedAgent};
pub use reproduce::{reproduce, Reproduction, ReproduceOptions};
