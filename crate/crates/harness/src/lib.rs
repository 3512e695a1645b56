//! Scenario generation, experiment orchestration and audit suites.

pub mod experiment;
pub mod noise;
pub mod run;
pub mod scenario;
pub mod tune;
pub mod verify;

pub use experiment::{run_experiment, ExperimentConfig, RunRecord};
pub use run::{run_policy, PenaltySetting, ALPHA_SCALE, V_SCALE};
