//! Scenario generation, Monte-Carlo experiments and CSV export.

pub mod config;
pub mod experiments;
pub mod params;
pub mod stats;

pub use config::{RunConfig, SCHEMA_VERSION};
pub use experiments::{run_experiment, run_trials, ExperimentId, ExperimentOutput, ExperimentSpec, TrialRecord};
pub use params::{
    default_parameters, generate_multiuser_scenario, generate_multiuser_scenario_with, scenario_digest, splitmix,
    MultiUserLayout, SystemParameters,
};
