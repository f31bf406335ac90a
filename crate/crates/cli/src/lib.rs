//! Configuration, canned scenarios and artifact emission for the `qlink`
//! command-line tool.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load_config, validate_config, ConfigError, ExperimentConfig, Scenario, Violation};
pub use scenario::run_scenario;
