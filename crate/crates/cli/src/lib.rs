//! Scenario runner for the EIT cooling toolkit.
//!
//! Every pipeline of `eit-core` is exposed as a scenario driven by a JSON
//! configuration in laboratory units. Each artifact starts with a `#`
//! provenance header from which it can be regenerated.

pub mod app;
pub mod config;
pub mod presets;
pub mod scenarios;

pub use app::main_with_args;
pub use config::{parse_config, ConfigError, Scenario, ScenarioConfig};
pub use scenarios::CliError;
