//! Command-line front end for `vnfp-core`: configuration parsing, run
//! orchestration, CSV/JSON output, rate fits and the acceptance checks.

pub mod checks;
pub mod config;
pub mod fit;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use run::execute;
