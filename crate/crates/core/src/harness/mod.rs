//! Configuration, scenario orchestration and file output.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{parse_config, Auto, ConfigError, Scenario, ScenarioConfig};
pub use output::{emit_csv, git_blob_hash, read_calibration, write_calibration, CSV_HEADER};
pub use scenario::{run_scenario, HarnessError, RunOptions, ScenarioReport};
