//! Monte Carlo BLER driver behind the `sim` command.

pub mod config;
pub mod presets;
pub mod records;
pub mod sweep;

pub use config::{parse_config, ConfigError, Scenario};
pub use records::{emit_records, parse_records, BlerRecord};
pub use sweep::{run_sweep, simulate_frame, stream_seed, SweepContext};
