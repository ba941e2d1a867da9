//! Config-driven sweeps and their CSV/JSON output.

mod config;
mod emit;
mod sweep;

pub use config::{
    load_config, ExperimentConfig, McSpec, PlacementSpec, SweepScale, SweepSpec, SweepVariable,
};
pub use emit::{emit, emit_to_path, parse_json, JsonOutput, OutputFormat, RunMeta, CSV_HEADER};
pub use sweep::{row_seed, run_sweep, sweep_points, theta_blocks, OutputRow};
