//! Run configuration, CSV tables, seeded noise and run manifests.

mod config;
mod manifest;
mod noise;
mod table;

pub use config::{
    load_config, parse_config, CalibrationConfig, GridSpec, Grids, NoiseConfig, OutputConfig, RunConfig,
    TransitionsConfig, WidthSweepConfig,
};
pub use manifest::RunManifest;
pub use noise::{inject_noise, inject_noise_values};
pub use table::{fmt_num, parse_trace, read_trace, sha256_hex, trace_table, write_bytes, Cell, Table};
