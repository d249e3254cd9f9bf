//! Project files, subcommands and reports.
//!
//! A project file is JSON with `"schema_version": 1` and the sections
//! `systems`, `certificates`, `networks`, `simulations` and `run`. Every
//! subcommand writes `report.json` next to its other artifacts.

mod commands;
mod config;
mod emit;
mod error;
mod matrix;

pub use commands::{run_cli, run_subcommand, Outcome, RunFlags, Status, Subcommand};
pub use config::{
    bundled_config, load_config, load_config_str, CertificateEntry, CompletedCertificate,
    NetworkEntry, ProjectConfig, ResolvedLink, ResolvedNetwork, RunSettings, SimulationEntry,
    SCHEMA_VERSION,
};
pub use emit::{certificate_to_json, system_to_json};
pub use error::ConfigError;
pub use matrix::{matrix_to_json, parse_matrix, parse_vector};
