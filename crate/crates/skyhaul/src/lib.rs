//! File formats and command implementations for the `skyhaul` tool.
//!
//! The optimization itself lives in `skyhaul-core`; this crate reads
//! scenario files, writes solution JSON and sweep CSV, and hosts the
//! commands behind the binary.

pub mod commands;
pub mod scenario_file;
pub mod solution_file;

pub use scenario_file::{parse_scenario, scenario_hash, serialize_scenario, ParseError};
pub use solution_file::SolutionDocument;
