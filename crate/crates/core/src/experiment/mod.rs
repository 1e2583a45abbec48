//! Seeded experiment harness: configuration, random metrics, the suite and
//! its reports and tables.

pub mod config;
pub mod generate;
pub mod report;
pub mod suite;
pub mod table;
pub mod verify;

pub use config::ExperimentConfig;
pub use generate::{generate_random_metric, Shape};
pub use report::{Record, Report};
pub use suite::run_suite;
pub use table::{emit_table, TableKind};
pub use verify::{verify_identities, VerifyOptions};
