//! File formats, trajectory output, validation suites and benchmarks for the
//! `kerr-tfd` command-line tool.

pub mod bench;
pub mod error;
pub mod runspec;
pub mod simulate;
pub mod validate;

pub use error::CliError;
pub use runspec::{Engine, Initial, RunSpec, SystemKind, TimeGrid};
pub use simulate::{simulate, write_outputs, Trajectory};
pub use validate::{Check, Report, Suite};
