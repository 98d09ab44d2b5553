//! File formats, experiment configs and commands on top of `unipelt-core`.

pub mod census_io;
pub mod checkpoint;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod experiment;

pub use error::{CliError, CliResult};
