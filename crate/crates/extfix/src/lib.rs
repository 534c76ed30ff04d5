//! Command-line runner for extfix-core: built-in instances, instance files,
//! trace CSV and JSON reports.

pub mod cli;
pub mod instance_file;
pub mod output;
pub mod registry;
