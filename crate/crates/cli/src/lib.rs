//! Batch experiments over the subnav simulator: config files, run
//! directories, reports and plot tables.

pub mod config;
pub mod error;
pub mod logs;
pub mod plotdata;
pub mod report;
pub mod runner;

pub use error::{CliError, Result};
