//! Batch front-end for `dynheight`: TOML problem files in, JSON reports and CSV sequences out.

pub mod config;
pub mod run;

pub use config::{ConfigError, Problem, ProblemConfig};
pub use run::{run, RunOptions, RunReport, SCHEMA};
