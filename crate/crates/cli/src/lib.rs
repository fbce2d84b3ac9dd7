//! Data generation, experiment runs and verification suites for the
//! `gepey` command-line tool.

pub mod error;
pub mod gen;
pub mod io;
pub mod run;
pub mod verify;

pub use error::{CliError, Result};
