//! Command-line harness for the regularized Kimura solver: run
//! configuration, CSV and SVG output, and the acceptance suite.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod suite;
pub mod svg;

pub use error::{CliError, CliResult};

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "KIMURA_OUTPUT_DIR";
