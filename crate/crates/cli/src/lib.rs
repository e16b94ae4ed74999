//! Library half of the `drcn` command: sweeps, reference datasets and figure
//! regression. The binary in `main.rs` is a thin clap front end over this.

pub mod error;
pub mod figure;
pub mod format;
pub mod reference;
pub mod sweep;

pub use error::CliError;
