//! Configuration, orchestration and file output for the `usc-scan` binary.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{Mode, Overrides, RunConfig};
pub use run::{run, RunOutcome};
