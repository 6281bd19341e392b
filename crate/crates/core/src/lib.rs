//! Frequency-resolved N-photon correlations of a qubit ultrastrongly coupled
//! to a single cavity mode, computed with the perturbative sensor method and
//! checked against explicit sensors.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod exec;
pub mod fock;
pub mod liouville;
pub mod oracle;
pub mod peaks;
pub mod rabi;

pub use error::{Error, Result};

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
