//! Exact and sampled simulation of the quantum pigeonhole experiment.
//!
//! * [`qcore`]: state vectors, gates, projectors and Z measurements.
//! * [`circuits`]: instruction-level circuits with feed-forward and
//!   post-selection, a text format, exact branch enumeration and sampling.
//! * [`protocols`]: parity-measurement schemes and the pigeonhole experiment.
//! * [`locc`]: site-annotated execution with locality and causal-order audits.
//! * [`lhv`]: hidden-variable models and the exhaustive disturbance-rule scan.
//! * [`cli`]: the command implementations behind the `qpigeon` binary.

pub mod circuits;
pub mod cli;
pub mod error;
pub mod lhv;
pub mod locc;
pub mod protocols;
pub mod qcore;

pub use error::{Error, Result};
