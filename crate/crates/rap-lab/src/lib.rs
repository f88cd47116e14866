//! Random active path (RAP) model lab.
//!
//! Two halves, sharing seeds and file formats:
//!
//! * a diluted p-weight-interaction model on random sparse factor graphs,
//!   solved by belief propagation with Bethe thermodynamics, a
//!   zero-entropy critical point, and a frozen-ansatz energy curve
//!   ([`graph`], [`solver`], [`exact`]);
//! * a feedforward sigmoid/softmax network lab with dropconnect,
//!   random-feedback-alignment training, post-training dilution sweeps,
//!   path-product statistics, and Gaussian-sampling inference ([`net`],
//!   [`data`]).
//!
//! The `rap-lab` binary exposes each experiment as a seeded subcommand
//! emitting CSV; see the crate examples for library-level usage.

pub mod cli;
pub mod data;
pub mod error;
pub mod exact;
pub mod graph;
pub mod net;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
