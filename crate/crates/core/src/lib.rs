//! Privacy-preserving coded edge computing for distributed linear inference.
//!
//! Users secret-share their data with a short Reed-Solomon code, edge nodes
//! multiply the shares by replicated (optionally coded) blocks of a public
//! matrix `W`, and users decode `W x` from a subset of the intermediate
//! results. The crate covers the coding layer, the cyclic assignment
//! designs, a latency model with an event-driven simulator for the three
//! scheme variants, a reconstructed nonprivate baseline, and a Monte Carlo
//! grid search over scheme parameters.

pub mod assignment;
pub mod baseline;
pub mod latency;
pub mod optimizer;
pub mod error;
pub mod field;
pub mod rs;
pub mod sim;
pub mod sss;

pub use error::{Error, Result};
