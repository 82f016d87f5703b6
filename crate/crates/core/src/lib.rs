//! Collusion-resilient probabilistic fingerprinting for correlated sequential
//! data.
//!
//! A data owner holds one sequence of discrete states whose consecutive
//! points follow a publicly known pairwise correlation model. Every recipient
//! gets a copy in which a small, correlation-consistent set of points has been
//! altered; the pattern of alterations is the recipient's fingerprint. When a
//! copy leaks (possibly after flipping, removal, correlation repair, or
//! collusion), the owner attributes it to a recipient.
//!
//! Module map:
//!
//! * [`model`]: alphabets, sequences, fingerprint records and the sharing ledger.
//! * [`correlation`]: position-specific transition matrices; estimation and sampling.
//! * [`fingerprint`]: the naive scheme and the correlation-aware generators.
//! * [`boneh_shaw`]: `(c, r)`-codes embedded into fingerprinted positions.
//! * [`attacks`]: flipping, subset, correlation and collusion adversaries.
//! * [`detection`]: similarity, probabilistic and combined attribution.
//! * [`metrics`]: utility, accuracy and estimation error.
//! * [`privacy`]: the overlap-fraction hybrid mode and randomized response.
//! * [`harness`]: deterministic experiment runner and bundled experiments.

pub mod attacks;
pub mod boneh_shaw;
pub mod correlation;
pub mod detection;
mod error;
pub mod fingerprint;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod seed;

pub use error::{Error, Result};
pub use model::{
    Alphabet, FingerprintParams, FingerprintRecord, Sequence, SharingLedger, State, REMOVED,
};
