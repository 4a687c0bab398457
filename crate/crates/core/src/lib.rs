//! Cross-layer game-theoretic analysis of blockchain protocols.
//!
//! Applications emit transaction triples, the network forwards them to
//! miners, and miners playing the censor-only game decide which conflicting
//! transaction confirms. Protocols are checked for incentive compatibility
//! under collusion, alone and when composed.

pub mod cases;
pub mod comg;
pub mod compose;
pub mod doc;
pub mod error;
pub mod extform;
pub mod netgame;
pub mod scalar;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use scalar::{Rational, Scalar};
pub use types::*;

/// Exact hashrate distribution.
pub type ExactHashrate = HashrateDistribution<Rational>;
/// Floating-point hashrate distribution.
pub type FloatHashrate = HashrateDistribution<f64>;
/// Exact settlement rules.
pub type ExactRules = SettlementRules<Rational>;
