//! Worked protocols: HTLC channels alone and composed, CRAB deposits and a
//! sandwichable MEV order.

pub mod htlc;
pub mod two_htlc;
pub mod wormhole;
pub mod crab;
pub mod mev;
