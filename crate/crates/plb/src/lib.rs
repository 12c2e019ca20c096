//! Key exchange with the help of a public ledger.
//!
//! A round-based append-only ledger publishes key-exchange commitments;
//! each party verifies that exactly one commitment — its own — exists for
//! the exchange's context in the relevant time window, which turns an
//! active man in the middle into a detectable double commitment.

pub mod channel;
pub mod dh;
pub mod encoding;
pub mod hash;
pub mod ledger;
pub mod merkle;
pub mod pair;
pub mod protocol;
pub mod sim;
pub mod types;
