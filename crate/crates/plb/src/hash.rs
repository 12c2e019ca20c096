//! Project-wide hash primitive. Every commitment in the system (tree nodes,
//! root chain, event digests, key derivation) goes through SHA-256 with a
//! domain tag so values from different roles can never collide.

use sha2::{Digest, Sha256};

pub type Hash32 = [u8; 32];

pub const ZERO_HASH: Hash32 = [0u8; 32];

pub fn sha256(data: &[u8]) -> Hash32 {
    let mut h = Sha256::new();
    h.update(data);
    h.finalize().into()
}

pub fn sha256_parts(parts: &[&[u8]]) -> Hash32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Domain tags. Single source of truth so tests and implementation cannot
/// drift apart.
pub mod tag {
    /// Event digest over a key-exchange transcript.
    pub const EVENT: &[u8] = b"PLB-E";
    /// Shared-secret derivation from the raw key-agreement output.
    pub const SHARED_KEY: &[u8] = b"PLB-SK";
    /// Channel encryption keystream.
    pub const CHANNEL_ENC: &[u8] = b"PLB-ENC";
    /// Channel message authentication.
    pub const CHANNEL_MAC: &[u8] = b"PLB-MAC";
}
