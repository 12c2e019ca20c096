//! Core domain types: contexts, event digests, published ledger events and
//! the chained round roots.

use crate::encoding::{put_bytes, put_u32, put_u64, Reader};
use crate::hash::{sha256, Hash32, ZERO_HASH};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ledger-native time unit. Round 0 is the genesis round.
pub type Round = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("context must have at least one non-empty field")]
    Empty,
    #[error("malformed context encoding")]
    Malformed,
}

/// The index key under which a key-exchange event is published: an
/// application id, optional endpoint identifiers, and an optional
/// out-of-band code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Context {
    app_id: Vec<u8>,
    endpoint_ids: Vec<Vec<u8>>,
    oob_code: Option<Vec<u8>>,
}

impl Context {
    pub fn new(
        app_id: Vec<u8>,
        endpoint_ids: Vec<Vec<u8>>,
        oob_code: Option<Vec<u8>>,
    ) -> Result<Self, ContextError> {
        let empty = app_id.is_empty()
            && endpoint_ids.iter().all(|e| e.is_empty())
            && oob_code.as_deref().map_or(true, |c| c.is_empty());
        if empty {
            return Err(ContextError::Empty);
        }
        // Normalize: an empty code is no code, keeping `encode` injective.
        let oob_code = oob_code.filter(|c| !c.is_empty());
        Ok(Context { app_id, endpoint_ids, oob_code })
    }

    /// Natural context from endpoint identifiers known to both sides.
    /// Identifiers are sorted so both directions of a call map to one
    /// context.
    pub fn natural(app_id: &[u8], endpoint_ids: &[&[u8]]) -> Result<Self, ContextError> {
        let mut ids: Vec<Vec<u8>> = endpoint_ids.iter().map(|e| e.to_vec()).collect();
        ids.sort();
        Context::new(app_id.to_vec(), ids, None)
    }

    /// Out-of-band context: an application id plus a user-compared code.
    pub fn out_of_band(app_id: &[u8], code: &[u8]) -> Result<Self, ContextError> {
        Context::new(app_id.to_vec(), Vec::new(), Some(code.to_vec()))
    }

    pub fn app_id(&self) -> &[u8] {
        &self.app_id
    }

    pub fn oob_code(&self) -> Option<&[u8]> {
        self.oob_code.as_deref()
    }

    /// Canonical encoding: enc(app_id) || u32(count) || enc(each id) ||
    /// enc(oob_code or empty). Length prefixes make the encoding injective.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &self.app_id);
        put_u32(&mut out, self.endpoint_ids.len() as u32);
        for id in &self.endpoint_ids {
            put_bytes(&mut out, id);
        }
        put_bytes(&mut out, self.oob_code.as_deref().unwrap_or(&[]));
        out
    }

    /// Inverse of `encode`. An empty trailing field decodes as "no oob code"
    /// only when the context had none; `encode` maps `Some(vec![])` and
    /// `None` to the same bytes, which is fine because `new` rejects
    /// all-empty contexts and an empty code never passes freshness checks.
    pub fn decode(buf: &[u8]) -> Result<Self, ContextError> {
        let mut r = Reader::new(buf);
        let app_id = r.bytes().ok_or(ContextError::Malformed)?.to_vec();
        let n = r.u32().ok_or(ContextError::Malformed)?;
        let mut endpoint_ids = Vec::with_capacity(n as usize);
        for _ in 0..n {
            endpoint_ids.push(r.bytes().ok_or(ContextError::Malformed)?.to_vec());
        }
        let code = r.bytes().ok_or(ContextError::Malformed)?;
        if !r.done() {
            return Err(ContextError::Malformed);
        }
        let oob_code = if code.is_empty() { None } else { Some(code.to_vec()) };
        Context::new(app_id, endpoint_ids, oob_code)
    }

    /// Human-comparable rendering of the oob code: 6 base-32 characters from
    /// the first 30 bits of the code. Display only; comparisons inside the
    /// protocol always use the full code bytes.
    pub fn display_code(&self) -> String {
        const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";
        let code = self.oob_code.as_deref().unwrap_or(&[]);
        let mut bits: u64 = 0;
        for i in 0..4 {
            bits = (bits << 8) | *code.get(i).unwrap_or(&0) as u64;
        }
        (0..6)
            .map(|i| ALPHABET[((bits >> (32 - 5 * (i + 1))) & 0x1f) as usize] as char)
            .collect()
    }
}

/// 32-byte digest of a key exchange's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventDigest(pub Hash32);

impl EventDigest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

/// A published (context, event) pair. `round` is the round in which the
/// event was published, strictly greater than its submission round. `seq`
/// is the arrival order within that round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub context: Context,
    pub event: EventDigest,
    pub round: Round,
    pub seq: u64,
}

impl LedgerEvent {
    /// Tree key: enc(Context) || u64(round) || u64(seq). Byte-lexicographic
    /// order groups a context's events together, ordered by (round, seq).
    pub fn leaf_key(&self) -> Vec<u8> {
        leaf_key(&self.context, self.round, self.seq)
    }

    /// Leaf encoding: enc(Context) || digest || u64(round) || u64(seq).
    pub fn leaf_encoding(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &self.context.encode());
        out.extend_from_slice(self.event.as_bytes());
        put_u64(&mut out, self.round);
        put_u64(&mut out, self.seq);
        out
    }
}

pub fn leaf_key(context: &Context, round: Round, seq: u64) -> Vec<u8> {
    let mut out = context.encode();
    put_u64(&mut out, round);
    put_u64(&mut out, seq);
    out
}

/// Smallest and largest possible keys for events under `context` in the
/// round window `[from, to]`.
pub fn key_range(context: &Context, from: Round, to: Round) -> (Vec<u8>, Vec<u8>) {
    (leaf_key(context, from, 0), leaf_key(context, to, u64::MAX))
}

/// Per-round public commitment: the root of the ordered tree over all
/// events published up to and including `round`, chained to the previous
/// round's root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRoot {
    pub round: Round,
    pub tree_root: Hash32,
    pub prev_hash: Hash32,
}

impl RoundRoot {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u64(&mut out, self.round);
        out.extend_from_slice(&self.tree_root);
        out.extend_from_slice(&self.prev_hash);
        out
    }

    pub fn hash(&self) -> Hash32 {
        sha256(&self.encode())
    }

    pub fn genesis(tree_root: Hash32) -> Self {
        RoundRoot { round: 0, tree_root, prev_hash: ZERO_HASH }
    }
}

/// Receipt returned by `submit`; publication happens at
/// `accepted_round + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmitReceipt {
    pub context: Context,
    pub event: EventDigest,
    pub accepted_round: Round,
}
