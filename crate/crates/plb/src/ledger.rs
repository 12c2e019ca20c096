//! In-process public ledger. Accepts event submissions, publishes them
//! round-by-round under chained Merkle roots, serves per-context
//! time-window queries with completeness proofs, and issues unused
//! out-of-band contexts.
//!
//! The ledger is honest-but-public: it enforces publication delay and rate
//! limits but never interprets events. One-exchange-per-context-per-period
//! is the verifier's job; attacker and victim events coexist here.

use crate::hash::sha256;
use crate::merkle::{self, CompletenessProof, TreeLeaf};
use crate::types::{key_range, Context, EventDigest, LedgerEvent, Round, RoundRoot, SubmitReceipt};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("per-principal submission cap exceeded for this round")]
    RateLimited,
    #[error("ledger unavailable")]
    LedgerUnavailable,
    #[error("no unused context found after bounded retries")]
    Exhausted,
    #[error("invalid query window")]
    InvalidWindow,
    #[error("query window intersects pruned history")]
    Pruned,
    #[error("prune cutoff lies inside the retention window")]
    RetentionViolation,
}

/// Simulator-level identity of a submitting party; stands in for the
/// ledger-side authentication hook that a deployment would add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Principal(pub u32);

#[derive(Debug, Clone)]
pub struct LedgerConfig {
    /// Max submissions per principal per round.
    pub rate_cap: u32,
    /// Period length in rounds; scopes context freshness and retention.
    pub period_rounds: u64,
    /// Events older than this many full periods may be pruned.
    pub retention_periods: u64,
    /// Byte length of issued out-of-band codes.
    pub code_len: usize,
    /// Optional cap on the code space (codes drawn from [0, code_space));
    /// `None` means the full 8*code_len-bit space.
    pub code_space: Option<u64>,
    /// Retries before `acquire_context` reports exhaustion.
    pub acquire_retries: u32,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            rate_cap: 8,
            period_rounds: 100,
            retention_periods: 2,
            code_len: 4,
            code_space: None,
            acquire_retries: 16,
        }
    }
}

#[derive(Debug, Clone)]
struct Record {
    round: Round,
    leaf: TreeLeaf,
    /// `None` once pruned; the leaf stays so historical roots remain
    /// recomputable and proofs for retained rounds keep verifying.
    event: Option<LedgerEvent>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QueryResponse {
    pub events: Vec<LedgerEvent>,
    pub proof: CompletenessProof,
    /// Round roots covering the query window, ordered by round.
    pub roots: Vec<RoundRoot>,
}

pub struct Ledger {
    cfg: LedgerConfig,
    round: Round,
    /// Queued (context, event) pairs accepted this round, in arrival order.
    queue: Vec<(Context, EventDigest)>,
    /// Published records, sorted ascending by leaf key.
    records: Vec<Record>,
    roots: Vec<RoundRoot>,
    submissions_this_round: HashMap<Principal, u32>,
    pruned_before: Round,
    /// Rounds in which submissions fail (simulated outage).
    fail_rounds: HashSet<Round>,
    rng: ChaCha8Rng,
}

impl Ledger {
    pub fn new(cfg: LedgerConfig, seed: u64) -> Self {
        let genesis = RoundRoot::genesis(merkle::empty_root());
        Ledger {
            cfg,
            round: 0,
            queue: Vec::new(),
            records: Vec::new(),
            roots: vec![genesis],
            submissions_this_round: HashMap::new(),
            pruned_before: 0,
            fail_rounds: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    /// Mark a round so that every submission during it fails.
    pub fn inject_submit_failure(&mut self, round: Round) {
        self.fail_rounds.insert(round);
    }

    pub fn current_time(&self) -> Round {
        self.round
    }

    pub fn latest_root(&self) -> RoundRoot {
        *self.roots.last().unwrap()
    }

    /// Accept a (context, event) pair for publication in the next round.
    /// Duplicates are stored as distinct events; the protocol layer treats
    /// more than one event as an abort signal regardless of payload.
    pub fn submit(
        &mut self,
        principal: Principal,
        context: Context,
        event: EventDigest,
    ) -> Result<SubmitReceipt, LedgerError> {
        if self.fail_rounds.contains(&self.round) {
            return Err(LedgerError::LedgerUnavailable);
        }
        let count = self.submissions_this_round.entry(principal).or_insert(0);
        if *count >= self.cfg.rate_cap {
            return Err(LedgerError::RateLimited);
        }
        *count += 1;
        self.queue.push((context.clone(), event));
        Ok(SubmitReceipt { context, event, accepted_round: self.round })
    }

    /// Publish everything queued and append a new chained root.
    pub fn advance_round(&mut self) -> RoundRoot {
        self.round += 1;
        for (seq, (context, event)) in self.queue.drain(..).enumerate() {
            let ev = LedgerEvent { context, event, round: self.round, seq: seq as u64 };
            let leaf = TreeLeaf { key: ev.leaf_key(), value_hash: sha256(&ev.leaf_encoding()) };
            let pos = self.records.partition_point(|r| r.leaf.key < leaf.key);
            self.records.insert(pos, Record { round: self.round, leaf, event: Some(ev) });
        }
        self.submissions_this_round.clear();
        let tree_root = merkle::build_tree(&self.leaves_up_to(self.round))
            .expect("records are kept sorted");
        let prev_hash = self.roots.last().unwrap().hash();
        let root = RoundRoot { round: self.round, tree_root, prev_hash };
        self.roots.push(root);
        root
    }

    fn leaves_up_to(&self, round: Round) -> Vec<TreeLeaf> {
        self.records.iter().filter(|r| r.round <= round).map(|r| r.leaf.clone()).collect()
    }

    /// Issue a context with a fresh oob code: no published or queued event
    /// carries it in the current period.
    pub fn acquire_context(&mut self, app_id: &[u8]) -> Result<Context, LedgerError> {
        let period_start = self.round - self.round % self.cfg.period_rounds;
        for _ in 0..self.cfg.acquire_retries {
            let code = self.draw_code();
            let ctx = Context::out_of_band(app_id, &code)
                .expect("code is non-empty");
            let published_in_period = self.records.iter().any(|r| {
                r.round >= period_start
                    && r.event.as_ref().map_or(false, |e| e.context == ctx)
            });
            let queued = self.queue.iter().any(|(c, _)| *c == ctx);
            if !published_in_period && !queued {
                return Ok(ctx);
            }
        }
        Err(LedgerError::Exhausted)
    }

    fn draw_code(&mut self) -> Vec<u8> {
        match self.cfg.code_space {
            Some(space) => {
                let v = self.rng.next_u64() % space.max(1);
                let bytes = v.to_be_bytes();
                bytes[8 - self.cfg.code_len..].to_vec()
            }
            None => {
                let mut code = vec![0u8; self.cfg.code_len];
                self.rng.fill_bytes(&mut code);
                code
            }
        }
    }

    /// Events for `context` with `from <= round <= to`, ordered by
    /// (round, seq), plus a completeness proof against the tree at round
    /// `to` and the covering round roots. Per-context only: nothing about
    /// other contexts is revealed beyond the root and proof hashes.
    pub fn query(
        &self,
        context: &Context,
        from: Round,
        to: Round,
    ) -> Result<QueryResponse, LedgerError> {
        if from > to || to > self.round {
            return Err(LedgerError::InvalidWindow);
        }
        if from < self.pruned_before {
            return Err(LedgerError::Pruned);
        }
        let leaves = self.leaves_up_to(to);
        let (lo, hi) = key_range(context, from, to);
        let (_, proof) = merkle::prove_range(&leaves, &lo, &hi)
            .expect("leaves sorted and lo <= hi");
        let events: Vec<LedgerEvent> = self
            .records
            .iter()
            .filter(|r| r.round >= from && r.round <= to)
            .filter_map(|r| r.event.clone())
            .filter(|e| e.context == *context)
            .collect();
        let roots = self.roots[from as usize..=to as usize].to_vec();
        Ok(QueryResponse { events, proof, roots })
    }

    /// Erase event payloads published before `before`. The root chain and
    /// leaf hashes are preserved so retained history keeps verifying.
    pub fn prune(&mut self, before: Round) -> Result<usize, LedgerError> {
        let retention = self.cfg.retention_periods * self.cfg.period_rounds;
        // prune(0) is always a no-op; otherwise the cutoff must lie
        // strictly below round - retention.
        if before > 0 && before >= self.round.saturating_sub(retention) {
            return Err(LedgerError::RetentionViolation);
        }
        let mut erased = 0;
        for r in &mut self.records {
            if r.round < before && r.event.is_some() {
                r.event = None;
                erased += 1;
            }
        }
        self.pruned_before = self.pruned_before.max(before);
        Ok(erased)
    }

    pub fn root_chain(&self) -> &[RoundRoot] {
        &self.roots
    }
}
