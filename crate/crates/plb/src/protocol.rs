//! The two public-ledger-based key-exchange protocols as per-party state
//! machines over an abstract ledger, channel and user.
//!
//! Variant `Oob` (six phases): unauthenticated key exchange, context
//! acquirement from the ledger, user comparison of the displayed context,
//! ledger commitment by the initiator, per-party commitment verification
//! against the query window [start - delta, query time], and a final user
//! confirmation that both sides succeeded.
//!
//! Variant `Natural` (three phases): the context is pre-agreed (sorted
//! endpoint identifiers), a timing gate keeps the run inside one time
//! period, and verification covers all events for the context in the
//! current period. No user in the loop.

use crate::channel::{Message, MsgType, SealedChannel};
use crate::dh::{self, KeyPair, PublicKey, SharedSecret};
use crate::encoding::put_bytes;
use crate::hash::{sha256, sha256_parts, tag};
use crate::ledger::{LedgerError, QueryResponse};
use crate::merkle::{verify_range, verify_root_chain, TreeLeaf};
use crate::types::{key_range, Context, EventDigest, Round, SubmitReceipt};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Oob,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn byte(self) -> u8 {
        match self {
            Role::Initiator => 0,
            Role::Responder => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("timing parameters must satisfy 0 < 2*alpha < w")]
    BadTiming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    pub variant: Variant,
    /// Period length in rounds.
    pub w: u64,
    /// Timeout: maximum duration of a key exchange, in rounds.
    pub alpha: u64,
    /// Bound on the spread between the two parties' start-time
    /// observations, in rounds.
    pub delta: u64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.alpha == 0 || 2 * self.alpha >= self.w {
            return Err(ParamsError::BadTiming);
        }
        Ok(())
    }
}

/// Timing gate for the natural-context protocol: a key exchange may not
/// start within `alpha` of either period boundary, so it cannot span two
/// periods. Pure and period-local.
pub fn may_start(t: Round, params: &ProtocolParams) -> bool {
    let offset = t % params.w;
    offset > params.alpha && offset < params.w - params.alpha
}

/// Both parties' view of the completed unauthenticated exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub initiator_pub: PublicKey,
    pub responder_pub: PublicKey,
    pub shared: SharedSecret,
}

/// The event committed to the ledger: a hash of the two public keys in
/// fixed order. The shared secret itself stays off the ledger.
pub fn derive_event_digest(t: &Transcript) -> EventDigest {
    let mut enc = Vec::new();
    put_bytes(&mut enc, t.initiator_pub.as_bytes());
    put_bytes(&mut enc, t.responder_pub.as_bytes());
    EventDigest(sha256_parts(&[tag::EVENT, &enc]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    ProofInvalid,
    MultipleEvents,
    EventMismatch,
    CommitFailed,
    Timeout,
    TimingGate,
    UserRejected,
    PeerAborted,
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Accepted(SharedSecret),
    Aborted(AbortReason),
}

/// Reporting-level protocol phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    KeyExchange,
    ContextAcquire,
    ContextCompare,
    Commit,
    Verify,
    Confirm,
    Done,
}

/// Decide on a verified query response. Total over responses: every
/// defect maps to an abort reason. An empty list is an abort, not a retry:
/// the committer believed the commitment succeeded, so absence means
/// window misalignment or a ledger fault.
pub fn verify_commitment(
    expected: &EventDigest,
    context: &Context,
    window: (Round, Round),
    response: &QueryResponse,
) -> Result<(), AbortReason> {
    let (from, to) = window;
    let roots = &response.roots;
    if roots.is_empty()
        || roots.first().unwrap().round != from
        || roots.last().unwrap().round != to
        || !verify_root_chain(roots)
    {
        return Err(AbortReason::ProofInvalid);
    }
    let (lo, hi) = key_range(context, from, to);
    let leaves: Vec<TreeLeaf> = response
        .events
        .iter()
        .map(|e| TreeLeaf { key: e.leaf_key(), value_hash: sha256(&e.leaf_encoding()) })
        .collect();
    let root = roots.last().unwrap().tree_root;
    if !verify_range(&root, &lo, &hi, &leaves, &response.proof) {
        return Err(AbortReason::ProofInvalid);
    }
    // Events outside the claimed window or under a different context would
    // produce mismatching leaf keys above; re-check the plain fields anyway.
    if response
        .events
        .iter()
        .any(|e| e.context != *context || e.round < from || e.round > to)
    {
        return Err(AbortReason::ProofInvalid);
    }
    match response.events.as_slice() {
        [] => Err(AbortReason::EventMismatch),
        [only] if only.event == *expected => Ok(()),
        [_] => Err(AbortReason::EventMismatch),
        _ => Err(AbortReason::MultipleEvents),
    }
}

/// Ledger surface a party needs. The simulator binds this to its in-process
/// ledger with the party's principal; the pairing demo binds it to a socket
/// client.
pub trait LedgerApi {
    fn current_time(&mut self) -> Round;
    fn submit(&mut self, context: Context, event: EventDigest)
        -> Result<SubmitReceipt, LedgerError>;
    fn query(&mut self, context: &Context, from: Round, to: Round)
        -> Result<QueryResponse, LedgerError>;
    fn acquire_context(&mut self, app_id: &[u8]) -> Result<Context, LedgerError>;
}

/// Per-step environment: at most the driver's pending input plus room for
/// outgoing messages.
pub struct StepCtx<'a> {
    pub ledger: &'a mut dyn LedgerApi,
    pub inbox: &'a mut std::collections::VecDeque<Message>,
    pub outbox: &'a mut Vec<Message>,
    /// True once the user has pressed "start" on this device (Oob only).
    pub start_pressed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// Made progress; call again within the same round.
    Progress,
    /// Waiting on input or time.
    Idle,
    /// Outcome set (or awaiting final user confirmation).
    Settled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Start,
    AwaitPeerKey,
    AwaitContext,
    AwaitStartPress,
    Commit,
    AwaitCommitOk { deadline: Round },
    AwaitPublication,
    QueryVerify,
    AwaitConfirmation,
    Done,
}

const QUERY_RETRIES: u32 = 2;

pub struct Party {
    pub role: Role,
    params: ProtocolParams,
    app_id: Vec<u8>,
    /// Local clock = ledger round + offset (Natural variant clock model).
    clock_offset: i64,
    state: State,
    keypair: Option<KeyPair>,
    transcript: Option<Transcript>,
    channel: Option<SealedChannel>,
    context: Option<Context>,
    /// S_A / S_B: ledger time at the start press (Oob) or local time at
    /// key-exchange start (Natural).
    start_time: Option<Round>,
    notice_round: Option<Round>,
    retries_left: u32,
    outcome: Option<Outcome>,
    /// Context code shown on this device's screen, if any.
    pub displayed_context: Option<Context>,
    /// Size of the event list seen at the last verification query.
    pub last_events_seen: Option<usize>,
    /// Window used for the last verification query.
    pub last_window: Option<(Round, Round)>,
}

impl Party {
    pub fn new(
        role: Role,
        params: ProtocolParams,
        app_id: &[u8],
        natural_context: Option<Context>,
        clock_offset: i64,
    ) -> Self {
        debug_assert!(params.validate().is_ok());
        debug_assert_eq!(params.variant == Variant::Natural, natural_context.is_some());
        Party {
            role,
            params,
            app_id: app_id.to_vec(),
            clock_offset,
            state: State::Start,
            keypair: None,
            transcript: None,
            channel: None,
            context: natural_context,
            start_time: None,
            notice_round: None,
            retries_left: QUERY_RETRIES,
            outcome: None,
            displayed_context: None,
            last_events_seen: None,
            last_window: None,
        }
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn shared_secret(&self) -> Option<SharedSecret> {
        self.transcript.as_ref().map(|t| t.shared)
    }

    pub fn context(&self) -> Option<&Context> {
        self.context.as_ref()
    }

    pub fn start_time(&self) -> Option<Round> {
        self.start_time
    }

    /// True once the machine has settled: final outcome set, or accepted
    /// pending user confirmation.
    pub fn settled(&self) -> bool {
        matches!(self.state, State::Done | State::AwaitConfirmation)
    }

    pub fn awaiting_confirmation(&self) -> bool {
        self.state == State::AwaitConfirmation
    }

    /// Final user confirmation (Oob phase six).
    pub fn finalize_confirmation(&mut self, confirmed: bool) {
        if self.state != State::AwaitConfirmation {
            return;
        }
        if confirmed {
            let shared = self.transcript.as_ref().expect("transcript set").shared;
            self.settle(Outcome::Accepted(shared));
        } else {
            self.settle(Outcome::Aborted(AbortReason::UserRejected));
        }
    }

    /// Driver-side cutoff for runs stuck waiting on a peer that never
    /// answers (e.g. a suppressed party under impersonation).
    pub fn force_timeout(&mut self) {
        if !self.settled() {
            self.abort(AbortReason::Timeout);
        }
    }

    pub fn phase(&self) -> Phase {
        match self.state {
            State::Start | State::AwaitPeerKey => Phase::KeyExchange,
            State::AwaitContext => Phase::ContextAcquire,
            State::AwaitStartPress => Phase::ContextCompare,
            State::Commit | State::AwaitCommitOk { .. } => Phase::Commit,
            State::AwaitPublication | State::QueryVerify => Phase::Verify,
            State::AwaitConfirmation => Phase::Confirm,
            State::Done => Phase::Done,
        }
    }

    fn local_time(&self, ledger_round: Round) -> Round {
        (ledger_round as i64 + self.clock_offset).max(0) as u64
    }

    fn settle(&mut self, outcome: Outcome) {
        if self.outcome.is_none() {
            self.outcome = Some(outcome);
        }
        self.state = State::Done;
    }

    fn abort(&mut self, reason: AbortReason) {
        self.settle(Outcome::Aborted(reason));
    }

    /// Abort and notify the peer over the secure channel, if one exists.
    fn abort_notify(&mut self, reason: AbortReason, outbox: &mut Vec<Message>) {
        if let Some(chan) = self.channel.as_mut() {
            outbox.push(chan.seal(MsgType::Abort, &[]));
        }
        self.settle(Outcome::Aborted(reason));
    }

    /// Advance the machine. Call repeatedly within a round until it stops
    /// reporting `Progress`.
    pub fn step(&mut self, rng: &mut dyn RngCore, ctx: &mut StepCtx) -> StepStatus {
        if self.settled() {
            return StepStatus::Settled;
        }
        let now = ctx.ledger.current_time();
        // Natural variant: the whole exchange must finish by start + alpha.
        if self.params.variant == Variant::Natural {
            if let Some(start) = self.start_time {
                if self.local_time(now) > start + self.params.alpha {
                    self.abort(AbortReason::Timeout);
                    return StepStatus::Settled;
                }
            }
        }
        match self.state {
            State::Start => {
                let local = self.local_time(now);
                if self.params.variant == Variant::Natural {
                    if !may_start(local, &self.params) {
                        self.abort(AbortReason::TimingGate);
                        return StepStatus::Settled;
                    }
                    self.start_time = Some(local);
                }
                self.keypair = Some(dh::keygen(rng));
                if self.role == Role::Initiator {
                    let pk = self.keypair.as_ref().unwrap().public().as_bytes().to_vec();
                    ctx.outbox.push(Message { msg_type: MsgType::KeyExchange, body: pk });
                }
                self.state = State::AwaitPeerKey;
                StepStatus::Progress
            }
            State::AwaitPeerKey => {
                let Some(msg) = ctx.inbox.pop_front() else { return StepStatus::Idle };
                if msg.msg_type != MsgType::KeyExchange {
                    return StepStatus::Idle; // ignore stray traffic pre-channel
                }
                let peer = PublicKey(msg.body);
                let kp = self.keypair.as_ref().unwrap();
                let shared = match dh::derive(kp, &peer) {
                    Ok(s) => s,
                    Err(_) => {
                        self.abort(AbortReason::ProofInvalid);
                        return StepStatus::Settled;
                    }
                };
                if self.role == Role::Responder {
                    let pk = kp.public().as_bytes().to_vec();
                    ctx.outbox.push(Message { msg_type: MsgType::KeyExchange, body: pk });
                }
                let (init_pub, resp_pub) = match self.role {
                    Role::Initiator => (kp.public().clone(), peer),
                    Role::Responder => (peer, kp.public().clone()),
                };
                self.transcript =
                    Some(Transcript { initiator_pub: init_pub, responder_pub: resp_pub, shared });
                self.channel = Some(SealedChannel::new(shared, self.role.byte()));
                match (self.params.variant, self.role) {
                    (Variant::Oob, Role::Initiator) => {
                        // Context acquirement, then transfer under SK.
                        match ctx.ledger.acquire_context(&self.app_id) {
                            Ok(c) => {
                                let enc = c.encode();
                                let chan = self.channel.as_mut().unwrap();
                                ctx.outbox.push(chan.seal(MsgType::ContextTransfer, &enc));
                                self.displayed_context = Some(c.clone());
                                self.context = Some(c);
                                self.state = State::AwaitStartPress;
                            }
                            Err(_) => self.abort_notify(AbortReason::CommitFailed, ctx.outbox),
                        }
                    }
                    (Variant::Oob, Role::Responder) => self.state = State::AwaitContext,
                    (Variant::Natural, Role::Initiator) => self.state = State::Commit,
                    (Variant::Natural, Role::Responder) => {
                        let deadline =
                            self.start_time.unwrap().saturating_add(self.params.alpha);
                        self.state = State::AwaitCommitOk { deadline };
                    }
                }
                StepStatus::Progress
            }
            State::AwaitContext => {
                let Some(msg) = ctx.inbox.pop_front() else { return StepStatus::Idle };
                match msg.msg_type {
                    MsgType::ContextTransfer => {
                        let chan = self.channel.as_mut().unwrap();
                        let plain = match chan.open(&msg) {
                            Ok(p) => p,
                            Err(_) => {
                                self.abort(AbortReason::ProofInvalid);
                                return StepStatus::Settled;
                            }
                        };
                        match Context::decode(&plain) {
                            Ok(c) => {
                                self.displayed_context = Some(c.clone());
                                self.context = Some(c);
                                self.state = State::AwaitStartPress;
                                StepStatus::Progress
                            }
                            Err(_) => {
                                self.abort(AbortReason::ProofInvalid);
                                StepStatus::Settled
                            }
                        }
                    }
                    MsgType::Abort => {
                        self.abort(AbortReason::PeerAborted);
                        StepStatus::Settled
                    }
                    _ => StepStatus::Idle,
                }
            }
            State::AwaitStartPress => {
                if !ctx.start_pressed {
                    return StepStatus::Idle;
                }
                // Both sides query the ledger clock at the press.
                self.start_time = Some(now);
                match self.role {
                    Role::Initiator => self.state = State::Commit,
                    Role::Responder => {
                        self.state =
                            State::AwaitCommitOk { deadline: now + self.params.alpha };
                    }
                }
                StepStatus::Progress
            }
            State::Commit => {
                let digest = derive_event_digest(self.transcript.as_ref().unwrap());
                let context = self.context.clone().expect("context set before commit");
                match ctx.ledger.submit(context, digest) {
                    Ok(receipt) => {
                        self.notice_round = Some(receipt.accepted_round);
                        let chan = self.channel.as_mut().unwrap();
                        ctx.outbox.push(chan.seal(MsgType::CommitOk, &[]));
                        self.state = State::AwaitPublication;
                        StepStatus::Progress
                    }
                    Err(_) => {
                        self.abort_notify(AbortReason::CommitFailed, ctx.outbox);
                        StepStatus::Settled
                    }
                }
            }
            State::AwaitCommitOk { deadline } => {
                if let Some(msg) = ctx.inbox.pop_front() {
                    match msg.msg_type {
                        MsgType::CommitOk => {
                            let chan = self.channel.as_mut().unwrap();
                            if chan.open(&msg).is_err() {
                                self.abort(AbortReason::ProofInvalid);
                                return StepStatus::Settled;
                            }
                            self.notice_round = Some(now);
                            self.state = State::AwaitPublication;
                            return StepStatus::Progress;
                        }
                        MsgType::Abort => {
                            self.abort(AbortReason::PeerAborted);
                            return StepStatus::Settled;
                        }
                        _ => {}
                    }
                }
                let clock = match self.params.variant {
                    Variant::Oob => now,
                    Variant::Natural => self.local_time(now),
                };
                if clock > deadline {
                    self.abort(AbortReason::Timeout);
                    return StepStatus::Settled;
                }
                StepStatus::Idle
            }
            State::AwaitPublication => {
                // Round-based publication: the committed event becomes
                // visible one round after acceptance.
                if now > self.notice_round.unwrap() {
                    self.state = State::QueryVerify;
                    StepStatus::Progress
                } else {
                    StepStatus::Idle
                }
            }
            State::QueryVerify => {
                let window = self.query_window(now);
                let context = self.context.clone().unwrap();
                let response = match ctx.ledger.query(&context, window.0, window.1) {
                    Ok(r) => r,
                    Err(_) => {
                        self.abort(AbortReason::ProofInvalid);
                        return StepStatus::Settled;
                    }
                };
                if response.events.is_empty() && self.retries_left > 0 {
                    // Tolerate the publication delay; retry next round.
                    self.retries_left -= 1;
                    return StepStatus::Idle;
                }
                self.last_events_seen = Some(response.events.len());
                self.last_window = Some(window);
                let expected = derive_event_digest(self.transcript.as_ref().unwrap());
                match verify_commitment(&expected, &context, window, &response) {
                    Ok(()) => match self.params.variant {
                        Variant::Oob => {
                            self.state = State::AwaitConfirmation;
                            StepStatus::Settled
                        }
                        Variant::Natural => {
                            let shared = self.transcript.as_ref().unwrap().shared;
                            self.settle(Outcome::Accepted(shared));
                            StepStatus::Settled
                        }
                    },
                    Err(reason) => {
                        self.abort(reason);
                        StepStatus::Settled
                    }
                }
            }
            State::AwaitConfirmation | State::Done => StepStatus::Settled,
        }
    }

    /// Verification window. Oob: [S - delta, q]. Natural: the party's view
    /// of the current period, [period start, q].
    fn query_window(&self, now: Round) -> (Round, Round) {
        match self.params.variant {
            Variant::Oob => {
                let start = self.start_time.expect("start recorded");
                (start.saturating_sub(self.params.delta), now)
            }
            Variant::Natural => {
                let local = self.local_time(now);
                let period_start = local - local % self.params.w;
                // Translate the local period start back to ledger time as
                // well as this party can (it believes its clock).
                (period_start.min(now), now)
            }
        }
    }
}
