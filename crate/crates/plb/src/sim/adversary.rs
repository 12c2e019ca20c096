//! Adversary behaviors for the simulator. Adversaries sit on the channel
//! between the two honest parties and may also write to the ledger under
//! their own principal.

use crate::channel::{Message, MsgType, SealedChannel};
use crate::dh::{self, KeyPair, PublicKey};
use crate::hash::Hash32;
use crate::ledger::{Ledger, Principal};
use crate::protocol::{derive_event_digest, Role, Transcript};
use crate::sim::config::{MitmStrategy, SpamStrategy};
use crate::types::{Context, EventDigest};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

pub const ADVERSARY_PRINCIPAL: Principal = Principal(2);

/// Man in the middle: completes one key exchange with each honest party by
/// substituting its own public keys, relays (re-encrypting) everything it
/// can read, and commits its own event(s) per strategy.
pub struct MitmState {
    strategy: MitmStrategy,
    kp_to_initiator: Option<KeyPair>,
    kp_to_responder: Option<KeyPair>,
    initiator_pub: Option<PublicKey>,
    /// Channel with the initiator (adversary plays responder).
    chan_a: Option<SealedChannel>,
    /// Channel with the responder (adversary plays initiator).
    chan_b: Option<SealedChannel>,
    transcript_a: Option<Transcript>,
    transcript_b: Option<Transcript>,
    /// Known a priori for natural contexts, learned from the context
    /// transfer for out-of-band ones.
    context: Option<Context>,
    committed: bool,
}

impl MitmState {
    pub fn new(strategy: MitmStrategy, natural_context: Option<Context>) -> Self {
        MitmState {
            strategy,
            kp_to_initiator: None,
            kp_to_responder: None,
            initiator_pub: None,
            chan_a: None,
            chan_b: None,
            transcript_a: None,
            transcript_b: None,
            context: natural_context,
            committed: false,
        }
    }

    /// Both sides' session keys, for the soundness check in reports.
    pub fn session_keys(&self) -> (Option<Hash32>, Option<Hash32>) {
        (
            self.transcript_a.as_ref().map(|t| t.shared.0),
            self.transcript_b.as_ref().map(|t| t.shared.0),
        )
    }

    pub fn handle(
        &mut self,
        from: Role,
        msg: Message,
        ledger: &mut Ledger,
        rng: &mut ChaCha8Rng,
        log: &mut Vec<String>,
    ) -> Vec<(Role, Message)> {
        match (from, msg.msg_type) {
            (Role::Initiator, MsgType::KeyExchange) => {
                self.initiator_pub = Some(PublicKey(msg.body));
                let kp = dh::keygen(rng);
                let substituted = kp.public().as_bytes().to_vec();
                self.kp_to_responder = Some(kp);
                log.push("mitm: substituted initiator key".into());
                vec![(
                    Role::Responder,
                    Message { msg_type: MsgType::KeyExchange, body: substituted },
                )]
            }
            (Role::Responder, MsgType::KeyExchange) => {
                let responder_pub = PublicKey(msg.body);
                let kp_b = self.kp_to_responder.as_ref().expect("initiator key seen first");
                let shared_b = dh::derive(kp_b, &responder_pub).expect("honest key");
                self.transcript_b = Some(Transcript {
                    initiator_pub: kp_b.public().clone(),
                    responder_pub: responder_pub.clone(),
                    shared: shared_b,
                });
                self.chan_b = Some(SealedChannel::new(shared_b, Role::Initiator.byte()));
                let kp_a = dh::keygen(rng);
                let init_pub = self.initiator_pub.clone().expect("initiator key seen first");
                let shared_a = dh::derive(&kp_a, &init_pub).expect("honest key");
                self.transcript_a = Some(Transcript {
                    initiator_pub: init_pub,
                    responder_pub: kp_a.public().clone(),
                    shared: shared_a,
                });
                self.chan_a = Some(SealedChannel::new(shared_a, Role::Responder.byte()));
                let substituted = kp_a.public().as_bytes().to_vec();
                self.kp_to_initiator = Some(kp_a);
                log.push("mitm: substituted responder key".into());
                vec![(
                    Role::Initiator,
                    Message { msg_type: MsgType::KeyExchange, body: substituted },
                )]
            }
            (Role::Initiator, MsgType::ContextTransfer) => {
                // The adversary holds both session keys, so it can read and
                // re-encrypt the context in flight.
                let plain = self.chan_a.as_mut().unwrap().open(&msg).expect("holds session key");
                if let Ok(c) = Context::decode(&plain) {
                    log.push(format!("mitm: read context {}", c.display_code()));
                    self.context = Some(c);
                }
                let resealed = self.chan_b.as_mut().unwrap().seal(MsgType::ContextTransfer, &plain);
                vec![(Role::Responder, resealed)]
            }
            (Role::Initiator, MsgType::CommitOk) => {
                self.chan_a.as_mut().unwrap().open(&msg).expect("holds session key");
                if !self.committed {
                    self.commit_events(ledger, log);
                    self.committed = true;
                }
                let resealed = self.chan_b.as_mut().unwrap().seal(MsgType::CommitOk, &[]);
                vec![(Role::Responder, resealed)]
            }
            (from, MsgType::Abort) => {
                let (open_chan, seal_chan, to) = match from {
                    Role::Initiator => (&mut self.chan_a, &mut self.chan_b, Role::Responder),
                    Role::Responder => (&mut self.chan_b, &mut self.chan_a, Role::Initiator),
                };
                if let (Some(oc), Some(sc)) = (open_chan.as_mut(), seal_chan.as_mut()) {
                    if oc.open(&msg).is_ok() {
                        return vec![(to, sc.seal(MsgType::Abort, &[]))];
                    }
                }
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    fn commit_events(&mut self, ledger: &mut Ledger, log: &mut Vec<String>) {
        let Some(context) = self.context.clone() else {
            log.push("mitm: no context to commit under".into());
            return;
        };
        let digest_a = self.transcript_a.as_ref().map(derive_event_digest);
        let digest_b = self.transcript_b.as_ref().map(derive_event_digest);
        let to_commit: Vec<(&str, Option<EventDigest>)> = match self.strategy {
            MitmStrategy::CommitBoth => {
                vec![("initiator-facing", digest_a), ("responder-facing", digest_b)]
            }
            MitmStrategy::CommitOne => vec![("initiator-facing", digest_a)],
            MitmStrategy::CommitNone => Vec::new(),
        };
        if to_commit.is_empty() {
            log.push("mitm: strategy commit-none, no commitment".into());
        }
        for (label, digest) in to_commit {
            let Some(d) = digest else { continue };
            match ledger.submit(ADVERSARY_PRINCIPAL, context.clone(), d) {
                Ok(_) => log.push(format!("mitm: committed {label} event")),
                Err(e) => log.push(format!("mitm: commit {label} failed: {e}")),
            }
        }
    }
}

/// DoS spammer: floods the ledger with fake events, either under the known
/// honest context or by guessing out-of-band codes.
pub struct SpamState {
    strategy: SpamStrategy,
    remaining: u32,
    pub hits: u32,
    pub guesses_made: u32,
    app_id: Vec<u8>,
}

impl SpamState {
    pub fn new(strategy: SpamStrategy, count: u32, app_id: &[u8]) -> Self {
        SpamState { strategy, remaining: count, hits: 0, guesses_made: 0, app_id: app_id.to_vec() }
    }

    /// Called once per round; the rate limiter caps what actually lands.
    pub fn on_round(
        &mut self,
        honest_context: Option<&Context>,
        ledger: &mut Ledger,
        rng: &mut ChaCha8Rng,
        log: &mut Vec<String>,
    ) {
        let Some(honest) = honest_context else { return };
        while self.remaining > 0 {
            let target = match self.strategy {
                SpamStrategy::KnownContext => honest.clone(),
                SpamStrategy::Guess => {
                    let code = self.draw_code(ledger, rng);
                    Context::out_of_band(&self.app_id, &code).expect("non-empty code")
                }
            };
            let mut fake = [0u8; 32];
            rng.fill_bytes(&mut fake);
            match ledger.submit(ADVERSARY_PRINCIPAL, target.clone(), EventDigest(fake)) {
                Ok(_) => {
                    self.remaining -= 1;
                    if self.strategy == SpamStrategy::Guess {
                        self.guesses_made += 1;
                        if target == *honest {
                            self.hits += 1;
                            log.push("spam: guessed the honest context".into());
                        }
                    } else {
                        log.push("spam: fake event under honest context".into());
                    }
                }
                Err(e) => {
                    log.push(format!("spam: submission rejected: {e}"));
                    break; // rate-limited this round, resume next round
                }
            }
        }
    }

    fn draw_code(&self, ledger: &Ledger, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let cfg = ledger.config();
        match cfg.code_space {
            Some(space) => {
                let v = rng.gen_range(0..space.max(1));
                v.to_be_bytes()[8 - cfg.code_len..].to_vec()
            }
            None => {
                let mut code = vec![0u8; cfg.code_len];
                rng.fill_bytes(&mut code);
                code
            }
        }
    }
}
