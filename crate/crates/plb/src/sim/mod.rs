//! Deterministic discrete-event simulator: two protocol parties, a
//! simulated user, per-party clock offsets, message scheduling with one
//! round per hop, and pluggable adversaries. Identical configs produce
//! byte-identical reports.

pub mod adversary;
pub mod config;

use crate::channel::Message;
use crate::hash::sha256_parts;
use crate::ledger::{Ledger, LedgerConfig, LedgerError, Principal, QueryResponse};
use crate::protocol::{
    LedgerApi, Outcome, Party, Phase, Role, StepCtx, StepStatus, Variant,
};
use crate::types::{Context, EventDigest, Round, SubmitReceipt};
use adversary::{MitmState, SpamState, ADVERSARY_PRINCIPAL};
use config::{AdversaryKind, ConfigError, ScenarioConfig, UserBehavior};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::VecDeque;

const APP_ID: &[u8] = b"plb-sim";

/// Structured outcome of a single simulated run. Serialized as one JSON
/// object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub variant: String,
    pub seed: u64,
    pub run: u32,
    pub outcome_initiator: String,
    pub outcome_responder: String,
    pub abort_reason_initiator: Option<String>,
    pub abort_reason_responder: Option<String>,
    /// Defined only when both parties accepted.
    pub keys_equal: Option<bool>,
    pub events_in_window: u64,
    pub impersonation_undetected: bool,
    pub adversary_log: Vec<String>,
    pub phase_initiator: String,
    pub phase_responder: String,
    pub rounds_elapsed: u64,
}

impl RunReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn both_accepted(&self) -> bool {
        self.outcome_initiator == "accepted" && self.outcome_responder == "accepted"
    }

    /// The one condition no adversary may ever cause.
    pub fn soundness_violation(&self) -> bool {
        self.both_accepted() && self.keys_equal == Some(false)
    }
}

/// Binds the in-process ledger to a party's principal.
struct LedgerHandle<'a> {
    ledger: &'a mut Ledger,
    principal: Principal,
}

impl LedgerApi for LedgerHandle<'_> {
    fn current_time(&mut self) -> Round {
        self.ledger.current_time()
    }

    fn submit(
        &mut self,
        context: Context,
        event: EventDigest,
    ) -> Result<SubmitReceipt, LedgerError> {
        self.ledger.submit(self.principal, context, event)
    }

    fn query(
        &mut self,
        context: &Context,
        from: Round,
        to: Round,
    ) -> Result<QueryResponse, LedgerError> {
        self.ledger.query(context, from, to)
    }

    fn acquire_context(&mut self, app_id: &[u8]) -> Result<Context, LedgerError> {
        self.ledger.acquire_context(app_id)
    }
}

enum AdvState {
    None,
    Mitm(MitmState),
    Impersonate { target: Role, machine: Box<Party> },
    Spam(SpamState),
}

struct ExchangeResult {
    outcomes: [Outcome; 2],
    phases: [Phase; 2],
    keys_equal: Option<bool>,
    events_in_window: u64,
    rounds_elapsed: u64,
    log: Vec<String>,
    impersonation_undetected: bool,
}

/// Execute `runs` independent runs; each run owns its ledger, parties and
/// RNG stream derived from H(seed || run index).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<RunReport>, ConfigError> {
    cfg.validate()?;
    Ok((0..cfg.runs).map(|run| run_once(cfg, run)).collect())
}

/// Two back-to-back honest exchanges under the same natural context on one
/// ledger; the second starts either in the same period or in the next one.
pub fn run_reuse_scenario(
    cfg: &ScenarioConfig,
    next_period: bool,
) -> Result<Vec<(RunReport, RunReport)>, ConfigError> {
    cfg.validate()?;
    if cfg.variant != Variant::Natural {
        return Err(ConfigError::Invalid("context reuse applies to the natural variant".into()));
    }
    let mut out = Vec::with_capacity(cfg.runs as usize);
    for run in 0..cfg.runs {
        let mut rng = ChaCha8Rng::from_seed(run_seed(cfg.seed, run));
        let mut ledger = make_ledger(cfg, &mut rng);
        advance_to(&mut ledger, start_round_for(cfg));
        let ctx = natural_context();
        let first = run_exchange(cfg, &mut ledger, &mut rng, Some(ctx.clone()), AdversaryKind::None);
        if next_period {
            let w = cfg.params.w;
            let target = (ledger.current_time() / w + 1) * w + w / 2;
            advance_to(&mut ledger, target);
        }
        let second =
            run_exchange(cfg, &mut ledger, &mut rng, Some(ctx.clone()), AdversaryKind::None);
        out.push((
            build_report(cfg, run, first),
            build_report(cfg, run, second),
        ));
    }
    Ok(out)
}

fn run_seed(seed: u64, run: u32) -> [u8; 32] {
    sha256_parts(&[&seed.to_be_bytes(), &(run as u64).to_be_bytes()])
}

fn make_ledger(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Ledger {
    let lc = LedgerConfig {
        rate_cap: cfg.rate_cap.unwrap_or_else(|| LedgerConfig::default().rate_cap),
        period_rounds: cfg.params.w,
        code_len: cfg.code_len.unwrap_or_else(|| LedgerConfig::default().code_len),
        code_space: cfg.code_space,
        ..Default::default()
    };
    Ledger::new(lc, rng.next_u64())
}

fn advance_to(ledger: &mut Ledger, round: Round) {
    while ledger.current_time() < round {
        ledger.advance_round();
    }
}

/// The exchange starts a few rounds in (out-of-band) or mid-period
/// (natural, clear of the timing gate).
fn start_round_for(cfg: &ScenarioConfig) -> Round {
    match cfg.variant {
        Variant::Oob => 3,
        Variant::Natural => cfg.params.w / 2,
    }
}

fn natural_context() -> Context {
    Context::natural(APP_ID, &[b"alice", b"bob"]).expect("non-empty")
}

fn run_once(cfg: &ScenarioConfig, run: u32) -> RunReport {
    let mut rng = ChaCha8Rng::from_seed(run_seed(cfg.seed, run));
    let mut ledger = make_ledger(cfg, &mut rng);
    let start = start_round_for(cfg);
    advance_to(&mut ledger, start);
    for &r in &cfg.submit_fail_rounds {
        ledger.inject_submit_failure(start + r);
    }
    let natural_ctx = (cfg.variant == Variant::Natural).then(natural_context);
    let result = run_exchange(cfg, &mut ledger, &mut rng, natural_ctx, cfg.adversary);
    build_report(cfg, run, result)
}

fn role_index(role: Role) -> usize {
    match role {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

fn run_exchange(
    cfg: &ScenarioConfig,
    ledger: &mut Ledger,
    rng: &mut ChaCha8Rng,
    natural_ctx: Option<Context>,
    adversary: AdversaryKind,
) -> ExchangeResult {
    let params = cfg.params;
    let start = ledger.current_time();
    let max_round = start + params.w;
    let mut parties = [
        Party::new(Role::Initiator, params, APP_ID, natural_ctx.clone(), cfg.clock_offset_initiator),
        Party::new(Role::Responder, params, APP_ID, natural_ctx.clone(), cfg.clock_offset_responder),
    ];
    let mut inboxes: [VecDeque<Message>; 2] = [VecDeque::new(), VecDeque::new()];
    let mut adv_inbox: VecDeque<Message> = VecDeque::new();
    // (deliver_round, destination, message); destination 0/1 = party, 2 =
    // adversary machine. One round per message hop.
    let mut pending: Vec<(Round, usize, Message)> = Vec::new();
    let mut log: Vec<String> = Vec::new();
    let mut adv = match adversary {
        AdversaryKind::None => AdvState::None,
        AdversaryKind::Mitm(strategy) => {
            AdvState::Mitm(MitmState::new(strategy, natural_ctx.clone()))
        }
        AdversaryKind::Impersonate(target) => {
            let machine = Party::new(target, params, APP_ID, natural_ctx.clone(), 0);
            AdvState::Impersonate { target, machine: Box::new(machine) }
        }
        AdversaryKind::Spam { strategy, count } => {
            AdvState::Spam(SpamState::new(strategy, count, APP_ID))
        }
    };
    // User model: the gap between the two start presses is a bounded
    // random number of rounds; simultaneity is not physical.
    let press_gap: u64 = rng.gen_range(0..=params.delta);
    let mut press: [Option<Round>; 2] = [None, None];
    let mut displayed_at: [Option<Round>; 2] = [None, None];
    let mut press_poisoned = false;
    let mut honest_context: Option<Context> = natural_ctx.clone();

    loop {
        let round = ledger.current_time();
        // deliver due messages, preserving send order
        let mut i = 0;
        while i < pending.len() {
            if pending[i].0 <= round {
                let (_, dest, msg) = pending.remove(i);
                match dest {
                    2 => adv_inbox.push_back(msg),
                    d => inboxes[d].push_back(msg),
                }
            } else {
                i += 1;
            }
        }
        // step all machines to quiescence within the round
        loop {
            let mut progress = false;
            for idx in 0..2 {
                let pressed = press[idx].is_some_and(|p| round >= p);
                let mut outbox = Vec::new();
                let status = {
                    let mut handle =
                        LedgerHandle { ledger, principal: Principal(idx as u32) };
                    let mut sc = StepCtx {
                        ledger: &mut handle,
                        inbox: &mut inboxes[idx],
                        outbox: &mut outbox,
                        start_pressed: pressed,
                    };
                    parties[idx].step(rng, &mut sc)
                };
                if status == StepStatus::Progress {
                    progress = true;
                }
                if honest_context.is_none() {
                    if let Some(c) = parties[0].context() {
                        honest_context = Some(c.clone());
                    }
                }
                let from = if idx == 0 { Role::Initiator } else { Role::Responder };
                for msg in outbox {
                    route_message(&mut adv, from, msg, ledger, rng, &mut log, &mut pending, round);
                }
            }
            if let AdvState::Impersonate { target, machine } = &mut adv {
                let mut outbox = Vec::new();
                let status = {
                    let mut handle = LedgerHandle { ledger, principal: ADVERSARY_PRINCIPAL };
                    let mut sc = StepCtx {
                        ledger: &mut handle,
                        inbox: &mut adv_inbox,
                        outbox: &mut outbox,
                        // the adversary presses its own fake device at will
                        start_pressed: true,
                    };
                    machine.step(rng, &mut sc)
                };
                if status == StepStatus::Progress {
                    progress = true;
                }
                let victim = 1 - role_index(*target);
                for msg in outbox {
                    pending.push((round + 1, victim, msg));
                }
            }
            if !progress {
                break;
            }
        }
        if let AdvState::Spam(s) = &mut adv {
            s.on_round(honest_context.as_ref(), ledger, rng, &mut log);
        }
        // user watches the screens (out-of-band variant)
        if cfg.variant == Variant::Oob {
            for idx in 0..2 {
                if displayed_at[idx].is_none() && parties[idx].displayed_context.is_some() {
                    displayed_at[idx] = Some(round);
                }
            }
            if let (Some(a), Some(b)) =
                (&parties[0].displayed_context, &parties[1].displayed_context)
            {
                if a != b && !press_poisoned {
                    // mismatching codes: an honest user never presses
                    match cfg.user {
                        UserBehavior::Honest => {
                            press = [None, None];
                            press_poisoned = true;
                        }
                        UserBehavior::Inattentive { accept_prob } => {
                            if !rng.gen_bool(accept_prob) {
                                press = [None, None];
                                press_poisoned = true;
                            }
                        }
                    }
                }
            }
            if !press_poisoned {
                for idx in 0..2 {
                    if press[idx].is_none() {
                        if let Some(r) = displayed_at[idx] {
                            let gap = if idx == 1 { press_gap } else { 0 };
                            press[idx] = Some(r + 1 + gap);
                        }
                    }
                }
            }
        }
        let adv_settled = match &adv {
            AdvState::Impersonate { machine, .. } => machine.settled(),
            _ => true,
        };
        if (parties.iter().all(|p| p.settled()) && adv_settled) || round >= max_round {
            break;
        }
        ledger.advance_round();
    }

    for p in &mut parties {
        p.force_timeout();
    }
    if let AdvState::Impersonate { machine, .. } = &mut adv {
        machine.force_timeout();
        machine.finalize_confirmation(true);
    }
    // Confirmation (out-of-band phase six): the user checks that the
    // protocol succeeded on both real devices.
    let both_ok = parties.iter().all(|p| p.awaiting_confirmation());
    for p in &mut parties {
        if p.awaiting_confirmation() {
            let confirmed = match cfg.user {
                UserBehavior::Honest => both_ok,
                UserBehavior::Inattentive { accept_prob } => both_ok || rng.gen_bool(accept_prob),
            };
            p.finalize_confirmation(confirmed);
        }
    }

    let outcomes = [
        parties[0].outcome().cloned().expect("settled"),
        parties[1].outcome().cloned().expect("settled"),
    ];
    let keys_equal = match (&outcomes[0], &outcomes[1]) {
        (Outcome::Accepted(a), Outcome::Accepted(b)) => Some(a == b),
        _ => None,
    };
    // event count seen by the later verifier
    let events_in_window = parties
        .iter()
        .filter_map(|p| p.last_window.map(|w| (w.1, p.last_events_seen.unwrap_or(0))))
        .max_by_key(|(to, _)| *to)
        .map(|(_, n)| n as u64)
        .unwrap_or(0);
    let impersonation_undetected = match (&adv, &adversary) {
        (AdvState::Impersonate { target, .. }, _) => {
            let attacked = 1 - role_index(*target);
            matches!(outcomes[attacked], Outcome::Accepted(_))
        }
        _ => false,
    };
    if let AdvState::Spam(s) = &adv {
        if s.guesses_made > 0 {
            log.push(format!("spam: {} guesses, {} hits", s.guesses_made, s.hits));
        }
    }
    ExchangeResult {
        phases: [parties[0].phase(), parties[1].phase()],
        outcomes,
        keys_equal,
        events_in_window,
        rounds_elapsed: ledger.current_time() - start,
        log,
        impersonation_undetected,
    }
}

#[allow(clippy::too_many_arguments)]
fn route_message(
    adv: &mut AdvState,
    from: Role,
    msg: Message,
    ledger: &mut Ledger,
    rng: &mut ChaCha8Rng,
    log: &mut Vec<String>,
    pending: &mut Vec<(Round, usize, Message)>,
    round: Round,
) {
    match adv {
        AdvState::None | AdvState::Spam(_) => {
            pending.push((round + 1, 1 - role_index(from), msg));
        }
        AdvState::Mitm(m) => {
            for (to, out) in m.handle(from, msg, ledger, rng, log) {
                pending.push((round + 1, role_index(to), out));
            }
        }
        AdvState::Impersonate { target, .. } => {
            if from == *target {
                log.push("impersonate: suppressed target's message".into());
            } else {
                pending.push((round + 1, 2, msg));
            }
        }
    }
}

fn outcome_strings(o: &Outcome) -> (String, Option<String>) {
    match o {
        Outcome::Accepted(_) => ("accepted".into(), None),
        Outcome::Aborted(r) => ("aborted".into(), Some(r.to_string())),
    }
}


fn build_report(cfg: &ScenarioConfig, run: u32, r: ExchangeResult) -> RunReport {
    let (outcome_initiator, abort_reason_initiator) = outcome_strings(&r.outcomes[0]);
    let (outcome_responder, abort_reason_responder) = outcome_strings(&r.outcomes[1]);
    RunReport {
        variant: match cfg.variant {
            Variant::Oob => "oob".into(),
            Variant::Natural => "natural".into(),
        },
        seed: cfg.seed,
        run,
        outcome_initiator,
        outcome_responder,
        abort_reason_initiator,
        abort_reason_responder,
        keys_equal: r.keys_equal,
        events_in_window: r.events_in_window,
        impersonation_undetected: r.impersonation_undetected,
        adversary_log: r.log,
        phase_initiator: format!("{:?}", r.phases[0]),
        phase_responder: format!("{:?}", r.phases[1]),
        rounds_elapsed: r.rounds_elapsed,
    }
}
