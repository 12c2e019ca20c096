//! Two-terminal interactive pairing demo over a shared local ledger.
//!
//! The first `pair` process to reach the socket path binds it and hosts the
//! ledger (advancing one round every 250 ms); later processes connect as
//! clients. All parties — including the human-driven protocol machines —
//! talk to the ledger and to each other through the socket, one JSON
//! request per line.

use crate::channel::Message;
use crate::ledger::{Ledger, LedgerConfig, LedgerError, Principal, QueryResponse};
use crate::protocol::{
    LedgerApi, Outcome, Party, ProtocolParams, Role, StepCtx, Variant,
};
use crate::types::{Context, EventDigest, Round, SubmitReceipt};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

pub const PAIR_APP_ID: &[u8] = b"plb-pair";
const ROUND_MILLIS: u64 = 250;

/// Generous human-scale timing: one round is 250 ms, so the period is
/// 2.5 min and the timeout 30 s from the start press.
pub fn pair_params() -> ProtocolParams {
    ProtocolParams { variant: Variant::Oob, w: 600, alpha: 120, delta: 10 }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request {
    Time,
    Acquire { app_id: String },
    Submit { principal: u32, context: String, event: String },
    Query { context: String, from: Round, to: Round },
    Send { to: u8, data: String },
    Recv { role: u8 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Response {
    Time { round: Round },
    Context { encoded: String },
    Receipt { accepted_round: Round },
    Query { response: QueryResponse },
    Sent,
    Msgs { msgs: Vec<String> },
    Err { msg: String },
}

struct Shared {
    ledger: Ledger,
    /// Mailboxes indexed by recipient role byte.
    mailboxes: [VecDeque<Vec<u8>>; 2],
}

fn handle_request(shared: &Mutex<Shared>, req: Request) -> Response {
    let mut s = shared.lock().unwrap();
    match req {
        Request::Time => Response::Time { round: s.ledger.current_time() },
        Request::Acquire { app_id } => {
            let Ok(id) = hex::decode(&app_id) else {
                return Response::Err { msg: "bad app_id hex".into() };
            };
            match s.ledger.acquire_context(&id) {
                Ok(c) => Response::Context { encoded: hex::encode(c.encode()) },
                Err(e) => Response::Err { msg: e.to_string() },
            }
        }
        Request::Submit { principal, context, event } => {
            let parsed = hex::decode(&context)
                .ok()
                .and_then(|b| Context::decode(&b).ok())
                .zip(hex::decode(&event).ok().and_then(|b| <[u8; 32]>::try_from(b).ok()));
            let Some((ctx, digest)) = parsed else {
                return Response::Err { msg: "bad submit encoding".into() };
            };
            match s.ledger.submit(Principal(principal), ctx, EventDigest(digest)) {
                Ok(r) => Response::Receipt { accepted_round: r.accepted_round },
                Err(e) => Response::Err { msg: e.to_string() },
            }
        }
        Request::Query { context, from, to } => {
            let Some(ctx) = hex::decode(&context).ok().and_then(|b| Context::decode(&b).ok())
            else {
                return Response::Err { msg: "bad context hex".into() };
            };
            match s.ledger.query(&ctx, from, to) {
                Ok(response) => Response::Query { response },
                Err(e) => Response::Err { msg: e.to_string() },
            }
        }
        Request::Send { to, data } => {
            if to > 1 {
                return Response::Err { msg: "bad recipient".into() };
            }
            let Ok(bytes) = hex::decode(&data) else {
                return Response::Err { msg: "bad message hex".into() };
            };
            s.mailboxes[to as usize].push_back(bytes);
            Response::Sent
        }
        Request::Recv { role } => {
            if role > 1 {
                return Response::Err { msg: "bad role".into() };
            }
            let msgs = s.mailboxes[role as usize].drain(..).map(hex::encode).collect();
            Response::Msgs { msgs }
        }
    }
}

fn serve(listener: UnixListener, shared: Arc<Mutex<Shared>>) {
    let ticker = Arc::clone(&shared);
    std::thread::spawn(move || loop {
        std::thread::sleep(Duration::from_millis(ROUND_MILLIS));
        ticker.lock().unwrap().ledger.advance_round();
    });
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
                let mut writer = stream;
                let mut line = String::new();
                loop {
                    line.clear();
                    match reader.read_line(&mut line) {
                        Ok(0) | Err(_) => break,
                        Ok(_) => {}
                    }
                    let resp = match serde_json::from_str::<Request>(&line) {
                        Ok(req) => handle_request(&shared, req),
                        Err(e) => Response::Err { msg: format!("bad request: {e}") },
                    };
                    let mut out = serde_json::to_string(&resp).expect("response serializes");
                    out.push('\n');
                    if writer.write_all(out.as_bytes()).is_err() {
                        break;
                    }
                }
            });
        }
    });
}

/// Ledger client over the socket; also carries the message mailbox calls.
struct SocketLedger {
    reader: BufReader<UnixStream>,
    writer: UnixStream,
    principal: u32,
}

impl SocketLedger {
    fn connect(path: &std::path::Path, principal: u32) -> std::io::Result<Self> {
        let stream = UnixStream::connect(path)?;
        Ok(SocketLedger {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            principal,
        })
    }

    fn call(&mut self, req: &Request) -> Response {
        let send = |s: &mut Self| -> std::io::Result<Response> {
            let mut line = serde_json::to_string(req).expect("request serializes");
            line.push('\n');
            s.writer.write_all(line.as_bytes())?;
            let mut resp = String::new();
            s.reader.read_line(&mut resp)?;
            serde_json::from_str(&resp)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        };
        send(self).unwrap_or(Response::Err { msg: "ledger connection lost".into() })
    }

    fn send_message(&mut self, to: u8, msg: &Message) {
        self.call(&Request::Send { to, data: hex::encode(msg.encode()) });
    }

    fn recv_messages(&mut self, role: u8) -> Vec<Message> {
        match self.call(&Request::Recv { role }) {
            Response::Msgs { msgs } => msgs
                .iter()
                .filter_map(|m| hex::decode(m).ok())
                .filter_map(|b| Message::decode(&b))
                .collect(),
            _ => Vec::new(),
        }
    }
}

impl LedgerApi for SocketLedger {
    fn current_time(&mut self) -> Round {
        match self.call(&Request::Time) {
            Response::Time { round } => round,
            _ => 0,
        }
    }

    fn submit(
        &mut self,
        context: Context,
        event: EventDigest,
    ) -> Result<SubmitReceipt, LedgerError> {
        let req = Request::Submit {
            principal: self.principal,
            context: hex::encode(context.encode()),
            event: hex::encode(event.as_bytes()),
        };
        match self.call(&req) {
            Response::Receipt { accepted_round } => {
                Ok(SubmitReceipt { context, event, accepted_round })
            }
            _ => Err(LedgerError::LedgerUnavailable),
        }
    }

    fn query(
        &mut self,
        context: &Context,
        from: Round,
        to: Round,
    ) -> Result<QueryResponse, LedgerError> {
        let req = Request::Query { context: hex::encode(context.encode()), from, to };
        match self.call(&req) {
            Response::Query { response } => Ok(response),
            _ => Err(LedgerError::LedgerUnavailable),
        }
    }

    fn acquire_context(&mut self, app_id: &[u8]) -> Result<Context, LedgerError> {
        match self.call(&Request::Acquire { app_id: hex::encode(app_id) }) {
            Response::Context { encoded } => hex::decode(&encoded)
                .ok()
                .and_then(|b| Context::decode(&b).ok())
                .ok_or(LedgerError::LedgerUnavailable),
            _ => Err(LedgerError::Exhausted),
        }
    }
}

/// Bind-or-connect: the first process hosts the ledger in a background
/// thread; everyone (including the host) talks to it through the socket.
/// Returns (client, hosting).
fn reach_ledger(path: &std::path::Path, principal: u32) -> std::io::Result<(SocketLedger, bool)> {
    match UnixListener::bind(path) {
        Ok(listener) => {
            let shared = Arc::new(Mutex::new(Shared {
                ledger: Ledger::new(
                    LedgerConfig { period_rounds: 600, ..Default::default() },
                    rand::random(),
                ),
                mailboxes: [VecDeque::new(), VecDeque::new()],
            }));
            serve(listener, shared);
            Ok((SocketLedger::connect(path, principal)?, true))
        }
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => {
            Ok((SocketLedger::connect(path, principal)?, false))
        }
        Err(e) => Err(e),
    }
}

fn fingerprint(shared: &crate::dh::SharedSecret) -> String {
    let h = crate::hash::sha256_parts(&[b"PLB-FP", &shared.0]);
    hex::encode(&h[..8])
}

fn prompt_line(prompt: &str) -> String {
    print!("{prompt}");
    std::io::stdout().flush().ok();
    let mut line = String::new();
    std::io::stdin().read_line(&mut line).ok();
    line.trim().to_string()
}

/// Exit code 0 on acceptance, 1 on abort, 2 on setup errors.
pub fn cmd_pair(role_arg: &str, ledger_path: &std::path::Path, code_hex: Option<&str>) -> i32 {
    match role_arg {
        "initiator" | "responder" => {}
        "spam" => return cmd_pair_spam(ledger_path, code_hex),
        other => {
            eprintln!("unknown role '{other}' (expected initiator, responder or spam)");
            return 2;
        }
    }
    let role = if role_arg == "initiator" { Role::Initiator } else { Role::Responder };
    let (mut ledger, hosting) = match reach_ledger(ledger_path, role.byte() as u32) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("cannot reach ledger at {}: {e}", ledger_path.display());
            return 2;
        }
    };
    if hosting {
        println!("Hosting the ledger at {}.", ledger_path.display());
    }
    println!("Running as {role_arg}. Waiting for the peer...");

    let mut party = Party::new(role, pair_params(), PAIR_APP_ID, None, 0);
    let mut rng = rand::rngs::OsRng;
    let mut inbox: VecDeque<Message> = VecDeque::new();
    let mut start_pressed = false;
    let mut shown = false;
    while !party.settled() {
        for m in ledger.recv_messages(role.byte()) {
            inbox.push_back(m);
        }
        let mut outbox = Vec::new();
        {
            let mut sc = StepCtx {
                ledger: &mut ledger,
                inbox: &mut inbox,
                outbox: &mut outbox,
                start_pressed,
            };
            party.step(&mut rng, &mut sc);
        }
        for msg in &outbox {
            ledger.send_message(1 - role.byte(), msg);
        }
        if !shown {
            if let Some(c) = &party.displayed_context {
                shown = true;
                let code = c.oob_code().unwrap_or(&[]);
                println!();
                println!("  Context code: {}   (hex {})", c.display_code(), hex::encode(code));
                println!("  Compare it with the code on the other device.");
                prompt_line("  Press Enter on both devices to start: ");
                start_pressed = true;
                continue; // step again immediately with the press
            }
        }
        std::thread::sleep(Duration::from_millis(50));
    }

    if party.awaiting_confirmation() {
        let fp = party.shared_secret().map(|s| fingerprint(&s)).unwrap_or_default();
        println!("  Verification passed. Key fingerprint: {fp}");
        let answer = prompt_line("  Did the protocol succeed on both devices? [y/N]: ");
        party.finalize_confirmation(answer.eq_ignore_ascii_case("y"));
    }
    let code = match party.outcome() {
        Some(Outcome::Accepted(shared)) => {
            println!("ACCEPTED  key fingerprint {}", fingerprint(shared));
            0
        }
        Some(Outcome::Aborted(reason)) => {
            println!("ABORTED({reason})");
            1
        }
        None => 2,
    };
    if hosting {
        // Let the peer finish its final queries before the ledger dies.
        println!("(hosting: keeping the ledger up for a few more seconds)");
        std::thread::sleep(Duration::from_secs(5));
        std::fs::remove_file(ledger_path).ok();
    }
    code
}

/// Third-terminal spammer: floods the given context code with fake events
/// to demonstrate the MultipleEvents abort on the honest terminals.
fn cmd_pair_spam(ledger_path: &std::path::Path, code_hex: Option<&str>) -> i32 {
    let Some(code_hex) = code_hex else {
        eprintln!("role 'spam' needs --code <hex> (shown next to the context code)");
        return 2;
    };
    let Ok(code) = hex::decode(code_hex) else {
        eprintln!("--code must be hex");
        return 2;
    };
    let Ok(context) = Context::out_of_band(PAIR_APP_ID, &code) else {
        eprintln!("--code must be non-empty");
        return 2;
    };
    let mut ledger = match SocketLedger::connect(ledger_path, 99) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot reach ledger at {}: {e}", ledger_path.display());
            return 2;
        }
    };
    println!("Spamming context {} ...", context.display_code());
    for i in 0..4u8 {
        let fake = EventDigest([i.wrapping_add(0xa0); 32]);
        match ledger.submit(context.clone(), fake) {
            Ok(r) => println!("  fake event accepted in round {}", r.accepted_round),
            Err(e) => println!("  rejected: {e}"),
        }
        std::thread::sleep(Duration::from_millis(ROUND_MILLIS));
    }
    0
}
