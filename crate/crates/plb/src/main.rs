use clap::{Parser, Subcommand};
use plb::sim::config::{ConfigError, MitmStrategy, ScenarioConfig};
use plb::sim::{run_scenario, RunReport};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "plb", about = "Public-ledger-based key exchange: simulator and pairing demo")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario batch and emit JSON-lines reports.
    Run {
        /// Scenario config file (key = value sections).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's run count.
        #[arg(long)]
        runs: Option<u32>,
        /// Report destination (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print accept/abort tallies to stderr.
        #[arg(long)]
        summary: bool,
    },
    /// Interactive two-terminal pairing over a shared local ledger.
    Pair {
        /// initiator | responder | spam
        role: String,
        /// Socket path of the shared ledger.
        #[arg(long)]
        ledger: PathBuf,
        /// Context code to spam (hex), for role 'spam'.
        #[arg(long)]
        code: Option<String>,
    },
    /// Built-in invariant checks: Merkle suite and a soundness sweep.
    Selftest {
        #[arg(long, hide = true)]
        inject_proof_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { scenario, seed, runs, out, summary } => cmd_run(&scenario, seed, runs, out, summary),
        Cmd::Pair { role, ledger, code } => plb::pair::cmd_pair(&role, &ledger, code.as_deref()),
        Cmd::Selftest { inject_proof_fault } => cmd_selftest(inject_proof_fault),
    };
    ExitCode::from(code as u8)
}

fn cmd_run(
    scenario: &PathBuf,
    seed: Option<u64>,
    runs: Option<u32>,
    out: Option<PathBuf>,
    summary: bool,
) -> i32 {
    let text = match std::fs::read_to_string(scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", scenario.display());
            return 2;
        }
    };
    let mut cfg = match ScenarioConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", scenario.display());
            return 2;
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    let reports = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e @ ConfigError::Parse { .. }) | Err(e @ ConfigError::Invalid(_)) => {
            eprintln!("{}: {e}", scenario.display());
            return 2;
        }
    };
    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&r.to_json_line());
        lines.push('\n');
    }
    match &out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &lines) {
                eprintln!("cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => {
            print!("{lines}");
            std::io::stdout().flush().ok();
        }
    }
    if summary {
        print_summary(&reports);
    }
    if reports.iter().any(|r| r.soundness_violation()) {
        eprintln!("SOUNDNESS VIOLATION: both parties accepted unequal keys");
        3
    } else {
        0
    }
}

fn print_summary(reports: &[RunReport]) {
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for r in reports {
        for (who, outcome, reason) in [
            ("initiator", &r.outcome_initiator, &r.abort_reason_initiator),
            ("responder", &r.outcome_responder, &r.abort_reason_responder),
        ] {
            let key = match reason {
                Some(why) => format!("{who} {outcome}({why})"),
                None => format!("{who} {outcome}"),
            };
            *tally.entry(key).or_insert(0) += 1;
        }
    }
    let both = reports.iter().filter(|r| r.both_accepted()).count();
    let undetected = reports.iter().filter(|r| r.impersonation_undetected).count();
    eprintln!("runs: {}", reports.len());
    eprintln!("both accepted: {both}");
    if undetected > 0 {
        eprintln!("impersonation undetected: {undetected}");
    }
    for (k, v) in tally {
        eprintln!("  {k}: {v}");
    }
}

// -- selftest ---------------------------------------------------------------

fn check(name: &str, ok: bool, failures: &mut u32) {
    if ok {
        println!("PASS {name}");
    } else {
        println!("FAIL {name}");
        *failures += 1;
    }
}

fn cmd_selftest(inject_proof_fault: bool) -> i32 {
    use plb::merkle::{build_tree, prove_range, verify_range, TreeLeaf};
    let mut failures = 0;

    // Merkle: over all small trees and all key ranges, exactly the true
    // member subset verifies; tampered proofs are rejected.
    let mut exact = true;
    let mut tamper = true;
    for n in 0usize..=6 {
        let leaves: Vec<TreeLeaf> =
            (0..n).map(|i| TreeLeaf { key: vec![i as u8], value_hash: [i as u8; 32] }).collect();
        let root = build_tree(&leaves).unwrap();
        for lo in 0..=n as u8 {
            for hi in lo..=n as u8 {
                let (members, mut proof) = prove_range(&leaves, &[lo], &[hi]).unwrap();
                if inject_proof_fault {
                    // Hidden fault injection: corrupt every proof so the
                    // suite must notice and report failure.
                    proof.tree_size += 1;
                }
                if !verify_range(&root, &[lo], &[hi], &members, &proof) {
                    exact = false;
                }
                for i in 0..members.len() {
                    let mut m = members.clone();
                    let mut p = proof.clone();
                    m.remove(i);
                    p.member_proofs.remove(i);
                    if verify_range(&root, &[lo], &[hi], &m, &p) {
                        tamper = false;
                    }
                }
                for mp in 0..proof.member_proofs.len() {
                    for step in 0..proof.member_proofs[mp].path.len() {
                        let mut p = proof.clone();
                        p.member_proofs[mp].path[step].hash[0] ^= 1;
                        if verify_range(&root, &[lo], &[hi], &members, &p) {
                            tamper = false;
                        }
                    }
                }
            }
        }
    }
    check("merkle range proofs accept exactly the true member set", exact, &mut failures);
    check("merkle tampered proofs rejected", tamper, &mut failures);

    // Protocol sweep at reduced scale.
    let mut cfg = ScenarioConfig { runs: 25, ..Default::default() };
    let honest = run_scenario(&cfg).unwrap();
    check(
        "honest runs all accept with equal keys",
        honest.iter().all(|r| r.both_accepted() && r.keys_equal == Some(true)),
        &mut failures,
    );
    let mut sound = true;
    let mut detected = true;
    for strategy in [MitmStrategy::CommitBoth, MitmStrategy::CommitOne, MitmStrategy::CommitNone] {
        cfg.adversary = plb::sim::config::AdversaryKind::Mitm(strategy);
        for r in run_scenario(&cfg).unwrap() {
            sound &= !r.soundness_violation();
            detected &= !r.both_accepted();
        }
    }
    check("mitm soundness: no run accepts unequal keys", sound, &mut failures);
    check("mitm detection: no run reaches mutual acceptance", detected, &mut failures);

    if failures == 0 {
        println!("selftest: all checks passed");
        0
    } else {
        println!("selftest: {failures} check(s) failed");
        1
    }
}
