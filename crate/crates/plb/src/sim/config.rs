//! Scenario configuration and its on-disk format: flat key = value lines
//! grouped into [sections]. Parse errors carry the offending line number.

use crate::protocol::{ProtocolParams, Role, Variant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitmStrategy {
    CommitBoth,
    CommitOne,
    CommitNone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpamStrategy {
    KnownContext,
    Guess,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryKind {
    None,
    Mitm(MitmStrategy),
    Impersonate(Role),
    Spam { strategy: SpamStrategy, count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UserBehavior {
    Honest,
    /// Confirms (and accepts mismatched contexts) with this probability
    /// even when a side failed.
    Inattentive { accept_prob: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub variant: Variant,
    pub params: ProtocolParams,
    pub adversary: AdversaryKind,
    pub seed: u64,
    pub runs: u32,
    pub clock_offset_initiator: i64,
    pub clock_offset_responder: i64,
    /// Rounds (counted from the exchange start) in which ledger
    /// submissions fail.
    pub submit_fail_rounds: Vec<u64>,
    pub user: UserBehavior,
    /// Overrides for the ledger defaults, mostly for spam scenarios.
    pub rate_cap: Option<u32>,
    pub code_len: Option<usize>,
    pub code_space: Option<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            variant: Variant::Oob,
            params: ProtocolParams { variant: Variant::Oob, w: 100, alpha: 10, delta: 2 },
            adversary: AdversaryKind::None,
            seed: 0,
            runs: 1,
            clock_offset_initiator: 0,
            clock_offset_responder: 0,
            submit_fail_rounds: Vec::new(),
            user: UserBehavior::Honest,
            rate_cap: None,
            code_len: None,
            code_space: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be >= 1".into()));
        }
        let d = self.params.delta as i64;
        for (name, off) in [
            ("initiator_offset", self.clock_offset_initiator),
            ("responder_offset", self.clock_offset_responder),
        ] {
            if off.abs() > d {
                return Err(ConfigError::Invalid(format!(
                    "{name} must lie within [-delta, +delta] = [{}, {}]",
                    -d, d
                )));
            }
        }
        if self.params.variant != self.variant {
            return Err(ConfigError::Invalid("params.variant must match variant".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut section = String::new();
        // collected first, applied at the end so key order does not matter
        let mut mitm_strategy = MitmStrategy::CommitBoth;
        let mut impersonate_target = Role::Responder;
        let mut spam_strategy = SpamStrategy::KnownContext;
        let mut spam_count: u32 = 1;
        let mut adversary = String::from("none");
        let mut accept_prob: f64 = 1.0;
        let mut user = String::from("honest");

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| ConfigError::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(err("unterminated section header".into()));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err("expected key = value".into()));
            };
            let key = key.trim();
            let value = value.trim();
            let parse_u64 =
                |v: &str| v.parse::<u64>().map_err(|_| err(format!("invalid integer '{v}'")));
            let parse_i64 =
                |v: &str| v.parse::<i64>().map_err(|_| err(format!("invalid integer '{v}'")));
            match (section.as_str(), key) {
                ("scenario", "variant") => {
                    cfg.variant = match value {
                        "oob" => Variant::Oob,
                        "natural" => Variant::Natural,
                        _ => return Err(err(format!("unknown variant '{value}'"))),
                    };
                }
                ("scenario", "adversary") => adversary = value.to_string(),
                ("scenario", "mitm_strategy") => {
                    mitm_strategy = match value {
                        "commit-both" => MitmStrategy::CommitBoth,
                        "commit-one" => MitmStrategy::CommitOne,
                        "commit-none" => MitmStrategy::CommitNone,
                        _ => return Err(err(format!("unknown mitm_strategy '{value}'"))),
                    };
                }
                ("scenario", "impersonate_target") => {
                    impersonate_target = match value {
                        "initiator" => Role::Initiator,
                        "responder" => Role::Responder,
                        _ => return Err(err(format!("unknown target '{value}'"))),
                    };
                }
                ("scenario", "spam_strategy") => {
                    spam_strategy = match value {
                        "known-context" => SpamStrategy::KnownContext,
                        "guess" => SpamStrategy::Guess,
                        _ => return Err(err(format!("unknown spam_strategy '{value}'"))),
                    };
                }
                ("scenario", "spam_count") => spam_count = parse_u64(value)? as u32,
                ("scenario", "user") => user = value.to_string(),
                ("scenario", "accept_prob") => {
                    accept_prob = value
                        .parse::<f64>()
                        .map_err(|_| err(format!("invalid probability '{value}'")))?;
                }
                ("scenario", "seed") => cfg.seed = parse_u64(value)?,
                ("scenario", "runs") => cfg.runs = parse_u64(value)? as u32,
                ("params", "w") => cfg.params.w = parse_u64(value)?,
                ("params", "alpha") => cfg.params.alpha = parse_u64(value)?,
                ("params", "delta") => cfg.params.delta = parse_u64(value)?,
                ("clocks", "initiator_offset") => cfg.clock_offset_initiator = parse_i64(value)?,
                ("clocks", "responder_offset") => cfg.clock_offset_responder = parse_i64(value)?,
                ("ledger", "rate_cap") => cfg.rate_cap = Some(parse_u64(value)? as u32),
                ("ledger", "code_len") => cfg.code_len = Some(parse_u64(value)? as usize),
                ("ledger", "code_space") => cfg.code_space = Some(parse_u64(value)?),
                ("failures", "submit_fail") => {
                    for part in value.split(',') {
                        cfg.submit_fail_rounds.push(parse_u64(part.trim())?);
                    }
                }
                _ => {
                    return Err(err(format!("unknown key '{key}' in section [{section}]")));
                }
            }
        }
        cfg.adversary = match adversary.as_str() {
            "none" => AdversaryKind::None,
            "mitm" => AdversaryKind::Mitm(mitm_strategy),
            "impersonate" => AdversaryKind::Impersonate(impersonate_target),
            "spam" => AdversaryKind::Spam { strategy: spam_strategy, count: spam_count },
            other => {
                return Err(ConfigError::Invalid(format!("unknown adversary '{other}'")));
            }
        };
        cfg.user = match user.as_str() {
            "honest" => UserBehavior::Honest,
            "inattentive" => UserBehavior::Inattentive { accept_prob },
            other => return Err(ConfigError::Invalid(format!("unknown user model '{other}'"))),
        };
        cfg.params.variant = cfg.variant;
        cfg.validate()?;
        Ok(cfg)
    }
}
