//! Rule-driven decision support for the DM wizard.
//!
//! Each participant utterance is classified as executable, needing
//! clarification, or out of capability by an ordered rule list (first match
//! wins). The result is turned into draft messages the human DM may send,
//! edit or discard; nothing here ever transmits on its own.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::command::{self, Command, LinearDirection, TurnDirection, MOVE_VERBS, TURN_VERBS};
use crate::protocol::Channel;

/// Rules shipped with the platform.
pub const DEFAULT_RULES: &str = include_str!("../../../rules/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    HasMotionVerb,
    LacksMagnitude,
    ParsesAsCcl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Translate,
    Clarify,
    Reject,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub pattern: Regex,
    pub guard: Option<Guard>,
    pub action: Action,
    pub template: String,
}

#[derive(Debug, Deserialize)]
struct RawRule {
    id: String,
    pattern: String,
    #[serde(default)]
    guard: Option<String>,
    action: String,
    template: String,
}

#[derive(Debug, Deserialize)]
struct RawRules {
    rules: Vec<RawRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("file_not_found: {0}")]
    FileNotFound(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid_json: {0}")]
    Json(String),
    #[error("bad_pattern({id}): {message}")]
    BadPattern { id: String, message: String },
    #[error("unknown_guard({id}): {guard:?}")]
    UnknownGuard { id: String, guard: String },
    #[error("unknown_action({id}): {action:?}")]
    UnknownAction { id: String, action: String },
    #[error("duplicate_id({0})")]
    DuplicateId(String),
    #[error("missing_catch_all: the last rule must be an unguarded clarify rule matching every utterance")]
    MissingCatchAll,
}

impl RulesError {
    pub fn code(&self) -> &'static str {
        match self {
            RulesError::FileNotFound(_) => "file_not_found",
            RulesError::Io(_) => "io",
            RulesError::Json(_) => "invalid_json",
            RulesError::BadPattern { .. } => "bad_pattern",
            RulesError::UnknownGuard { .. } => "unknown_guard",
            RulesError::UnknownAction { .. } => "unknown_action",
            RulesError::DuplicateId(_) => "duplicate_id",
            RulesError::MissingCatchAll => "missing_catch_all",
        }
    }
}

/// Ordered, immutable rule list.
#[derive(Debug, Clone)]
pub struct Rules {
    rules: Vec<Rule>,
}

pub fn read_rules_text(path: &Path) -> Result<String, RulesError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => RulesError::FileNotFound(path.display().to_string()),
        _ => RulesError::Io(e),
    })
}

// Probes a catch-all pattern has to match.
const CATCH_ALL_PROBES: [&str; 5] = ["", "a", " ", "asdf qwerty", "move forward five feet"];

impl Rules {
    pub fn load(path: impl AsRef<Path>) -> Result<Rules, RulesError> {
        Rules::parse(&read_rules_text(path.as_ref())?)
    }

    pub fn default_rules() -> Rules {
        Rules::parse(DEFAULT_RULES).expect("shipped ruleset is valid")
    }

    pub fn parse(text: &str) -> Result<Rules, RulesError> {
        let raw: RawRules = serde_json::from_str(text).map_err(|e| RulesError::Json(e.to_string()))?;
        let mut rules: Vec<Rule> = Vec::with_capacity(raw.rules.len());
        for r in raw.rules {
            if rules.iter().any(|existing| existing.id == r.id) {
                return Err(RulesError::DuplicateId(r.id));
            }
            let pattern = Regex::new(&r.pattern).map_err(|e| RulesError::BadPattern {
                id: r.id.clone(),
                message: e.to_string(),
            })?;
            let guard = r
                .guard
                .map(|g| {
                    serde_json::from_value::<Guard>(serde_json::Value::String(g.clone()))
                        .map_err(|_| RulesError::UnknownGuard { id: r.id.clone(), guard: g })
                })
                .transpose()?;
            let action = serde_json::from_value::<Action>(serde_json::Value::String(r.action.clone()))
                .map_err(|_| RulesError::UnknownAction {
                    id: r.id.clone(),
                    action: r.action.clone(),
                })?;
            rules.push(Rule {
                id: r.id,
                pattern,
                guard,
                action,
                template: r.template,
            });
        }
        let last = rules.last().ok_or(RulesError::MissingCatchAll)?;
        let catch_all = last.guard.is_none()
            && last.action == Action::Clarify
            && CATCH_ALL_PROBES.iter().all(|p| last.pattern.is_match(p));
        if !catch_all {
            return Err(RulesError::MissingCatchAll);
        }
        Ok(Rules { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn ids(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.id.as_str()).collect()
    }

    /// First rule whose pattern and guard both hold decides; translate rules
    /// that do not yield a parsable command fall through.
    pub fn classify(&self, utterance: &str) -> Disposition {
        let lowered = utterance.to_lowercase();
        let features = Features::of(&lowered);
        for rule in &self.rules {
            if !rule.pattern.is_match(&lowered) || !rule.guard.is_none_or(|g| features.holds(g)) {
                continue;
            }
            let text = features.render(&rule.template, utterance);
            let outcome = match rule.action {
                Action::Translate => match command::parse(&text) {
                    Ok(cmd) => Outcome::Executable(cmd.to_string()),
                    Err(_) => continue,
                },
                Action::Clarify => Outcome::Clarify(text),
                Action::Reject => Outcome::Reject(text),
            };
            return Disposition {
                rule_id: rule.id.clone(),
                outcome,
            };
        }
        unreachable!("load-time check guarantees a catch-all rule")
    }
}

const FILLER: [&str; 12] = [
    "please", "can", "could", "would", "will", "you", "robot", "now", "okay", "ok", "hey", "just",
];

/// Rewrite an utterance towards command-language form: lowercase, strip
/// punctuation and politeness filler.
pub fn normalize(utterance: &str) -> String {
    let cleaned: String = utterance
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|w| w.trim_end_matches('.'))
        .filter(|w| !w.is_empty() && !FILLER.contains(w))
        .map(|w| match w {
            "degree" => "degrees",
            other => other,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Features {
    ccl: String,
    move_verb: bool,
    turn_verb: bool,
    has_number: bool,
}

impl Features {
    fn of(lowered: &str) -> Features {
        let ccl = normalize(lowered);
        let words: Vec<&str> = ccl.split_whitespace().collect();
        Features {
            move_verb: words.iter().any(|w| MOVE_VERBS.contains(w)),
            turn_verb: words.iter().any(|w| TURN_VERBS.contains(w)),
            has_number: words.iter().any(|w| command::is_number(w)),
            ccl,
        }
    }

    fn holds(&self, guard: Guard) -> bool {
        match guard {
            Guard::HasMotionVerb => self.move_verb || self.turn_verb,
            Guard::LacksMagnitude => !self.has_number,
            Guard::ParsesAsCcl => command::parse(&self.ccl).is_ok(),
        }
    }

    fn render(&self, template: &str, utterance: &str) -> String {
        let how_much = if self.move_verb || !self.turn_verb {
            "How far?"
        } else {
            "How much should I turn?"
        };
        template
            .replace("{ccl}", &self.ccl)
            .replace("{utterance}", utterance)
            .replace("{how_much}", how_much)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "text", rename_all = "snake_case")]
pub enum Outcome {
    /// Canonical command text; always accepted by `command::parse`.
    Executable(String),
    Clarify(String),
    Reject(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disposition {
    pub rule_id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub channel: Channel,
    pub text: String,
}

/// Pre-filled outbound drafts for the DM console.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub disposition: Disposition,
    pub drafts: Vec<Draft>,
}

/// Short confirmation the DM sends the participant for an executable command.
pub fn acknowledgement(command: &Command) -> String {
    match command {
        Command::Move { direction, distance } => {
            let dir = match direction {
                LinearDirection::Forward => "forward",
                LinearDirection::Back => "back",
            };
            format!("Moving {dir} {distance} m.")
        }
        Command::Turn { direction, angle } => {
            let dir = match direction {
                TurnDirection::Left => "left",
                TurnDirection::Right => "right",
            };
            format!("Turning {dir} {angle} degrees.")
        }
        Command::Stop => "Stopping.".into(),
        Command::SendImage => "Sending you an image.".into(),
    }
}

pub fn suggest(disposition: &Disposition) -> Suggestion {
    let drafts = match &disposition.outcome {
        Outcome::Executable(text) => {
            let mut drafts = vec![Draft {
                channel: Channel::DmRnChat,
                text: text.clone(),
            }];
            if let Ok(cmd) = command::parse(text) {
                drafts.push(Draft {
                    channel: Channel::DmPChat,
                    text: acknowledgement(&cmd),
                });
            }
            drafts
        }
        Outcome::Clarify(text) | Outcome::Reject(text) => vec![Draft {
            channel: Channel::DmPChat,
            text: text.clone(),
        }],
    };
    Suggestion {
        disposition: disposition.clone(),
        drafts,
    }
}
