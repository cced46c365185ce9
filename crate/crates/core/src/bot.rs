//! Scripted headless client for tests and demos.
//!
//! A script is a JSON array of steps, run in order. Each step may wait for a
//! matching frame, then sleep, then act:
//!
//! ```json
//! [
//!   {"send": {"channel": "p_dm_speech", "kind": "chat", "payload": {"text": "take a picture"}}},
//!   {"wait_for": {"channel": "sim_sensor", "kind": "image"}},
//!   {"wait_for": {"channel": "dm_rn_chat", "kind": "command"}, "execute": true},
//!   {"wait_for": {"code": "suggestion"}, "send_suggestion": true},
//!   {"close_session": true}
//! ]
//! ```
//!
//! `execute` compiles the command just matched and sends it to the simulator;
//! `send_suggestion` sends every draft of the suggestion just matched.
//! After the last step the bot stays connected until the server closes the
//! session or the linger timeout expires.

use std::path::Path;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio::time::{timeout_at, Instant};
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::command::{self, Compiled};
use crate::guidelines::Suggestion;
use crate::protocol::{decode, decode_value, encode, Channel, Envelope, MessageKind, Payload, Role, Timestamp};
use crate::session::net::CLOSE_SESSION_CODE;
use crate::session::{motion_payload, CAPTURE_REQUEST, SUGGESTION};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matcher {
    pub channel: Option<Channel>,
    pub kind: Option<MessageKind>,
    pub from: Option<Role>,
    /// Substring of a chat/command text or a status/error detail.
    pub text_contains: Option<String>,
    /// Exact status or error code.
    pub code: Option<String>,
}

impl Matcher {
    pub fn matches(&self, env: &Envelope) -> bool {
        if self.channel.is_some_and(|c| c != env.channel)
            || self.kind.is_some_and(|k| k != env.kind())
            || self.from.is_some_and(|f| f != env.from)
        {
            return false;
        }
        let (code, text) = match &env.payload {
            Payload::Status { code, detail } | Payload::Error { code, detail } => (Some(code.as_str()), Some(detail.as_str())),
            other => (None, other.text()),
        };
        if let Some(want) = &self.code {
            if code != Some(want.as_str()) {
                return false;
            }
        }
        if let Some(needle) = &self.text_contains {
            if !text.is_some_and(|t| t.contains(needle.as_str())) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outgoing {
    pub channel: Channel,
    pub kind: MessageKind,
    pub payload: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    #[serde(default)]
    pub wait_for: Option<Matcher>,
    #[serde(default)]
    pub delay_ms: u64,
    #[serde(default)]
    pub send: Option<Outgoing>,
    #[serde(default)]
    pub send_suggestion: bool,
    #[serde(default)]
    pub execute: bool,
    #[serde(default)]
    pub close_session: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BotError {
    #[error("bad_script: {0}")]
    Script(String),
    #[error("connect: {0}")]
    Connect(String),
    #[error("timeout in step {step} waiting for {matcher:?}")]
    Timeout { step: usize, matcher: Matcher },
    #[error("connection closed in step {step}")]
    Closed { step: usize },
    #[error("step {step}: {message}")]
    Step { step: usize, message: String },
    #[error("websocket: {0}")]
    Ws(#[from] tokio_tungstenite::tungstenite::Error),
}

pub fn parse_script(text: &str) -> Result<Vec<Step>, BotError> {
    serde_json::from_str(text).map_err(|e| BotError::Script(e.to_string()))
}

pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<Step>, BotError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BotError::Script(format!("{}: {e}", path.display())))?;
    parse_script(&text)
}

#[derive(Debug, Clone)]
pub struct BotOptions {
    /// Longest wait for any single `wait_for`.
    pub step_timeout: Duration,
    /// How long to stay connected after the script ends.
    pub linger: Duration,
}

impl Default for BotOptions {
    fn default() -> Self {
        BotOptions {
            step_timeout: Duration::from_secs(10),
            linger: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BotReport {
    pub received: Vec<Envelope>,
    pub sent: Vec<Envelope>,
    /// True when the server ended the connection.
    pub closed_by_server: bool,
}

impl BotReport {
    pub fn count(&self, channel: Channel, kind: MessageKind) -> usize {
        self.received
            .iter()
            .filter(|e| e.channel == channel && e.kind() == kind)
            .count()
    }
}

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Bot {
    role: Role,
    socket: Socket,
    report: BotReport,
    cursor: usize,
    last_match: Option<Envelope>,
}

pub fn attach_url(base: &str, session: &str, role: Role) -> String {
    format!("{}/session/{session}/attach?role={role}", base.trim_end_matches('/'))
}

/// Run `script` as `role` against a full attach URL.
pub async fn run_bot(url: &str, role: Role, script: &[Step], options: &BotOptions) -> Result<BotReport, BotError> {
    let (socket, _) = tokio_tungstenite::connect_async(url)
        .await
        .map_err(|e| BotError::Connect(e.to_string()))?;
    let mut bot = Bot {
        role,
        socket,
        report: BotReport::default(),
        cursor: 0,
        last_match: None,
    };
    for (index, step) in script.iter().enumerate() {
        bot.run_step(index, step, options).await?;
        if step.close_session {
            bot.drain(Instant::now() + options.linger).await;
            return Ok(bot.report);
        }
    }
    bot.drain(Instant::now() + options.linger).await;
    Ok(bot.report)
}

impl Bot {
    /// Read one frame; `None` once the connection is gone.
    async fn read(&mut self, deadline: Instant) -> Result<Option<Envelope>, ()> {
        loop {
            match timeout_at(deadline, self.socket.next()).await {
                Err(_) => return Err(()),
                Ok(Some(Ok(Message::Text(text)))) => match decode(text.as_bytes()) {
                    Ok(env) => {
                        self.report.received.push(env.clone());
                        return Ok(Some(env));
                    }
                    Err(e) => log::warn!("{}: undecodable frame from server: {e}", self.role),
                },
                Ok(Some(Ok(Message::Close(_)))) | Ok(Some(Err(_))) | Ok(None) => {
                    self.report.closed_by_server = true;
                    return Ok(None);
                }
                Ok(Some(Ok(_))) => {}
            }
        }
    }

    async fn drain(&mut self, deadline: Instant) {
        while let Ok(Some(_)) = self.read(deadline).await {}
        let _ = self.socket.close(None).await;
    }

    async fn wait_for(&mut self, index: usize, matcher: &Matcher, options: &BotOptions) -> Result<(), BotError> {
        let deadline = Instant::now() + options.step_timeout;
        loop {
            while self.cursor < self.report.received.len() {
                let env = &self.report.received[self.cursor];
                self.cursor += 1;
                if matcher.matches(env) {
                    self.last_match = Some(env.clone());
                    return Ok(());
                }
            }
            match self.read(deadline).await {
                Ok(Some(_)) => {}
                Ok(None) => return Err(BotError::Closed { step: index }),
                Err(()) => {
                    return Err(BotError::Timeout {
                        step: index,
                        matcher: matcher.clone(),
                    })
                }
            }
        }
    }

    async fn send_payload(&mut self, channel: Channel, payload: Payload) -> Result<(), BotError> {
        let env = Envelope::new("", self.role, channel, payload);
        let text = String::from_utf8(encode(&env)).expect("frames are UTF-8");
        self.socket.send(Message::Text(text.into())).await?;
        self.report.sent.push(env);
        Ok(())
    }

    fn step_error(index: usize, message: impl Into<String>) -> BotError {
        BotError::Step {
            step: index,
            message: message.into(),
        }
    }

    async fn run_step(&mut self, index: usize, step: &Step, options: &BotOptions) -> Result<(), BotError> {
        if let Some(matcher) = &step.wait_for {
            self.wait_for(index, matcher, options).await?;
        }
        if step.delay_ms > 0 {
            tokio::time::sleep(Duration::from_millis(step.delay_ms)).await;
        }
        if let Some(out) = &step.send {
            let frame = json!({
                "v": 1,
                "id": uuid::Uuid::new_v4().simple().to_string(),
                "session": "",
                "seq": 0,
                "ts": Timestamp::now().to_string(),
                "from": self.role,
                "channel": out.channel,
                "kind": out.kind,
                "payload": out.payload,
            });
            let env = decode_value(&frame).map_err(|e| Self::step_error(index, format!("send: {e}")))?;
            self.send_payload(env.channel, env.payload).await?;
        }
        if step.send_suggestion {
            let suggestion = match self.last_match.as_ref().map(|e| &e.payload) {
                Some(Payload::Status { code, detail }) if code == SUGGESTION => serde_json::from_str::<Suggestion>(detail)
                    .map_err(|e| Self::step_error(index, format!("bad suggestion: {e}")))?,
                _ => return Err(Self::step_error(index, "send_suggestion needs a matched suggestion")),
            };
            for draft in suggestion.drafts {
                let is_command = draft.channel == Channel::DmRnChat && command::parse(&draft.text).is_ok();
                let payload = if is_command {
                    Payload::Command { text: draft.text }
                } else {
                    Payload::chat(draft.text)
                };
                self.send_payload(draft.channel, payload).await?;
            }
        }
        if step.execute {
            let text = match self.last_match.as_ref().map(|e| &e.payload) {
                Some(Payload::Command { text }) => text.clone(),
                _ => return Err(Self::step_error(index, "execute needs a matched command")),
            };
            let cmd = command::parse(&text).map_err(|e| Self::step_error(index, format!("{text:?}: {e}")))?;
            let payload = match command::compile(&cmd) {
                Compiled::Motion(m) => motion_payload(m),
                Compiled::CaptureImage => Payload::status(CAPTURE_REQUEST, ""),
            };
            self.send_payload(Channel::RnSimCmd, payload).await?;
        }
        if step.close_session {
            let frame = CloseFrame {
                code: CloseCode::from(CLOSE_SESSION_CODE),
                reason: "close session".into(),
            };
            self.socket.send(Message::Close(Some(frame))).await?;
        }
        Ok(())
    }
}
