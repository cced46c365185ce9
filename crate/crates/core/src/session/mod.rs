//! Session hub: the single owner of one session's routing state, sequence
//! counter, log writer and simulator.
//!
//! `Session` is synchronous. The network layer (`net`) runs it inside one
//! task and feeds it events in arrival order, which is what makes `seq` a
//! total order. Outbound frames go to per-role unbounded queues.

pub mod log;
pub mod net;
pub mod replay;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tokio::sync::mpsc;

use crate::guidelines::{self, Rules, RulesError};
use crate::protocol::{
    decode, Channel, DenialReason, Envelope, Payload, Primitive, RouteDecision, Role,
    RoutingMatrix, SeqCounter, Timestamp,
};
use crate::sim::{self, Motion, Observation, Pose, Sim, StepReport, WorldError};

pub use self::log::{Disposition, EventRecord, LogError, LogHeader, LogWriter, SessionLog};
pub use self::replay::{replay, replay_file, SessionSummary, Tally};

/// Frames buffered while the session waits for a role to (re)attach.
pub const MAX_PENDING: usize = 1000;

pub const DEFAULT_TICK_MS: u64 = 50;
pub const LIVE_VIEW_MS: u64 = 500;

/// Outbound queue for one attached client.
pub type Outbox = mpsc::UnboundedSender<Envelope>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    /// Waiting for the first full set of roles.
    Lobby,
    Running,
    /// A role dropped after the session started; frames are buffered.
    Paused,
    Closed,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub world_path: PathBuf,
    /// `None` uses the bundled default rules.
    pub rules_path: Option<PathBuf>,
    pub log_dir: PathBuf,
    pub tick_ms: u64,
    pub live_view_ms: u64,
    /// `None` generates a random id.
    pub id: Option<String>,
}

impl SessionConfig {
    pub fn new(world_path: impl Into<PathBuf>, log_dir: impl Into<PathBuf>) -> Self {
        SessionConfig {
            world_path: world_path.into(),
            rules_path: None,
            log_dir: log_dir.into(),
            tick_ms: DEFAULT_TICK_MS,
            live_view_ms: LIVE_VIEW_MS,
            id: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error("log: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad_config: {0}")]
    BadConfig(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::World(e) => e.code(),
            SessionError::Rules(e) => e.code(),
            SessionError::Io(_) => "io",
            SessionError::BadConfig(_) => "bad_config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AttachError {
    #[error("role_taken")]
    RoleTaken,
    #[error("session_closed")]
    SessionClosed,
    #[error("not_human_role")]
    NotHumanRole,
}

impl AttachError {
    pub fn code(&self) -> &'static str {
        match self {
            AttachError::RoleTaken => "role_taken",
            AttachError::SessionClosed => "session_closed",
            AttachError::NotHumanRole => "not_human_role",
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn motion_payload(motion: Motion) -> Payload {
    let (primitive, magnitude) = match motion {
        Motion::Translate(m) => (Primitive::Translate, m),
        Motion::Rotate(d) => (Primitive::Rotate, d),
        Motion::Halt => (Primitive::Halt, 0.0),
    };
    Payload::Motion { primitive, magnitude }
}

pub fn payload_motion(primitive: Primitive, magnitude: f64) -> Motion {
    match primitive {
        Primitive::Translate => Motion::Translate(magnitude),
        Primitive::Rotate => Motion::Rotate(magnitude),
        Primitive::Halt => Motion::Halt,
    }
}

/// Status code an RN sends on `rn_sim_cmd` to request a camera frame.
pub const CAPTURE_REQUEST: &str = "capture_image";
/// Status code of the server's guideline suggestion to the DM.
pub const SUGGESTION: &str = "suggestion";

pub struct Session {
    id: String,
    state: SessionState,
    started: bool,
    outboxes: BTreeMap<Role, Outbox>,
    seq: SeqCounter,
    log: LogWriter,
    sim: Sim,
    rules: Rules,
    matrix: RoutingMatrix,
    pending: VecDeque<(Role, Envelope)>,
    tally: Tally,
    live_view_every: u64,
    live_view_cache: Option<(Pose, Vec<u8>)>,
}

impl Session {
    pub fn create(config: &SessionConfig) -> Result<Session, SessionError> {
        if config.tick_ms == 0 {
            return Err(SessionError::BadConfig("tick_ms must be positive".into()));
        }
        let world_bytes = sim::read_world_bytes(&config.world_path)?;
        let world = sim::parse_world(&world_bytes)?;
        let rules_text = match &config.rules_path {
            Some(p) => guidelines::read_rules_text(p)?,
            None => guidelines::DEFAULT_RULES.to_string(),
        };
        let rules = Rules::parse(&rules_text)?;
        let id = config
            .id
            .clone()
            .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string()[..12].to_string());
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(SessionError::BadConfig(format!("invalid session id {id:?}")));
        }
        std::fs::create_dir_all(&config.log_dir)?;
        let header = LogHeader {
            world_sha256: sha256_hex(&world_bytes),
            rules_sha256: sha256_hex(rules_text.as_bytes()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            session: id.clone(),
            tick_ms: config.tick_ms,
            world_path: Some(absolute(&config.world_path).display().to_string()),
        };
        let log = LogWriter::create(config.log_dir.join(format!("{id}.jsonl")), &header)?;
        Ok(Session {
            id,
            state: SessionState::Lobby,
            started: false,
            outboxes: BTreeMap::new(),
            seq: SeqCounter::new(),
            log,
            sim: Sim::new(world, config.tick_ms),
            rules,
            matrix: RoutingMatrix::standard(),
            pending: VecDeque::new(),
            tally: Tally::default(),
            live_view_every: config.live_view_ms.div_ceil(config.tick_ms).max(1),
            live_view_cache: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    pub fn tick_ms(&self) -> u64 {
        self.sim.tick_ms()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn is_attached(&self, role: Role) -> bool {
        self.outboxes.get(&role).is_some_and(|o| !o.is_closed())
    }

    pub fn summary(&self) -> SessionSummary {
        self.tally.summary(&self.sim)
    }

    pub fn attach(&mut self, role: Role, outbox: Outbox) -> Result<(), AttachError> {
        if self.state == SessionState::Closed {
            return Err(AttachError::SessionClosed);
        }
        if !role.is_human() {
            return Err(AttachError::NotHumanRole);
        }
        if self.is_attached(role) {
            return Err(AttachError::RoleTaken);
        }
        self.outboxes.insert(role, outbox);
        self.server_send(&[role], Payload::Join { role });

        if Role::HUMAN.iter().all(|r| self.is_attached(*r)) {
            self.state = SessionState::Running;
            if self.started {
                self.server_send(&Role::HUMAN, Payload::status("resumed", format!("{role} reattached")));
            } else {
                self.started = true;
                self.server_send(&Role::HUMAN, Payload::status("running", ""));
                let obs = self.sim.observe();
                self.emit_observation(obs);
            }
            while self.state == SessionState::Running {
                let Some((from, env)) = self.pending.pop_front() else { break };
                self.route(from, env);
            }
        }
        Ok(())
    }

    pub fn detach(&mut self, role: Role) {
        if self.outboxes.remove(&role).is_none() || self.state == SessionState::Closed {
            return;
        }
        if self.state == SessionState::Running {
            self.state = SessionState::Paused;
            let rest: Vec<Role> = self.outboxes.keys().copied().collect();
            self.server_send(&rest, Payload::status("paused", format!("{role} disconnected")));
        }
    }

    /// Decode a raw client frame and submit it. Malformed frames get an
    /// error reply and are not logged.
    pub fn handle_frame(&mut self, role: Role, bytes: &[u8]) {
        match decode(bytes) {
            Ok(env) => self.submit(role, env),
            Err(e) => self.reply(role, self.last_seq(), Payload::error(e.code(), e.to_string())),
        }
    }

    /// Route now if running, otherwise buffer.
    pub fn submit(&mut self, role: Role, env: Envelope) {
        match self.state {
            SessionState::Running => {
                self.route(role, env);
            }
            SessionState::Closed => {
                self.reply(role, self.last_seq(), Payload::error("session_closed", "session is closed"))
            }
            SessionState::Lobby | SessionState::Paused => {
                if self.pending.len() >= MAX_PENDING {
                    self.reply(role, self.last_seq(), Payload::error("busy", "too many buffered frames"));
                } else {
                    self.pending.push_back((role, env));
                }
            }
        }
    }

    /// Sequence, validate, deliver and log one message from `from`. The
    /// envelope's own `from`, `session`, `seq` and `ts` are overwritten.
    pub fn route(&mut self, from: Role, mut env: Envelope) -> RouteDecision {
        self.stamp(&mut env, from);
        let decision = self.matrix.validate(from, env.channel, env.kind());
        match &decision {
            RouteDecision::Denied(reason) => {
                self.record(&env, Disposition::Denied, Some(*reason), vec![], vec![]);
                if from.is_human() {
                    self.reply(from, env.seq, Payload::error(reason.as_str(), denial_detail(*reason, &env)));
                }
            }
            RouteDecision::Allowed(receivers) => {
                let (reached, skipped) = self.deliver(&env, receivers);
                self.record(&env, Disposition::Delivered, None, reached, skipped);
                if from.is_human() {
                    self.reply(from, env.seq, Payload::Ack { of: env.id });
                }
                if receivers.contains(&Role::Sim) {
                    self.drive_sim(&env.payload);
                }
                if env.channel == Channel::PDmSpeech {
                    if let Some(text) = env.payload.text() {
                        let suggestion = guidelines::suggest(&self.rules.classify(text));
                        let detail = serde_json::to_string(&suggestion).expect("suggestion serializes");
                        self.server_send(&[Role::Dm], Payload::status(SUGGESTION, detail));
                    }
                }
            }
        }
        decision
    }

    /// Advance the simulator by one tick and publish whatever it produced.
    pub fn tick(&mut self) {
        if !self.started || self.state == SessionState::Closed {
            return;
        }
        if let Some(report) = self.sim.step() {
            self.emit_report(report);
        }
        if self.state == SessionState::Running && self.sim.ticks().is_multiple_of(self.live_view_every) {
            let pose = self.sim.pose();
            let data = match &self.live_view_cache {
                Some((p, data)) if *p == pose => data.clone(),
                _ => {
                    let data = self.sim.capture_image().to_pgm();
                    self.live_view_cache = Some((pose, data.clone()));
                    data
                }
            };
            self.sensor(Payload::LiveView { format: "pgm".into(), data });
        }
    }

    /// Close the session: notify everyone, log the close and drop all
    /// connections. Idempotent.
    pub fn close(&mut self, by: Role) -> SessionSummary {
        if self.state != SessionState::Closed {
            let everyone: Vec<Role> = self.outboxes.keys().copied().collect();
            self.server_send(&everyone, Payload::status("closed", format!("closed by {by}")));
            self.state = SessionState::Closed;
            self.outboxes.clear();
            self.pending.clear();
        }
        self.summary()
    }

    fn last_seq(&self) -> u64 {
        self.seq.issued().saturating_sub(1)
    }

    fn stamp(&mut self, env: &mut Envelope, from: Role) {
        env.session = self.id.clone();
        env.from = from;
        env.seq = self.seq.next_seq();
        env.ts = Timestamp::now();
    }

    fn deliver(&mut self, env: &Envelope, receivers: &BTreeSet<Role>) -> (Vec<Role>, Vec<Role>) {
        let mut reached = Vec::new();
        let mut skipped = Vec::new();
        for &role in receivers {
            if role == Role::Sim {
                reached.push(role);
                continue;
            }
            let sent = self.outboxes.get(&role).is_some_and(|o| o.send(env.clone()).is_ok());
            if sent {
                reached.push(role);
            } else {
                skipped.push(role);
            }
        }
        (reached, skipped)
    }

    fn record(
        &mut self,
        env: &Envelope,
        disposition: Disposition,
        reason: Option<DenialReason>,
        receivers: Vec<Role>,
        skipped: Vec<Role>,
    ) {
        let record = EventRecord {
            envelope: env.clone(),
            disposition,
            reason,
            receivers,
            skipped,
            tick: self.sim.ticks(),
        };
        self.tally.add(&record);
        if let Err(e) = self.log.append(&record) {
            ::log::error!("session {}: log write failed at seq {}: {e}", self.id, env.seq);
        }
    }

    /// Unlogged direct reply; carries the seq of the record it answers.
    fn reply(&self, to: Role, seq: u64, payload: Payload) {
        if let Some(outbox) = self.outboxes.get(&to) {
            let mut env = Envelope::new(self.id.clone(), Role::Server, Channel::ServerCtrl, payload);
            env.seq = seq;
            let _ = outbox.send(env);
        }
    }

    /// Logged server-originated frame; bypasses the routing matrix.
    fn server_send(&mut self, to: &[Role], payload: Payload) {
        let mut env = Envelope::new(String::new(), Role::Server, Channel::ServerCtrl, payload);
        self.stamp(&mut env, Role::Server);
        let targets: BTreeSet<Role> = to.iter().copied().collect();
        let (reached, skipped) = self.deliver(&env, &targets);
        self.record(&env, Disposition::Delivered, None, reached, skipped);
    }

    fn sensor(&mut self, payload: Payload) {
        let env = Envelope::new(String::new(), Role::Sim, Channel::SimSensor, payload);
        self.route(Role::Sim, env);
    }

    fn drive_sim(&mut self, payload: &Payload) {
        match payload {
            Payload::Motion { primitive, magnitude } => {
                let motion = payload_motion(*primitive, *magnitude);
                match self.sim.execute(motion) {
                    Ok(Some(report)) => self.emit_report(report),
                    Ok(None) => self.sensor(Payload::status("started", motion_detail(motion))),
                    Err(e) => self.sensor(Payload::error(e.code(), e.to_string())),
                }
            }
            Payload::Status { code, .. } if code == CAPTURE_REQUEST => {
                let data = self.sim.capture_image().to_pgm();
                self.sensor(Payload::Image { format: "pgm".into(), data });
            }
            Payload::Status { code, .. } => {
                self.sensor(Payload::error("unknown_request", format!("unknown sim request {code:?}")))
            }
            _ => {}
        }
    }

    fn emit_report(&mut self, report: StepReport) {
        self.sensor(Payload::status(report.outcome.code(), report.outcome.detail()));
        self.emit_observation(report.observation);
    }

    fn emit_observation(&mut self, obs: Observation) {
        let Observation { pose, ranges, delta } = obs;
        self.sensor(Payload::Pose { x: pose.x, y: pose.y, theta: pose.theta });
        if !delta.is_empty() {
            self.sensor(Payload::MapDelta { cells: delta });
        }
        self.sensor(Payload::Scan { ranges });
    }
}

fn motion_detail(motion: Motion) -> String {
    match motion {
        Motion::Translate(m) => format!("translate {m}"),
        Motion::Rotate(d) => format!("rotate {d}"),
        Motion::Halt => "halt 0".into(),
    }
}

fn denial_detail(reason: DenialReason, env: &Envelope) -> String {
    match reason {
        DenialReason::WrongSender => {
            format!("{} may not send on {}", env.from, env.channel)
        }
        DenialReason::KindNotAllowedOnChannel => {
            format!("{} is not allowed on {}", env.kind(), env.channel)
        }
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}
