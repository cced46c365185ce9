//! Offline tools over session logs: transcripts, statistics and replay
//! verification.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::guidelines::Suggestion;
use crate::protocol::{Channel, Envelope, MessageKind, Payload, Role};
use crate::session::{replay, sha256_hex, EventRecord, LogError, SessionLog, SessionSummary, SUGGESTION};
use crate::sim::{self, Pose};

fn receivers(record: &EventRecord) -> String {
    if record.receivers.is_empty() {
        return "-".into();
    }
    record
        .receivers
        .iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn describe(env: &Envelope, images: &mut u64) -> Option<String> {
    let text = match &env.payload {
        Payload::Chat { text } => format!("{text:?}"),
        Payload::Command { text } => format!("command {text:?}"),
        Payload::Motion { primitive, magnitude } => {
            format!("motion {} {magnitude}", serde_json::to_value(primitive).unwrap().as_str().unwrap())
        }
        Payload::MapDelta { cells } => format!("[map \u{394}{} cells]", cells.len()),
        Payload::Pose { x, y, theta } => format!("[pose {x:.3},{y:.3},{theta:.1}]"),
        Payload::Image { .. } => {
            *images += 1;
            format!("[image #{images}]")
        }
        Payload::LiveView { .. } | Payload::Scan { .. } => return None,
        Payload::Status { code, detail } if code == SUGGESTION => {
            match serde_json::from_str::<Suggestion>(detail) {
                Ok(s) => {
                    let outcome = serde_json::to_value(&s.disposition.outcome).unwrap();
                    format!(
                        "[suggestion {}: {} {:?}]",
                        s.disposition.rule_id,
                        outcome["type"].as_str().unwrap_or("?"),
                        outcome["text"].as_str().unwrap_or("")
                    )
                }
                Err(_) => "[suggestion ?]".into(),
            }
        }
        Payload::Status { code, detail } if detail.is_empty() => format!("[status {code}]"),
        Payload::Status { code, detail } => format!("[status {code}: {detail}]"),
        Payload::Error { code, detail } => format!("[error {code}: {detail}]"),
        Payload::Join { role } => format!("[join {role}]"),
        Payload::Ack { of } => format!("[ack {}]", of.simple()),
    };
    Some(text)
}

/// Human-readable rendering, one line per record. Live views and scans are
/// omitted.
pub fn transcript(log: &SessionLog) -> String {
    let mut out = String::new();
    let mut images = 0;
    for record in &log.records {
        let env = &record.envelope;
        let Some(mut text) = describe(env, &mut images) else { continue };
        if let Some(reason) = record.reason {
            text.push_str(&format!(" [DENIED: {reason}]"));
        }
        let time = env.ts.to_string();
        let clock = time.get(11..23).unwrap_or(&time);
        writeln!(
            out,
            "#{:04} {clock} {} -> {} {}: {text}",
            env.seq,
            env.from,
            receivers(record),
            env.channel
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChannelStats {
    pub delivered: u64,
    pub denied: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Latency {
    pub samples_ms: Vec<i64>,
    pub mean_ms: Option<f64>,
    pub median_ms: Option<f64>,
}

impl Latency {
    fn from_samples(samples_ms: Vec<i64>) -> Self {
        let n = samples_ms.len();
        if n == 0 {
            return Latency::default();
        }
        let mean = samples_ms.iter().sum::<i64>() as f64 / n as f64;
        let mut sorted = samples_ms.clone();
        sorted.sort_unstable();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        Latency {
            samples_ms,
            mean_ms: Some(mean),
            median_ms: Some(median),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub records: u64,
    pub duration_ms: i64,
    pub channels: BTreeMap<Channel, ChannelStats>,
    pub denials: BTreeMap<String, u64>,
    pub utterances: u64,
    pub commands: u64,
    pub images: u64,
    pub distance_commanded_m: f64,
    pub distance_traveled_m: f64,
    pub rotation_commanded_deg: f64,
    pub rotation_traveled_deg: f64,
    /// Participant utterance to the DM's next message to the participant.
    pub response_latency: Latency,
    /// DM command to the RN's next motion or capture request.
    pub execution_latency: Latency,
}

pub fn stats(log: &SessionLog) -> Stats {
    let mut s = Stats {
        records: log.records.len() as u64,
        ..Stats::default()
    };
    if let (Some(first), Some(last)) = (log.records.first(), log.records.last()) {
        s.duration_ms = last.envelope.ts.millis() - first.envelope.ts.millis();
    }
    let mut open_utterance: Option<i64> = None;
    let mut open_command: Option<i64> = None;
    let mut response = Vec::new();
    let mut execution = Vec::new();

    for record in &log.records {
        let env = &record.envelope;
        let entry = s.channels.entry(env.channel).or_default();
        if let Some(reason) = record.reason {
            entry.denied += 1;
            *s.denials.entry(reason.as_str().to_string()).or_default() += 1;
            continue;
        }
        entry.delivered += 1;
        let ts = env.ts.millis();
        match (env.channel, &env.payload) {
            (Channel::PDmSpeech, Payload::Chat { .. }) => {
                s.utterances += 1;
                open_utterance.get_or_insert(ts);
            }
            (Channel::DmPChat, _) => {
                if let Some(t0) = open_utterance.take() {
                    response.push(ts - t0);
                }
            }
            (Channel::DmRnChat, Payload::Command { .. }) => {
                s.commands += 1;
                open_command.get_or_insert(ts);
            }
            (Channel::RnSimCmd, payload) => {
                if let Some(t0) = open_command.take() {
                    execution.push(ts - t0);
                }
                if let Payload::Motion { primitive, magnitude } = payload {
                    match primitive {
                        crate::protocol::Primitive::Translate => s.distance_commanded_m += magnitude.abs(),
                        crate::protocol::Primitive::Rotate => s.rotation_commanded_deg += magnitude.abs(),
                        crate::protocol::Primitive::Halt => {}
                    }
                }
            }
            (Channel::SimSensor, Payload::Image { .. }) => s.images += 1,
            (Channel::SimSensor, Payload::Status { code, detail })
                if matches!(code.as_str(), "completed" | "blocked" | "halted") =>
            {
                let mut parts = detail.split_whitespace();
                let amount = parts.nth(1).and_then(|a| a.parse::<f64>().ok()).unwrap_or(0.0);
                match detail.split_whitespace().next() {
                    Some("translate") => s.distance_traveled_m += amount,
                    Some("rotate") => s.rotation_traveled_deg += amount,
                    _ => {}
                }
            }
            _ => {}
        }
    }
    s.response_latency = Latency::from_samples(response);
    s.execution_latency = Latency::from_samples(execution);
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.1}"))
}

pub fn stats_text(s: &Stats) -> String {
    let mut out = String::new();
    writeln!(out, "records              {}", s.records).unwrap();
    writeln!(out, "duration             {:.3} s", s.duration_ms as f64 / 1000.0).unwrap();
    writeln!(out, "utterances           {}", s.utterances).unwrap();
    writeln!(out, "commands             {}", s.commands).unwrap();
    writeln!(out, "images               {}", s.images).unwrap();
    writeln!(
        out,
        "distance             {:.3} m commanded, {:.3} m traveled",
        s.distance_commanded_m, s.distance_traveled_m
    )
    .unwrap();
    writeln!(
        out,
        "rotation             {:.1} deg commanded, {:.1} deg traveled",
        s.rotation_commanded_deg, s.rotation_traveled_deg
    )
    .unwrap();
    writeln!(
        out,
        "response latency     mean {} ms, median {} ms, n={}",
        fmt_opt(s.response_latency.mean_ms),
        fmt_opt(s.response_latency.median_ms),
        s.response_latency.samples_ms.len()
    )
    .unwrap();
    writeln!(
        out,
        "execution latency    mean {} ms, median {} ms, n={}",
        fmt_opt(s.execution_latency.mean_ms),
        fmt_opt(s.execution_latency.median_ms),
        s.execution_latency.samples_ms.len()
    )
    .unwrap();
    writeln!(out, "channel              delivered  denied").unwrap();
    for (channel, c) in &s.channels {
        writeln!(out, "  {:<18} {:>9}  {:>6}", channel.as_str(), c.delivered, c.denied).unwrap();
    }
    for (reason, n) in &s.denials {
        writeln!(out, "denied {reason}: {n}").unwrap();
    }
    out
}

pub const POSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub summary: SessionSummary,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "{mark} {}: expected {}, replay {}", c.name, c.expected, c.actual).unwrap();
        }
        writeln!(out, "{}", if self.passed() { "verify: ok" } else { "verify: FAILED" }).unwrap();
        out
    }
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn pose_matches(a: &Pose, b: &Pose, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && angle_diff(a.theta, b.theta) <= tol
}

fn pose_str(p: &Pose) -> String {
    format!("({}, {}, {})", p.x, p.y, p.theta)
}

/// Last pose the simulator published, straight from the log.
pub fn logged_final_pose(log: &SessionLog) -> Option<Pose> {
    log.records.iter().rev().find_map(|r| match (r.envelope.channel, &r.envelope.payload) {
        (Channel::SimSensor, Payload::Pose { x, y, theta }) if r.is_delivered() => Some(Pose {
            x: *x,
            y: *y,
            theta: *theta,
        }),
        _ => None,
    })
}

/// Hash of the discovered overlay rebuilt only from logged map deltas.
pub fn logged_map_hash(log: &SessionLog, width: usize, height: usize) -> Option<String> {
    let mut overlay = vec![0u8; width * height];
    for r in log.records.iter().filter(|r| r.is_delivered()) {
        if let (Channel::SimSensor, Payload::MapDelta { cells }) = (r.envelope.channel, &r.envelope.payload) {
            for c in cells {
                let (cx, cy) = (usize::try_from(c.cx).ok()?, usize::try_from(c.cy).ok()?);
                if cx >= width || cy >= height {
                    return None;
                }
                overlay[cy * width + cx] = match c.state {
                    crate::protocol::CellState::Free => 1,
                    crate::protocol::CellState::Occupied => 2,
                };
            }
        }
    }
    Some(sha256_hex(&overlay))
}

/// Replay the log and compare its end state with the expectations. Without
/// explicit expectations the replay is checked against the log itself: the
/// last published pose and the overlay rebuilt from the logged map deltas.
pub fn verify(
    log: &SessionLog,
    world_bytes: &[u8],
    expected_pose: Option<Pose>,
    expected_map_hash: Option<&str>,
) -> Result<VerifyReport, LogError> {
    let summary = replay(log, world_bytes)?;
    let world = sim::parse_world(world_bytes)?;
    let mut checks = Vec::new();

    let pose = expected_pose.or_else(|| logged_final_pose(log));
    match pose {
        Some(p) => checks.push(Check {
            name: "pose",
            pass: pose_matches(&p, &summary.pose, POSE_TOLERANCE),
            expected: pose_str(&p),
            actual: pose_str(&summary.pose),
        }),
        None => checks.push(Check {
            name: "pose",
            pass: false,
            expected: "a logged pose".into(),
            actual: pose_str(&summary.pose),
        }),
    }

    let hash = match expected_map_hash {
        Some(h) => Some(h.to_ascii_lowercase()),
        None => logged_map_hash(log, world.grid.width(), world.grid.height()),
    };
    checks.push(Check {
        name: "map_hash",
        pass: hash.as_deref() == Some(summary.map_hash.as_str()),
        expected: hash.unwrap_or_else(|| "a consistent map delta history".into()),
        actual: summary.map_hash.clone(),
    });

    Ok(VerifyReport { summary, checks })
}

/// Count of delivered frames of `kind` that reached `role`.
pub fn received(log: &SessionLog, role: Role, kind: MessageKind) -> usize {
    log.records
        .iter()
        .filter(|r| r.is_delivered() && r.envelope.kind() == kind && r.receivers.contains(&role))
        .count()
}
