//! Deterministic re-execution of a session log against its world.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::log::{EventRecord, LogError, SessionLog};
use super::{payload_motion, sha256_hex};
use crate::protocol::{Channel, Payload, Role};
use crate::sim::{self, Pose, Sim};

/// Final state of a session, as produced live or by replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub records: u64,
    /// Tick of the last logged record.
    pub ticks: u64,
    pub pose: Pose,
    pub map_hash: String,
    pub delivered: BTreeMap<Channel, u64>,
    pub denied: BTreeMap<String, u64>,
}

impl SessionSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

/// Running counts over logged records.
#[derive(Debug, Clone, Default)]
pub struct Tally {
    records: u64,
    last_tick: u64,
    delivered: BTreeMap<Channel, u64>,
    denied: BTreeMap<String, u64>,
}

impl Tally {
    pub fn add(&mut self, record: &EventRecord) {
        self.records += 1;
        self.last_tick = record.tick;
        match record.reason {
            None => *self.delivered.entry(record.envelope.channel).or_default() += 1,
            Some(reason) => *self.denied.entry(reason.as_str().to_string()).or_default() += 1,
        }
    }

    pub fn summary(&self, sim: &Sim) -> SessionSummary {
        SessionSummary {
            records: self.records,
            ticks: self.last_tick,
            pose: sim.pose(),
            map_hash: sim.map_hash(),
            delivered: self.delivered.clone(),
            denied: self.denied.clone(),
        }
    }
}

/// Re-run the simulator from the world and the delivered `rn_sim_cmd`
/// motions, ticking to each record's tick before applying it.
pub fn replay(log: &SessionLog, world_bytes: &[u8]) -> Result<SessionSummary, LogError> {
    let found = sha256_hex(world_bytes);
    if found != log.header.world_sha256 {
        return Err(LogError::WorldMismatch {
            expected: log.header.world_sha256.clone(),
            found,
        });
    }
    if log.header.tick_ms == 0 {
        return Err(LogError::BadHeader("tick_ms must be positive".into()));
    }
    let mut sim = Sim::new(sim::parse_world(world_bytes)?, log.header.tick_ms);
    let mut tally = Tally::default();
    let mut started = false;
    for record in &log.records {
        sim.advance_to(record.tick);
        tally.add(record);
        if !record.is_delivered() {
            continue;
        }
        let env = &record.envelope;
        match (env.from, env.channel, &env.payload) {
            (Role::Server, Channel::ServerCtrl, Payload::Status { code, .. })
                if code == "running" && !started =>
            {
                started = true;
                sim.observe();
            }
            (Role::Rn, Channel::RnSimCmd, Payload::Motion { primitive, magnitude }) => {
                // Rejections (busy) are part of the recorded history too.
                let _ = sim.execute(payload_motion(*primitive, *magnitude));
            }
            _ => {}
        }
    }
    Ok(tally.summary(&sim))
}

/// Replay a log file. Without `world`, the path recorded in the header is used.
pub fn replay_file(log_path: &Path, world: Option<&Path>) -> Result<SessionSummary, LogError> {
    let log = SessionLog::read(log_path)?;
    let world_path = match (world, &log.header.world_path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.into(),
        (None, None) => return Err(LogError::NoWorld),
    };
    let bytes = sim::read_world_bytes(&world_path)?;
    replay(&log, &bytes)
}
