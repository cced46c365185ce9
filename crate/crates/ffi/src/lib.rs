//! C ABI over the ozbench simulator, command language, guideline engine,
//! routing matrix and log replay.
//!
//! Conventions:
//! - every fallible function returns an [`OzStatus`]; on failure
//!   [`oz_last_error`] describes it (per thread, valid until the next call);
//! - handles are opaque and freed with their matching `*_free`;
//! - strings returned through `char **` are owned by the caller and freed
//!   with [`oz_string_free`];
//! - a handle must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ozbench::command;
use ozbench::guidelines::Rules;
use ozbench::protocol::{validate_route, Channel, MessageKind, RouteDecision, Role};
use ozbench::session::{self, LogError, SessionLog};
use ozbench::sim::{self, Motion, Sim, WorldError, SCAN_BEAMS};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OzStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Io = 5,
    InvalidWorld = 6,
    InvalidRules = 7,
    ParseError = 8,
    Busy = 9,
    RouteDenied = 10,
    CorruptLog = 11,
    WorldMismatch = 12,
    BufferTooSmall = 13,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OzPrimitive {
    Translate = 0,
    Rotate = 1,
    Halt = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OzOutcomeCode {
    /// The primitive is still running.
    Running = 0,
    Completed = 1,
    Blocked = 2,
    Halted = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OzPose {
    pub x: f64,
    pub y: f64,
    /// Degrees in [0, 360).
    pub theta: f64,
}

/// Outcome of a primitive. `amount` is meters or degrees covered.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OzOutcome {
    pub code: OzOutcomeCode,
    pub amount: f64,
}

/// Receiver bits returned by [`oz_route`].
pub const OZ_ROLE_PARTICIPANT: u32 = 1;
pub const OZ_ROLE_DM: u32 = 1 << 1;
pub const OZ_ROLE_RN: u32 = 1 << 2;
pub const OZ_ROLE_SIM: u32 = 1 << 3;
pub const OZ_ROLE_SERVER: u32 = 1 << 4;

/// Number of ranges written by [`oz_sim_observe`].
pub const OZ_SCAN_BEAMS: usize = 360;

/// Opaque simulator handle.
pub struct OzSim {
    sim: Sim,
}

/// Opaque guideline rule set.
pub struct OzRules {
    rules: Rules,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(OzStatus, String);

impl Fail {
    fn new(status: OzStatus, msg: impl Into<String>) -> Self {
        Fail(status, msg.into())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> OzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OzStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OzStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(OzStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(OzStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::new(OzStatus::NullArgument, format!("{name} is null")))
}

unsafe fn sim_arg<'a>(p: *mut OzSim) -> Result<&'a mut Sim, Fail> {
    Ok(&mut out_arg(p, "sim")?.sim)
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn world_fail(e: WorldError) -> Fail {
    let status = match e {
        WorldError::FileNotFound(_) => OzStatus::NotFound,
        WorldError::Io(_) => OzStatus::Io,
        _ => OzStatus::InvalidWorld,
    };
    Fail::new(status, e.to_string())
}

fn log_fail(e: LogError) -> Fail {
    if let LogError::World(w) = e {
        return world_fail(w);
    }
    let status = match e {
        LogError::FileNotFound(_) => OzStatus::NotFound,
        LogError::Io(_) => OzStatus::Io,
        LogError::CorruptLog { .. } => OzStatus::CorruptLog,
        LogError::WorldMismatch { .. } => OzStatus::WorldMismatch,
        _ => OzStatus::InvalidArgument,
    };
    Fail::new(status, e.to_string())
}

fn new_sim(world: sim::World, tick_ms: u64, out: *mut *mut OzSim) -> FfiResult {
    if tick_ms == 0 {
        return Err(Fail::new(OzStatus::InvalidArgument, "tick_ms must be positive"));
    }
    let out = unsafe { out_arg(out, "out")? };
    *out = Box::into_raw(Box::new(OzSim {
        sim: Sim::new(world, tick_ms),
    }));
    Ok(())
}

fn outcome(o: &sim::Outcome) -> OzOutcome {
    let code = match o {
        sim::Outcome::Completed { .. } => OzOutcomeCode::Completed,
        sim::Outcome::Blocked { .. } => OzOutcomeCode::Blocked,
        sim::Outcome::Halted { .. } => OzOutcomeCode::Halted,
    };
    OzOutcome {
        code,
        amount: o.amount(),
    }
}

const RUNNING: OzOutcome = OzOutcome {
    code: OzOutcomeCode::Running,
    amount: 0.0,
};

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next ozbench call on this thread.
#[no_mangle]
pub extern "C" fn oz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Free a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn oz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a world file and create a simulator at its start pose.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_load(path: *const c_char, tick_ms: u64, out: *mut *mut OzSim) -> OzStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let world = sim::load_world(path).map_err(world_fail)?;
        new_sim(world, tick_ms, out)
    })
}

/// Create a simulator from world JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_from_json(json: *const c_char, tick_ms: u64, out: *mut *mut OzSim) -> OzStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let world = sim::parse_world(json.as_bytes()).map_err(world_fail)?;
        new_sim(world, tick_ms, out)
    })
}

/// # Safety
/// `sim` must come from `oz_sim_load`/`oz_sim_from_json` or be null.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_free(sim: *mut OzSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_pose(sim: *mut OzSim, out: *mut OzPose) -> OzStatus {
    guard(|| {
        let p = sim_arg(sim)?.pose();
        *out_arg(out, "out")? = OzPose {
            x: p.x,
            y: p.y,
            theta: p.theta,
        };
        Ok(())
    })
}

/// Ticks elapsed since creation.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_ticks(sim: *mut OzSim, out: *mut u64) -> OzStatus {
    guard(|| {
        *out_arg(out, "out")? = sim_arg(sim)?.ticks();
        Ok(())
    })
}

/// Start a primitive. Translate magnitudes are meters, rotate degrees;
/// negative values drive backwards / turn clockwise. `out` receives
/// `Running` or, for a primitive that ends at once (halt, zero), its outcome.
/// Returns `Busy` while another primitive is active.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_execute(
    sim: *mut OzSim,
    primitive: OzPrimitive,
    magnitude: f64,
    out: *mut OzOutcome,
) -> OzStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let out = out_arg(out, "out")?;
        let motion = match primitive {
            OzPrimitive::Translate => Motion::Translate(magnitude),
            OzPrimitive::Rotate => Motion::Rotate(magnitude),
            OzPrimitive::Halt => Motion::Halt,
        };
        match sim.execute(motion) {
            Ok(Some(report)) => *out = outcome(&report.outcome),
            Ok(None) => *out = RUNNING,
            Err(e @ sim::MotionError::Busy) => return Err(Fail::new(OzStatus::Busy, e.to_string())),
            Err(e) => return Err(Fail::new(OzStatus::InvalidArgument, e.to_string())),
        }
        Ok(())
    })
}

/// Advance one tick. `out` receives `Running` or the outcome of the
/// primitive that settled on this tick.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_tick(sim: *mut OzSim, out: *mut OzOutcome) -> OzStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let out = out_arg(out, "out")?;
        *out = sim.step().map_or(RUNNING, |r| outcome(&r.outcome));
        Ok(())
    })
}

/// Take a lidar scan and fold it into the discovered map. Writes
/// `OZ_SCAN_BEAMS` ranges in meters; beam `i` points along world bearing
/// `i` degrees.
///
/// # Safety
/// `sim` must be a live handle; `ranges` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_observe(sim: *mut OzSim, ranges: *mut f64, capacity: usize) -> OzStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        if ranges.is_null() {
            return Err(Fail::new(OzStatus::NullArgument, "ranges is null"));
        }
        if capacity < SCAN_BEAMS {
            return Err(Fail::new(
                OzStatus::BufferTooSmall,
                format!("need {SCAN_BEAMS} ranges, got {capacity}"),
            ));
        }
        let obs = sim.observe();
        ptr::copy_nonoverlapping(obs.ranges.as_ptr(), ranges, SCAN_BEAMS);
        Ok(())
    })
}

/// Render the first-person camera view as binary PGM. With `buf` null,
/// only `*written` is set to the required size.
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `capacity` bytes or be
/// null; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_capture_pgm(
    sim: *mut OzSim,
    buf: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> OzStatus {
    guard(|| {
        let pgm = sim_arg(sim)?.capture_image().to_pgm();
        let written = out_arg(written, "written")?;
        *written = pgm.len();
        if buf.is_null() {
            return Ok(());
        }
        if capacity < pgm.len() {
            return Err(Fail::new(
                OzStatus::BufferTooSmall,
                format!("need {} bytes, got {capacity}", pgm.len()),
            ));
        }
        ptr::copy_nonoverlapping(pgm.as_ptr(), buf, pgm.len());
        Ok(())
    })
}

/// SHA-256 (hex) of the discovered-map overlay.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_sim_map_hash(sim: *mut OzSim, out: *mut *mut c_char) -> OzStatus {
    guard(|| {
        let hash = sim_arg(sim)?.map_hash();
        *out_arg(out, "out")? = c_string(hash);
        Ok(())
    })
}

/// Parse a robot command and return its canonical text.
/// Fails with `ParseError`; the message names the code and span.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_command_canonicalize(text: *const c_char, out: *mut *mut c_char) -> OzStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let cmd = command::parse(text).map_err(|e| Fail::new(OzStatus::ParseError, e.to_string()))?;
        *out = c_string(command::format(&cmd));
        Ok(())
    })
}

/// The bundled default rule set.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_rules_default(out: *mut *mut OzRules) -> OzStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(OzRules {
            rules: Rules::default_rules(),
        }));
        Ok(())
    })
}

/// Load a rule set from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oz_rules_load(path: *const c_char, out: *mut *mut OzRules) -> OzStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let rules = Rules::load(path).map_err(|e| {
            let status = match e.code() {
                "file_not_found" => OzStatus::NotFound,
                "io" => OzStatus::Io,
                _ => OzStatus::InvalidRules,
            };
            Fail::new(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(OzRules { rules }));
        Ok(())
    })
}

/// # Safety
/// `rules` must come from `oz_rules_default`/`oz_rules_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn oz_rules_free(rules: *mut OzRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Classify an utterance. `out` receives JSON such as
/// `{"rule_id":"R5","type":"executable","text":"move forward 1.524 m"}`.
///
/// # Safety
/// `rules` must be a live handle; `utterance` a NUL-terminated string;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oz_rules_classify(
    rules: *const OzRules,
    utterance: *const c_char,
    out: *mut *mut c_char,
) -> OzStatus {
    guard(|| {
        let rules = rules
            .as_ref()
            .ok_or_else(|| Fail::new(OzStatus::NullArgument, "rules is null"))?;
        let utterance = str_arg(utterance, "utterance")?;
        let out = out_arg(out, "out")?;
        let d = rules.rules.classify(utterance);
        *out = c_string(serde_json::to_string(&d).expect("disposition serializes"));
        Ok(())
    })
}

fn role_bit(r: Role) -> u32 {
    match r {
        Role::Participant => OZ_ROLE_PARTICIPANT,
        Role::Dm => OZ_ROLE_DM,
        Role::Rn => OZ_ROLE_RN,
        Role::Sim => OZ_ROLE_SIM,
        Role::Server => OZ_ROLE_SERVER,
    }
}

/// Look up the routing matrix. Arguments are wire names (`"dm"`,
/// `"dm_rn_chat"`, `"command"`). On success `receivers` holds `OZ_ROLE_*`
/// bits; a denial returns `RouteDenied` with the reason as the message.
///
/// # Safety
/// String arguments must be NUL-terminated; `receivers` writable.
#[no_mangle]
pub unsafe extern "C" fn oz_route(
    from: *const c_char,
    channel: *const c_char,
    kind: *const c_char,
    receivers: *mut u32,
) -> OzStatus {
    guard(|| {
        let bad = |e: ozbench::protocol::UnknownValue| Fail::new(OzStatus::InvalidArgument, e.to_string());
        let from: Role = str_arg(from, "from")?.parse().map_err(bad)?;
        let channel: Channel = str_arg(channel, "channel")?.parse().map_err(bad)?;
        let kind: MessageKind = str_arg(kind, "kind")?.parse().map_err(bad)?;
        let receivers = out_arg(receivers, "receivers")?;
        *receivers = 0;
        match validate_route(from, channel, kind) {
            RouteDecision::Allowed(to) => {
                *receivers = to.iter().map(|&r| role_bit(r)).fold(0, |a, b| a | b);
                Ok(())
            }
            RouteDecision::Denied(reason) => Err(Fail::new(OzStatus::RouteDenied, reason.as_str())),
        }
    })
}

/// Replay a session log. `world_path` may be null to use the path recorded
/// in the log header. `out` receives the summary as JSON.
///
/// # Safety
/// `log_path` must be NUL-terminated, `world_path` NUL-terminated or null,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oz_replay(
    log_path: *const c_char,
    world_path: *const c_char,
    out: *mut *mut c_char,
) -> OzStatus {
    guard(|| {
        let log_path = str_arg(log_path, "log_path")?;
        let world = if world_path.is_null() {
            None
        } else {
            Some(Path::new(str_arg(world_path, "world_path")?))
        };
        let out = out_arg(out, "out")?;
        let summary = session::replay_file(Path::new(log_path), world).map_err(log_fail)?;
        *out = c_string(summary.to_json());
        Ok(())
    })
}

/// Check that a log file parses with a gap-free sequence.
///
/// # Safety
/// `log_path` must be NUL-terminated; `records` writable.
#[no_mangle]
pub unsafe extern "C" fn oz_log_check(log_path: *const c_char, records: *mut u64) -> OzStatus {
    guard(|| {
        let log_path = str_arg(log_path, "log_path")?;
        let records = out_arg(records, "records")?;
        let log = SessionLog::read(log_path).map_err(log_fail)?;
        *records = log.records.len() as u64;
        Ok(())
    })
}
