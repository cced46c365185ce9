use serde::{Deserialize, Serialize};

use super::grid::OccupancyGrid;

/// Planar pose: meters from the grid corner, heading in degrees
/// counterclockwise from +x, normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: normalize_degrees(theta),
        }
    }

    /// Unit heading vector.
    pub fn heading(&self) -> (f64, f64) {
        let (s, c) = self.theta.to_radians().sin_cos();
        (c, s)
    }
}

fn default_radius() -> f64 {
    0.2
}
fn default_linear() -> f64 {
    0.5
}
fn default_angular() -> f64 {
    45.0
}
fn default_lidar() -> f64 {
    8.0
}

/// Robot body and sensor parameters; overridable from the world file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// m/s
    #[serde(default = "default_linear")]
    pub linear_speed: f64,
    /// deg/s
    #[serde(default = "default_angular")]
    pub angular_speed: f64,
    #[serde(default = "default_lidar")]
    pub lidar_range: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            radius: default_radius(),
            linear_speed: default_linear(),
            angular_speed: default_angular(),
            lidar_range: default_lidar(),
        }
    }
}

impl RobotParams {
    pub(crate) fn validate(&self) -> Result<(), super::WorldError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.radius) {
            return Err(super::WorldError::BadRobotParams("radius"));
        }
        if !positive(self.linear_speed) {
            return Err(super::WorldError::BadRobotParams("linear_speed"));
        }
        if !positive(self.angular_speed) {
            return Err(super::WorldError::BadRobotParams("angular_speed"));
        }
        if !positive(self.lidar_range) {
            return Err(super::WorldError::BadRobotParams("lidar_range"));
        }
        Ok(())
    }
}

/// A motion primitive. Magnitudes are signed: negative translate drives
/// backwards, negative rotate turns clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Translate(f64),
    Rotate(f64),
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Translate,
    Rotate,
}

impl PrimitiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Translate => "translate",
            PrimitiveKind::Rotate => "rotate",
        }
    }
}

/// How a primitive ended. Amounts are unsigned: meters or degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed { kind: Option<PrimitiveKind>, amount: f64 },
    Blocked { traveled: f64 },
    Halted { kind: Option<PrimitiveKind>, amount: f64 },
}

impl Outcome {
    pub fn code(&self) -> &'static str {
        match self {
            Outcome::Completed { .. } => "completed",
            Outcome::Blocked { .. } => "blocked",
            Outcome::Halted { .. } => "halted",
        }
    }

    pub fn kind(&self) -> Option<PrimitiveKind> {
        match *self {
            Outcome::Completed { kind, .. } | Outcome::Halted { kind, .. } => kind,
            Outcome::Blocked { .. } => Some(PrimitiveKind::Translate),
        }
    }

    pub fn amount(&self) -> f64 {
        match *self {
            Outcome::Completed { amount, .. } | Outcome::Halted { amount, .. } => amount,
            Outcome::Blocked { traveled } => traveled,
        }
    }

    /// `"<primitive> <amount>"`, or `"halt 0"` when nothing was active.
    pub fn detail(&self) -> String {
        let name = self.kind().map_or("halt", PrimitiveKind::as_str);
        format!("{name} {}", self.amount())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MotionError {
    #[error("busy: a primitive is already active")]
    Busy,
    #[error("bad_magnitude: {0} is not finite")]
    BadMagnitude(f64),
}

impl MotionError {
    pub fn code(&self) -> &'static str {
        match self {
            MotionError::Busy => "busy",
            MotionError::BadMagnitude(_) => "bad_magnitude",
        }
    }
}

/// In-flight primitive. Progress is kept as a tick count from the start
/// pose so the position never accumulates rounding drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivePrimitive {
    pub kind: PrimitiveKind,
    start: Pose,
    total: f64,
    sign: f64,
    ticks: u64,
}

impl ActivePrimitive {
    /// Absolute amount still to go.
    pub fn remaining(&self, step: f64) -> f64 {
        (self.total - self.progress(self.ticks, step)).max(0.0)
    }

    fn progress(&self, ticks: u64, step: f64) -> f64 {
        (ticks as f64 * step).min(self.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub params: RobotParams,
    active: Option<ActivePrimitive>,
}

fn translated(start: Pose, signed_distance: f64) -> Pose {
    let (c, s) = start.heading();
    Pose {
        x: start.x + signed_distance * c,
        y: start.y + signed_distance * s,
        theta: start.theta,
    }
}

fn rotated(start: Pose, signed_degrees: f64) -> Pose {
    Pose {
        theta: normalize_degrees(start.theta + signed_degrees),
        ..start
    }
}

impl RobotState {
    pub fn new(pose: Pose, params: RobotParams) -> Self {
        RobotState {
            pose,
            params,
            active: None,
        }
    }

    pub fn active(&self) -> Option<&ActivePrimitive> {
        self.active.as_ref()
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none()
    }

    /// Start a primitive. Zero-magnitude primitives and `Halt` finish at once
    /// and return their outcome; otherwise the primitive runs on `tick`.
    pub fn execute(&mut self, motion: Motion, tick_s: f64) -> Result<Option<Outcome>, MotionError> {
        let (kind, magnitude) = match motion {
            Motion::Halt => return Ok(Some(self.halt(tick_s))),
            Motion::Translate(d) => (PrimitiveKind::Translate, d),
            Motion::Rotate(a) => (PrimitiveKind::Rotate, a),
        };
        if !magnitude.is_finite() {
            return Err(MotionError::BadMagnitude(magnitude));
        }
        if self.active.is_some() {
            return Err(MotionError::Busy);
        }
        if magnitude == 0.0 {
            return Ok(Some(Outcome::Completed {
                kind: Some(kind),
                amount: 0.0,
            }));
        }
        self.active = Some(ActivePrimitive {
            kind,
            start: self.pose,
            total: magnitude.abs(),
            sign: magnitude.signum(),
            ticks: 0,
        });
        Ok(None)
    }

    fn step_size(&self, kind: PrimitiveKind, tick_s: f64) -> f64 {
        match kind {
            PrimitiveKind::Translate => self.params.linear_speed * tick_s,
            PrimitiveKind::Rotate => self.params.angular_speed * tick_s,
        }
    }

    fn halt(&mut self, tick_s: f64) -> Outcome {
        match self.active.take() {
            Some(active) => Outcome::Halted {
                kind: Some(active.kind),
                amount: active.progress(active.ticks, self.step_size(active.kind, tick_s)),
            },
            None => Outcome::Halted {
                kind: None,
                amount: 0.0,
            },
        }
    }

    /// Advance the active primitive by one tick.
    pub fn tick(&mut self, grid: &OccupancyGrid, tick_s: f64) -> Option<Outcome> {
        let mut active = self.active?;
        let step = self.step_size(active.kind, tick_s);
        let done = active.progress(active.ticks, step);
        let next = active.progress(active.ticks + 1, step);
        match active.kind {
            PrimitiveKind::Translate => {
                let target = translated(active.start, active.sign * next);
                let r = self.params.radius;
                if grid.segment_sweep_hits(self.pose.x, self.pose.y, target.x, target.y, r) {
                    self.active = None;
                    return Some(Outcome::Blocked { traveled: done });
                }
                self.pose = target;
            }
            PrimitiveKind::Rotate => {
                self.pose = rotated(active.start, active.sign * next);
            }
        }
        active.ticks += 1;
        if next >= active.total {
            self.active = None;
            Some(Outcome::Completed {
                kind: Some(active.kind),
                amount: active.total,
            })
        } else {
            self.active = Some(active);
            None
        }
    }
}
