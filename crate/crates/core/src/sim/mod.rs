//! Deterministic stand-in for the physical robot: occupancy-grid world,
//! unicycle kinematics, raycast LIDAR and a synthetic camera.

mod camera;
mod grid;
mod raycast;
mod robot;

pub use camera::{
    capture_image, column_band, column_bearing, ImageFrame, CAMERA_RANGE, FIELD_OF_VIEW_DEG,
    IMAGE_HEIGHT, IMAGE_WIDTH,
};
pub(crate) use grid::read_file as read_world_bytes;
pub use grid::{load_world, parse_world, Discovery, OccupancyGrid, StartPose, World, WorldError, WorldFile};
pub use raycast::{raycast, CellWalk, OriginOccupied};
pub use robot::{
    normalize_degrees, ActivePrimitive, Motion, MotionError, Outcome, Pose, PrimitiveKind,
    RobotParams, RobotState,
};

use crate::protocol::{CellState, MapCell};

pub const SCAN_BEAMS: usize = 360;

/// 360 one-degree ranges; index = bearing relative to world +x.
pub fn scan(grid: &OccupancyGrid, pose: &Pose, max_range: f64) -> Vec<f64> {
    (0..SCAN_BEAMS)
        .map(|deg| raycast(grid, pose.x, pose.y, deg as f64, max_range).unwrap_or(0.0))
        .collect()
}

/// Fold a scan into the discovered overlay: every traversed cell becomes
/// seen-free, each hit endpoint seen-occupied. Returns only the cells whose
/// overlay changed, ordered by `(cy, cx)`.
pub fn integrate_scan(grid: &mut OccupancyGrid, pose: &Pose, ranges: &[f64], max_range: f64) -> Vec<MapCell> {
    let mut changed = Vec::new();
    let mut mark = |grid: &mut OccupancyGrid, cx: i64, cy: i64, state: Discovery| {
        if grid.observe(cx, cy, state) {
            changed.push(MapCell {
                cx: cx as i32,
                cy: cy as i32,
                state: match state {
                    Discovery::SeenOccupied => CellState::Occupied,
                    _ => CellState::Free,
                },
            });
        }
    };
    for (deg, &range) in ranges.iter().enumerate() {
        let walk = CellWalk::new(grid, pose.x, pose.y, deg as f64);
        let (ox, oy) = walk.origin_cell();
        mark(grid, ox, oy, Discovery::SeenFree);
        for (cx, cy, t) in walk {
            if t < range {
                mark(grid, cx, cy, Discovery::SeenFree);
            } else {
                if range < max_range {
                    mark(grid, cx, cy, Discovery::SeenOccupied);
                }
                break;
            }
        }
    }
    changed.sort_by_key(|c| (c.cy, c.cx));
    changed
}

/// Everything the robot reports after settling: pose, fresh scan and the
/// map cells that scan revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pose: Pose,
    pub ranges: Vec<f64>,
    pub delta: Vec<MapCell>,
}

/// Result of one simulator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outcome: Outcome,
    pub observation: Observation,
}

/// Simulator state machine: a world, a robot and a tick counter.
///
/// Single-threaded by contract; the owner serializes every call.
#[derive(Debug, Clone)]
pub struct Sim {
    grid: OccupancyGrid,
    robot: RobotState,
    tick_ms: u64,
    ticks: u64,
}

impl Sim {
    pub fn new(world: World, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick_ms must be positive");
        Sim {
            robot: RobotState::new(world.start, world.params),
            grid: world.grid,
            tick_ms,
            ticks: 0,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn pose(&self) -> Pose {
        self.robot.pose
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    /// Ticks executed so far.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    fn tick_s(&self) -> f64 {
        self.tick_ms as f64 / 1000.0
    }

    pub fn map_hash(&self) -> String {
        self.grid.map_hash()
    }

    /// Scan from the current pose and fold it into the overlay.
    pub fn observe(&mut self) -> Observation {
        let range = self.robot.params.lidar_range;
        let pose = self.robot.pose;
        let ranges = scan(&self.grid, &pose, range);
        let delta = integrate_scan(&mut self.grid, &pose, &ranges, range);
        Observation { pose, ranges, delta }
    }

    pub fn capture_image(&self) -> ImageFrame {
        capture_image(&self.grid, &self.robot.pose)
    }

    /// Start a primitive. Returns a report when it finished immediately
    /// (halt, zero magnitude).
    pub fn execute(&mut self, motion: Motion) -> Result<Option<StepReport>, MotionError> {
        let tick_s = self.tick_s();
        let outcome = self.robot.execute(motion, tick_s)?;
        Ok(outcome.map(|outcome| self.settle(outcome)))
    }

    /// Advance one tick.
    pub fn step(&mut self) -> Option<StepReport> {
        self.ticks += 1;
        let tick_s = self.tick_s();
        let outcome = self.robot.tick(&self.grid, tick_s)?;
        debug_assert!(!self
            .grid
            .disc_overlaps(self.robot.pose.x, self.robot.pose.y, self.robot.params.radius));
        Some(self.settle(outcome))
    }

    /// Run idle-or-active ticks until `ticks() == target`.
    pub fn advance_to(&mut self, target: u64) {
        while self.ticks < target {
            self.step();
        }
    }

    fn settle(&mut self, outcome: Outcome) -> StepReport {
        StepReport {
            outcome,
            observation: self.observe(),
        }
    }
}
