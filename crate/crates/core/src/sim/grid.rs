use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Pose, RobotParams};

/// What the robot has learned about a cell so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Discovery {
    Unknown = 0,
    SeenFree = 1,
    SeenOccupied = 2,
}

/// Static ground-truth world plus the discovered overlay.
///
/// Cell `(cx, cy)` covers `[cx·res, (cx+1)·res) × [cy·res, (cy+1)·res)`,
/// with `cy` counted from the bottom row. Storage is row-major from `cy = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    occupied: Vec<bool>,
    overlay: Vec<Discovery>,
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("file_not_found: {0}")]
    FileNotFound(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("invalid_json: {0}")]
    Json(String),
    #[error("empty_world: no rows")]
    Empty,
    #[error("non_rectangular: row {row} has {found} cells, expected {expected}")]
    NonRectangular { row: usize, expected: usize, found: usize },
    #[error("unknown_glyph: {glyph:?} at row {row}, column {col}")]
    UnknownGlyph { glyph: char, row: usize, col: usize },
    #[error("open_border: cell ({cx}, {cy}) on the border is free")]
    OpenBorder { cx: usize, cy: usize },
    #[error("bad_resolution: {0}")]
    BadResolution(f64),
    #[error("bad_robot_params: {0}")]
    BadRobotParams(&'static str),
    #[error("start_out_of_bounds: ({x}, {y})")]
    StartOutOfBounds { x: f64, y: f64 },
    #[error("start_in_obstacle: robot disc at ({x}, {y}) overlaps an occupied cell")]
    StartInObstacle { x: f64, y: f64 },
}

impl WorldError {
    pub fn code(&self) -> &'static str {
        match self {
            WorldError::FileNotFound(_) => "file_not_found",
            WorldError::Io(_) => "io",
            WorldError::Json(_) => "invalid_json",
            WorldError::Empty => "empty_world",
            WorldError::NonRectangular { .. } => "non_rectangular",
            WorldError::UnknownGlyph { .. } => "unknown_glyph",
            WorldError::OpenBorder { .. } => "open_border",
            WorldError::BadResolution(_) => "bad_resolution",
            WorldError::BadRobotParams(_) => "bad_robot_params",
            WorldError::StartOutOfBounds { .. } => "start_out_of_bounds",
            WorldError::StartInObstacle { .. } => "start_in_obstacle",
        }
    }
}

fn default_resolution() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

/// On-disk world description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    pub start: StartPose,
    pub rows: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotParams>,
}

/// A validated world: grid, start pose and robot parameters.
#[derive(Debug, Clone)]
pub struct World {
    pub grid: OccupancyGrid,
    pub start: Pose,
    pub params: RobotParams,
}

pub fn load_world(path: impl AsRef<Path>) -> Result<World, WorldError> {
    let bytes = read_file(path.as_ref())?;
    parse_world(&bytes)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, WorldError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => WorldError::FileNotFound(path.display().to_string()),
        _ => WorldError::Io(e),
    })
}

pub fn parse_world(bytes: &[u8]) -> Result<World, WorldError> {
    let file: WorldFile =
        serde_json::from_slice(bytes).map_err(|e| WorldError::Json(e.to_string()))?;
    World::from_file(&file)
}

impl World {
    pub fn from_file(file: &WorldFile) -> Result<World, WorldError> {
        let grid = OccupancyGrid::from_rows(&file.rows, file.resolution)?;
        let params = file.robot.clone().unwrap_or_default();
        params.validate()?;
        let StartPose { x, y, theta } = file.start;
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) || !grid.contains(x, y) {
            return Err(WorldError::StartOutOfBounds { x, y });
        }
        if grid.disc_overlaps(x, y, params.radius) {
            return Err(WorldError::StartInObstacle { x, y });
        }
        Ok(World {
            grid,
            start: Pose::new(x, y, theta),
            params,
        })
    }
}

impl OccupancyGrid {
    /// Build from top-to-bottom glyph rows: `#` occupied, `.` free.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], resolution: f64) -> Result<Self, WorldError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(WorldError::BadResolution(resolution));
        }
        let first = rows.first().ok_or(WorldError::Empty)?;
        let width = first.as_ref().chars().count();
        if width == 0 {
            return Err(WorldError::Empty);
        }
        let height = rows.len();
        let mut occupied = vec![false; width * height];
        for (row, line) in rows.iter().enumerate() {
            let line = line.as_ref();
            let found = line.chars().count();
            if found != width {
                return Err(WorldError::NonRectangular {
                    row,
                    expected: width,
                    found,
                });
            }
            let cy = height - 1 - row;
            for (col, glyph) in line.chars().enumerate() {
                occupied[cy * width + col] = match glyph {
                    '#' => true,
                    '.' => false,
                    glyph => return Err(WorldError::UnknownGlyph { glyph, row, col }),
                };
            }
        }
        let grid = OccupancyGrid {
            width,
            height,
            resolution,
            occupied,
            overlay: vec![Discovery::Unknown; width * height],
        };
        for cy in 0..height {
            for cx in 0..width {
                let border = cx == 0 || cy == 0 || cx == width - 1 || cy == height - 1;
                if border && !grid.occupied[cy * width + cx] {
                    return Err(WorldError::OpenBorder { cx, cy });
                }
            }
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// World extent in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (w, h) = self.extent();
        (0.0..w).contains(&x) && (0.0..h).contains(&y)
    }

    fn index(&self, cx: i64, cy: i64) -> Option<usize> {
        if cx < 0 || cy < 0 || cx as usize >= self.width || cy as usize >= self.height {
            None
        } else {
            Some(cy as usize * self.width + cx as usize)
        }
    }

    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.resolution).floor() as i64,
            (y / self.resolution).floor() as i64,
        )
    }

    /// Ground truth; cells outside the grid count as occupied.
    pub fn is_occupied(&self, cx: i64, cy: i64) -> bool {
        self.index(cx, cy).is_none_or(|i| self.occupied[i])
    }

    pub fn discovery(&self, cx: i64, cy: i64) -> Option<Discovery> {
        self.index(cx, cy).map(|i| self.overlay[i])
    }

    /// Records an observation; returns true iff the overlay changed.
    /// Only `Unknown` cells transition.
    pub(crate) fn observe(&mut self, cx: i64, cy: i64, state: Discovery) -> bool {
        match self.index(cx, cy) {
            Some(i) if self.overlay[i] == Discovery::Unknown => {
                self.overlay[i] = state;
                true
            }
            _ => false,
        }
    }

    pub fn overlay_bytes(&self) -> Vec<u8> {
        self.overlay.iter().map(|d| *d as u8).collect()
    }

    /// SHA-256 over the discovered overlay, row-major from the bottom row.
    pub fn map_hash(&self) -> String {
        hex::encode(Sha256::digest(self.overlay_bytes()))
    }

    pub fn discovered_count(&self) -> usize {
        self.overlay
            .iter()
            .filter(|d| **d != Discovery::Unknown)
            .count()
    }

    pub fn reset_overlay(&mut self) {
        self.overlay.fill(Discovery::Unknown);
    }

    /// Squared distance from a point to the closed square of a cell.
    fn cell_distance_sq(&self, cx: i64, cy: i64, x: f64, y: f64) -> f64 {
        let r = self.resolution;
        let (x0, y0) = (cx as f64 * r, cy as f64 * r);
        let dx = (x0 - x).max(0.0).max(x - (x0 + r));
        let dy = (y0 - y).max(0.0).max(y - (y0 + r));
        dx * dx + dy * dy
    }

    /// True iff the open disc of `radius` around `(x, y)` intersects an
    /// occupied cell.
    pub fn disc_overlaps(&self, x: f64, y: f64, radius: f64) -> bool {
        self.segment_sweep_hits(x, y, x, y, radius)
    }

    /// True iff a disc swept along the segment from `(x0, y0)` to `(x1, y1)`
    /// intersects an occupied cell.
    pub fn segment_sweep_hits(&self, x0: f64, y0: f64, x1: f64, y1: f64, radius: f64) -> bool {
        let (lo_x, lo_y) = self.cell_of(x0.min(x1) - radius, y0.min(y1) - radius);
        let (hi_x, hi_y) = self.cell_of(x0.max(x1) + radius, y0.max(y1) + radius);
        let r2 = radius * radius;
        for cy in lo_y..=hi_y {
            for cx in lo_x..=hi_x {
                if self.is_occupied(cx, cy)
                    && self.segment_cell_distance_sq(cx, cy, x0, y0, x1, y1) < r2
                {
                    return true;
                }
            }
        }
        false
    }

    fn segment_cell_distance_sq(&self, cx: i64, cy: i64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
        let r = self.resolution;
        let (rx0, ry0) = (cx as f64 * r, cy as f64 * r);
        let (rx1, ry1) = (rx0 + r, ry0 + r);
        if segment_crosses_rect(x0, y0, x1, y1, rx0, ry0, rx1, ry1) {
            return 0.0;
        }
        // Disjoint convex sets: the closest pair involves a segment endpoint
        // or a rectangle corner.
        let mut best = self
            .cell_distance_sq(cx, cy, x0, y0)
            .min(self.cell_distance_sq(cx, cy, x1, y1));
        for (px, py) in [(rx0, ry0), (rx1, ry0), (rx0, ry1), (rx1, ry1)] {
            best = best.min(point_segment_distance_sq(px, py, x0, y0, x1, y1));
        }
        best
    }
}

fn point_segment_distance_sq(px: f64, py: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (x0 + t * dx, y0 + t * dy);
    (px - qx) * (px - qx) + (py - qy) * (py - qy)
}

/// Liang–Barsky clip: does the segment touch the closed rectangle?
#[allow(clippy::too_many_arguments)]
fn segment_crosses_rect(x0: f64, y0: f64, x1: f64, y1: f64, rx0: f64, ry0: f64, rx1: f64, ry1: f64) -> bool {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, x0 - rx0), (dx, rx1 - x0), (-dy, y0 - ry0), (dy, ry1 - y0)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}
