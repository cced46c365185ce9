//! Exact grid traversal (Amanatides & Woo) over the occupancy grid.

use super::grid::OccupancyGrid;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("origin_occupied: ray origin ({x}, {y}) lies in an occupied cell")]
pub struct OriginOccupied {
    pub x: f64,
    pub y: f64,
}

/// Visits every cell a ray passes through, in order, yielding each cell with
/// the ray distance at which it is entered. The origin cell is not yielded.
#[derive(Debug, Clone)]
pub struct CellWalk {
    ox: f64,
    oy: f64,
    dx: f64,
    dy: f64,
    res: f64,
    cx: i64,
    cy: i64,
    step_x: i64,
    step_y: i64,
}

impl CellWalk {
    pub fn new(grid: &OccupancyGrid, ox: f64, oy: f64, bearing_deg: f64) -> Self {
        let (dy, dx) = bearing_deg.to_radians().sin_cos();
        let (cx, cy) = grid.cell_of(ox, oy);
        CellWalk {
            ox,
            oy,
            dx,
            dy,
            res: grid.resolution(),
            cx,
            cy,
            step_x: if dx > 0.0 { 1 } else { -1 },
            step_y: if dy > 0.0 { 1 } else { -1 },
        }
    }

    pub fn origin_cell(&self) -> (i64, i64) {
        (self.cx, self.cy)
    }

    // Distance along the ray to the next boundary on one axis, computed
    // from the cell index each time so no error accumulates.
    fn boundary_t(origin: f64, dir: f64, cell: i64, step: i64, res: f64) -> f64 {
        if dir == 0.0 {
            return f64::INFINITY;
        }
        let edge = if step > 0 { cell + 1 } else { cell } as f64 * res;
        ((edge - origin) / dir).max(0.0)
    }
}

impl Iterator for CellWalk {
    type Item = (i64, i64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let tx = Self::boundary_t(self.ox, self.dx, self.cx, self.step_x, self.res);
        let ty = Self::boundary_t(self.oy, self.dy, self.cy, self.step_y, self.res);
        if !tx.is_finite() && !ty.is_finite() {
            return None;
        }
        let t = if tx < ty {
            self.cx += self.step_x;
            tx
        } else {
            self.cy += self.step_y;
            ty
        };
        Some((self.cx, self.cy, t))
    }
}

/// Distance from `(ox, oy)` along `bearing_deg` to the first occupied cell
/// boundary, capped at `max_range`.
pub fn raycast(
    grid: &OccupancyGrid,
    ox: f64,
    oy: f64,
    bearing_deg: f64,
    max_range: f64,
) -> Result<f64, OriginOccupied> {
    let walk = CellWalk::new(grid, ox, oy, bearing_deg);
    let (cx, cy) = walk.origin_cell();
    if grid.is_occupied(cx, cy) {
        return Err(OriginOccupied { x: ox, y: oy });
    }
    for (cx, cy, t) in walk {
        if t >= max_range {
            break;
        }
        if grid.is_occupied(cx, cy) {
            return Ok(t);
        }
    }
    Ok(max_range)
}
