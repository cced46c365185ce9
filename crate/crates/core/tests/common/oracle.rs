//! Brute-force reference models, written directly from the world format
//! and kept independent of the simulator code.

#![allow(dead_code)]

pub struct OracleGrid {
    occ: Vec<Vec<bool>>, // [cy][cx], cy counted from the bottom row
    pub width: i64,
    pub height: i64,
    pub res: f64,
}

impl OracleGrid {
    pub fn from_rows(rows: &[String], res: f64) -> Self {
        let height = rows.len();
        let occ = (0..height)
            .map(|cy| rows[height - 1 - cy].chars().map(|c| c == '#').collect())
            .collect::<Vec<Vec<bool>>>();
        OracleGrid {
            width: occ[0].len() as i64,
            height: height as i64,
            occ,
            res,
        }
    }

    pub fn occupied(&self, cx: i64, cy: i64) -> bool {
        if cx < 0 || cy < 0 || cx >= self.width || cy >= self.height {
            return true;
        }
        self.occ[cy as usize][cx as usize]
    }

    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        self.occupied((x / self.res).floor() as i64, (y / self.res).floor() as i64)
    }

    /// March along the ray in 1e-4 m steps; first sample inside an occupied
    /// cell is the hit. Returns `max` when nothing is hit.
    pub fn march(&self, ox: f64, oy: f64, bearing_deg: f64, max: f64) -> f64 {
        const STEP: f64 = 1e-4;
        let (s, c) = bearing_deg.to_radians().sin_cos();
        let mut i: u64 = 0;
        loop {
            let d = i as f64 * STEP;
            if d > max {
                return max;
            }
            if self.occupied_at(ox + d * c, oy + d * s) {
                return d;
            }
            i += 1;
        }
    }

    /// Does a disc of radius `r` at `(x, y)` overlap any occupied cell?
    pub fn disc_overlaps(&self, x: f64, y: f64, r: f64) -> bool {
        let lo_x = ((x - r) / self.res).floor() as i64 - 1;
        let hi_x = ((x + r) / self.res).floor() as i64 + 1;
        let lo_y = ((y - r) / self.res).floor() as i64 - 1;
        let hi_y = ((y + r) / self.res).floor() as i64 + 1;
        for cy in lo_y..=hi_y {
            for cx in lo_x..=hi_x {
                if !self.occupied(cx, cy) {
                    continue;
                }
                let (x0, y0) = (cx as f64 * self.res, cy as f64 * self.res);
                let nx = x.clamp(x0, x0 + self.res);
                let ny = y.clamp(y0, y0 + self.res);
                if (x - nx).hypot(y - ny) < r {
                    return true;
                }
            }
        }
        false
    }

    /// Distance the disc can slide along `heading_deg` before first overlap,
    /// resolved to 1e-4 m (1e-3 m scan, then 1e-4 m refinement).
    pub fn contact_distance(&self, x: f64, y: f64, heading_deg: f64, r: f64, max: f64) -> f64 {
        let (s, c) = heading_deg.to_radians().sin_cos();
        let hits = |d: f64| self.disc_overlaps(x + d * c, y + d * s, r);
        let mut i: u64 = 1;
        loop {
            let d = i as f64 * 1e-3;
            if d > max {
                return max;
            }
            if hits(d) {
                break;
            }
            i += 1;
        }
        let base = (i - 1) as f64 * 1e-3;
        let mut j: u64 = 1;
        while !hits(base + j as f64 * 1e-4) {
            j += 1;
        }
        base + (j - 1) as f64 * 1e-4
    }
}

/// Camera column from the documented formulas: band height
/// `min(120, floor(60 / range))`, shade `255 - min(200, floor(range / 8 * 200))`,
/// ceiling 40 above the band, floor 90 below.
pub fn camera_column(range: f64) -> Vec<u8> {
    let band = ((60.0 / range).floor() as usize).min(120);
    let shade = 255 - ((range / 8.0 * 200.0).floor() as usize).min(200) as u8;
    let top = (120 - band) / 2;
    (0..120)
        .map(|row| {
            if row < top {
                40
            } else if row < top + band {
                shade
            } else {
                90
            }
        })
        .collect()
}
