use super::grid::OccupancyGrid;
use super::raycast::raycast;
use super::Pose;

pub const IMAGE_WIDTH: usize = 160;
pub const IMAGE_HEIGHT: usize = 120;
pub const FIELD_OF_VIEW_DEG: f64 = 90.0;
pub const CAMERA_RANGE: f64 = 8.0;

const SKY: u8 = 40;
const FLOOR: u8 = 90;

/// 8-bit grayscale raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pixels: Vec<u8>,
}

impl ImageFrame {
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * IMAGE_WIDTH + col]
    }

    /// Binary PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{IMAGE_WIDTH} {IMAGE_HEIGHT}\n255\n").into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Option<Self> {
        let header = format!("P5\n{IMAGE_WIDTH} {IMAGE_HEIGHT}\n255\n");
        let body = bytes.strip_prefix(header.as_bytes())?;
        (body.len() == IMAGE_WIDTH * IMAGE_HEIGHT).then(|| ImageFrame {
            pixels: body.to_vec(),
        })
    }
}

/// Bearing of the centre of column `col`; column 0 is the left edge.
pub fn column_bearing(theta: f64, col: usize) -> f64 {
    let per_col = FIELD_OF_VIEW_DEG / IMAGE_WIDTH as f64;
    theta + FIELD_OF_VIEW_DEG / 2.0 - (col as f64 + 0.5) * per_col
}

/// Wall band height and shade for a column whose ray travels `range`.
pub fn column_band(range: f64) -> (usize, u8) {
    let height = (IMAGE_HEIGHT as f64 * 0.5 / range).floor().min(IMAGE_HEIGHT as f64) as usize;
    let shade = 255 - ((range / CAMERA_RANGE * 200.0).floor().min(200.0) as u8);
    (height, shade)
}

/// First-person synthetic view: one raycast per column, a centred wall band
/// over a dark ceiling and lighter floor.
pub fn capture_image(grid: &OccupancyGrid, pose: &Pose) -> ImageFrame {
    let mut pixels = vec![0u8; IMAGE_WIDTH * IMAGE_HEIGHT];
    for col in 0..IMAGE_WIDTH {
        let bearing = column_bearing(pose.theta, col);
        let range = raycast(grid, pose.x, pose.y, bearing, CAMERA_RANGE).unwrap_or(0.0);
        let (band, shade) = column_band(range);
        let top = (IMAGE_HEIGHT - band) / 2;
        for row in 0..IMAGE_HEIGHT {
            pixels[row * IMAGE_WIDTH + col] = if row < top {
                SKY
            } else if row < top + band {
                shade
            } else {
                FLOOR
            };
        }
    }
    ImageFrame { pixels }
}
