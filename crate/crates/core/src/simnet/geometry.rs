//! Hexagonal base-station lattices with optional wrap-around.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    /// Centre cell plus `rings` rings: `1 + 3 R (R + 1)` cells.
    HexRings { rings: usize },
    /// Offset-row hex grid; wrap-around needs an even row count.
    Grid { rows: usize, cols: usize },
}

impl Layout {
    pub fn num_cells(&self) -> usize {
        match *self {
            Layout::HexRings { rings } => 1 + 3 * rings * (rings + 1),
            Layout::Grid { rows, cols } => rows * cols,
        }
    }
}

/// Base-station coordinates plus the distance metric of the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub layout: Layout,
    pub isd: f64,
    pub wrap: bool,
    pub sites: Vec<Point>,
    /// Translations to the neighbouring copies when wrapping a ring layout.
    images: Vec<Point>,
    /// Periods of a wrapped grid layout.
    period: Point,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("layout has no cells")]
    Empty,
    #[error("wrap-around grid layouts need an even number of rows, got {0}")]
    OddRows(usize),
    #[error("wrap-around ring layouts need at least one ring")]
    NoRings,
}

impl Lattice {
    pub fn new(layout: Layout, isd: f64, wrap: bool) -> Result<Self, LayoutError> {
        let u = [isd, 0.0];
        let v = [0.5 * isd, 0.5 * SQRT3 * isd];
        let at = |q: f64, r: f64| [q * u[0] + r * v[0], q * u[1] + r * v[1]];
        let mut images = Vec::new();
        let mut period = [0.0, 0.0];
        let sites = match layout {
            Layout::HexRings { rings } => {
                if wrap && rings == 0 {
                    return Err(LayoutError::NoRings);
                }
                let r = rings as i64;
                let mut sites = Vec::with_capacity(layout.num_cells());
                // ring by ring so index 0 is the centre
                for ring in 0..=r {
                    for q in -ring..=ring {
                        for s in -ring..=ring {
                            let t = -q - s;
                            if q.abs().max(s.abs()).max(t.abs()) == ring {
                                sites.push(at(q as f64, s as f64));
                            }
                        }
                    }
                }
                if wrap {
                    // Cluster of size 3R^2 + 3R + 1 tiles the plane along (R+1) u + R v and its rotations.
                    let t = at((r + 1) as f64, r as f64);
                    for k in 0..6 {
                        let a = k as f64 * std::f64::consts::FRAC_PI_3;
                        let (s, c) = a.sin_cos();
                        images.push([c * t[0] - s * t[1], s * t[0] + c * t[1]]);
                    }
                }
                sites
            }
            Layout::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return Err(LayoutError::Empty);
                }
                if wrap && rows % 2 == 1 {
                    return Err(LayoutError::OddRows(rows));
                }
                period = [cols as f64 * isd, rows as f64 * 0.5 * SQRT3 * isd];
                let mut sites = Vec::with_capacity(rows * cols);
                for row in 0..rows {
                    for col in 0..cols {
                        let shift = if row % 2 == 1 { 0.5 * isd } else { 0.0 };
                        sites.push([col as f64 * isd + shift, row as f64 * 0.5 * SQRT3 * isd]);
                    }
                }
                sites
            }
        };
        Ok(Lattice {
            layout,
            isd,
            wrap,
            sites,
            images,
            period,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.sites.len()
    }

    /// Distance from `p` to site `bs`, through the wrap-around when enabled.
    pub fn distance(&self, p: Point, bs: usize) -> f64 {
        let b = self.sites[bs];
        let dx = p[0] - b[0];
        let dy = p[1] - b[1];
        if !self.wrap {
            return dx.hypot(dy);
        }
        match self.layout {
            Layout::HexRings { .. } => self
                .images
                .iter()
                .map(|t| (dx - t[0]).hypot(dy - t[1]))
                .fold(dx.hypot(dy), f64::min),
            Layout::Grid { .. } => {
                let wrap = |d: f64, period: f64| d - period * (d / period).round();
                wrap(dx, self.period[0]).hypot(wrap(dy, self.period[1]))
            }
        }
    }

    /// Uniform point in the hexagonal cell around site `bs`.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, bs: usize, rng: &mut R) -> Point {
        let half = 0.5 * self.isd;
        let radius = self.isd / SQRT3;
        loop {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(-radius..radius);
            if in_hexagon(x, y, half) {
                let c = self.sites[bs];
                return [c[0] + x, c[1] + y];
            }
        }
    }
}

/// Voronoi cell of a lattice site: within `half` of the bisectors towards
/// the neighbours at 0, 60 and 120 degrees.
fn in_hexagon(x: f64, y: f64, half: f64) -> bool {
    let a = x.abs();
    let b = (0.5 * x + 0.5 * SQRT3 * y).abs();
    let c = (-0.5 * x + 0.5 * SQRT3 * y).abs();
    a <= half && b <= half && c <= half
}
