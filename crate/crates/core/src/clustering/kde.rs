//! Gaussian kernel density surface on a regular grid, for hot-spot contours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::Point;
use crate::error::{Error, Result};

/// Grid padding around the data, in bandwidths.
const PADDING: f64 = 4.0;
/// Kernel contributions beyond this many bandwidths are ignored.
const CUTOFF: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub min_x: f64,
    pub min_y: f64,
    pub cell_width: f64,
    pub cell_height: f64,
    pub nx: usize,
    pub ny: usize,
    pub bandwidth: f64,
    /// Row-major, `values[iy * nx + ix]`, evaluated at cell centers.
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        [
            self.min_x + (ix as f64 + 0.5) * self.cell_width,
            self.min_y + (iy as f64 + 0.5) * self.cell_height,
        ]
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width * self.cell_height
    }

    /// Midpoint-rule integral of the surface.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// `x,y,density` rows for external contour plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,density\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let [x, y] = self.cell_center(ix, iy);
                out.push_str(&format!("{x},{y},{}\n", self.value(ix, iy)));
            }
        }
        out
    }
}

/// Scott's rule for an isotropic 2-D kernel: mean axis standard deviation times `n^(-1/6)`.
pub fn scott_bandwidth(points: &[Point]) -> f64 {
    let n = points.len() as f64;
    let std = |axis: usize| {
        let mean = points.iter().map(|p| p[axis]).sum::<f64>() / n;
        (points.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    0.5 * (std(0) + std(1)) * n.powf(-1.0 / 6.0)
}

/// Isotropic Gaussian KDE over the bounding box of `points` padded by four bandwidths.
/// `bandwidth: None` uses Scott's rule.
pub fn kde_density_grid(
    points: &[Point],
    bandwidth: Option<f64>,
    resolution: (usize, usize),
) -> Result<DensityGrid> {
    if points.is_empty() {
        return Err(Error::InsufficientData("density grid needs at least one point".into()));
    }
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::Parameter(format!(
            "grid resolution must be positive, got {nx}x{ny}"
        )));
    }
    let h = bandwidth.unwrap_or_else(|| scott_bandwidth(points));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let min_x = lo[0] - PADDING * h;
    let min_y = lo[1] - PADDING * h;
    let cell_width = (hi[0] - lo[0] + 2.0 * PADDING * h) / nx as f64;
    let cell_height = (hi[1] - lo[1] + 2.0 * PADDING * h) / ny as f64;

    let norm = 1.0 / (2.0 * std::f64::consts::PI * h * h * points.len() as f64);
    let reach = CUTOFF * h;
    let values: Vec<f64> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let cy = min_y + (iy as f64 + 0.5) * cell_height;
            let near: Vec<&Point> = points.iter().filter(|p| (p[1] - cy).abs() <= reach).collect();
            (0..nx).map(move |ix| {
                let cx = min_x + (ix as f64 + 0.5) * cell_width;
                let sum: f64 = near
                    .iter()
                    .filter(|p| (p[0] - cx).abs() <= reach)
                    .map(|p| {
                        let (dx, dy) = (p[0] - cx, p[1] - cy);
                        (-(dx * dx + dy * dy) / (2.0 * h * h)).exp()
                    })
                    .sum();
                sum * norm
            })
        })
        .collect();

    Ok(DensityGrid {
        min_x,
        min_y,
        cell_width,
        cell_height,
        nx,
        ny,
        bandwidth: h,
        values,
    })
}
