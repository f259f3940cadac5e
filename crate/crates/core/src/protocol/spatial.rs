//! Rigid warping of feature grids between agent frames.
//!
//! Grid coordinates put the origin at the grid center: cell `(r, col)` has its
//! center at `x = col − (W−1)/2`, `y = r − (H−1)/2`, in cells. A relative pose
//! `(x, y, yaw)` maps source-frame points to target-frame points as
//! `p_t = R(yaw)·p_s + (x, y)/cell_size`; warping samples the source at
//! `R(−yaw)·(p_t − (x, y)/cell_size)` for every target cell.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// meters
    pub x: f64,
    /// meters
    pub y: f64,
    /// radians, normalized to (−π, π]
    pub yaw: f64,
}

pub(crate) fn normalize_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Result<Self> {
        for (i, v) in [x, y, yaw].into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
        }
        Ok(Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        })
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
        }
    }

    /// The pose undoing this one.
    pub fn inverse(&self) -> Self {
        let (s, c) = self.yaw.sin_cos();
        Self {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            yaw: normalize_angle(-self.yaw),
        }
    }

    /// Pose of `other` expressed in this pose's frame.
    pub fn relative_to_self(&self, other: &Pose) -> Self {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (other.x - self.x, other.y - self.y);
        Self {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            yaw: normalize_angle(other.yaw - self.yaw),
        }
    }
}

/// Per-cell flag: `true` where the warped sample came from inside the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validity {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl Validity {
    pub fn all(height: usize, width: usize, valid: bool) -> Self {
        Self {
            height,
            width,
            cells: vec![valid; height * width],
        }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::DimensionMismatch {
                what: "validity cells",
                expected: height * width,
                actual: cells.len(),
            });
        }
        Ok(Self { height, width, cells })
    }

    pub fn get(&self, r: usize, col: usize) -> bool {
        self.cells[r * self.width + col]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&v| v).count()
    }
}

const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Source sample location (row, col) for every target cell, `None` when outside.
fn sample_points(height: usize, width: usize, pose: &Pose, cell_size: f64) -> Result<Vec<Option<(f64, f64)>>> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidParameter(format!("cell size must be positive, got {cell_size}")));
    }
    let (s, c) = pose.yaw.sin_cos();
    let (tx, ty) = (pose.x / cell_size, pose.y / cell_size);
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for col in 0..width {
            let (xt, yt) = (col as f64 - cx - tx, r as f64 - cy - ty);
            let xs = snap(c * xt + s * yt + cx);
            let ys = snap(-s * xt + c * yt + cy);
            let inside = (0.0..=width as f64 - 1.0).contains(&xs) && (0.0..=height as f64 - 1.0).contains(&ys);
            out.push(inside.then_some((ys, xs)));
        }
    }
    Ok(out)
}

/// Validity flags [`spatial_transform`] would produce, without touching values.
pub fn transform_validity(height: usize, width: usize, relative: &Pose, cell_size: f64) -> Result<Validity> {
    let cells = sample_points(height, width, relative, cell_size)?
        .into_iter()
        .map(|p| p.is_some())
        .collect();
    Ok(Validity {
        height,
        width,
        cells,
    })
}

/// Inverse-warps `src` into the target frame with bilinear sampling.
pub fn spatial_transform(src: &FeatureGrid, relative: &Pose, cell_size: f64) -> Result<(FeatureGrid, Validity)> {
    let (channels, height, width) = src.dims();
    let points = sample_points(height, width, relative, cell_size)?;
    let plane = height * width;
    let mut values = vec![0.0; channels * plane];
    for (cell, p) in points.iter().enumerate() {
        let Some((ys, xs)) = *p else { continue };
        let (r0, c0) = (ys.floor() as usize, xs.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(height - 1), (c0 + 1).min(width - 1));
        let (fy, fx) = (ys - r0 as f64, xs - c0 as f64);
        let taps = [
            (r0, c0, (1.0 - fy) * (1.0 - fx)),
            (r0, c1, (1.0 - fy) * fx),
            (r1, c0, fy * (1.0 - fx)),
            (r1, c1, fy * fx),
        ];
        for ch in 0..channels {
            let plane_vals = src.channel(ch);
            let mut acc = 0.0;
            for &(r, col, w) in &taps {
                if w != 0.0 {
                    acc += w * plane_vals[r * width + col];
                }
            }
            values[ch * plane + cell] = acc;
        }
    }
    let validity = Validity {
        height,
        width,
        cells: points.iter().map(|p| p.is_some()).collect(),
    };
    Ok((FeatureGrid::from_parts(src.dims(), values), validity))
}
