//! Height-field carriers shared by every backend.
//!
//! A [`SurfaceGrid`] is a row-major `rows × cols` matrix of heights with a
//! physical sample spacing in each direction. Row index `i` runs along `y`,
//! column index `j` along `x`. A [`Profile`] is a single cross-section.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_data, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    heights: Vec<f64>,
    rows: usize,
    cols: usize,
    spacing_x: f64,
    spacing_y: f64,
}

impl SurfaceGrid {
    /// Builds a grid with unit spacing.
    pub fn new(rows: usize, cols: usize, heights: Vec<f64>) -> Result<Self> {
        Self::with_spacing(rows, cols, heights, 1.0, 1.0)
    }

    pub fn with_spacing(
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
        spacing_x: f64,
        spacing_y: f64,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(invalid_arg(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if heights.len() != rows * cols {
            return Err(invalid_arg(format!(
                "expected {} heights for a {rows}x{cols} grid, got {}",
                rows * cols,
                heights.len()
            )));
        }
        check_spacing(spacing_x)?;
        check_spacing(spacing_y)?;
        if let Some(pos) = heights.iter().position(|h| !h.is_finite()) {
            return Err(invalid_data(format!(
                "non-finite height at row {}, col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            heights,
            rows,
            cols,
            spacing_x,
            spacing_y,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut heights = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                heights.push(f(i, j));
            }
        }
        Self::new(rows, cols, heights)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn spacing_x(&self) -> f64 {
        self.spacing_x
    }

    pub fn spacing_y(&self) -> f64 {
        self.spacing_y
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<f64> {
        self.heights
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.heights[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.heights[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.heights.iter().sum::<f64>() / self.heights.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.heights)
    }

    /// A grid of the same shape and spacing carrying new heights.
    pub fn with_heights(&self, heights: Vec<f64>) -> Result<Self> {
        Self::with_spacing(
            self.rows,
            self.cols,
            heights,
            self.spacing_x,
            self.spacing_y,
        )
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            heights: vec![0.0; self.heights.len()],
            ..self.clone()
        }
    }

    /// Element-wise `self - other`. Shapes must agree.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(invalid_arg(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let heights = self
            .heights
            .iter()
            .zip(&other.heights)
            .map(|(&a, &b)| f(a, b))
            .collect();
        self.with_heights(heights)
    }

    /// Rounds every height through `f32`, the precision of the native file
    /// format.
    pub fn to_f32_precision(&self) -> Self {
        Self {
            heights: self.heights.iter().map(|&h| h as f32 as f64).collect(),
            ..self.clone()
        }
    }

    /// Copies the `rows × cols` window starting at (`row0`, `col0`).
    pub fn window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(invalid_arg(format!(
                "window {rows}x{cols} at ({row0},{col0}) exceeds {}x{} grid",
                self.rows, self.cols
            )));
        }
        let mut heights = Vec::with_capacity(rows * cols);
        for i in row0..row0 + rows {
            heights.extend_from_slice(&self.row(i)[col0..col0 + cols]);
        }
        Self::with_spacing(rows, cols, heights, self.spacing_x, self.spacing_y)
    }
}

fn check_spacing(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid_arg(format!("spacing must be positive, got {s}")));
    }
    Ok(())
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// A row of the grid, running along `x`.
    X,
    /// A column of the grid, running along `y`.
    Y,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileOrigin {
    pub source: Option<String>,
    pub direction: Direction,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
    spacing: f64,
    origin: Option<ProfileOrigin>,
}

impl Profile {
    pub fn new(values: Vec<f64>, spacing: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid_arg(format!(
                "profile needs at least 2 samples, got {}",
                values.len()
            )));
        }
        check_spacing(spacing)?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_data(format!("non-finite profile value at {pos}")));
        }
        Ok(Self {
            values,
            spacing,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: ProfileOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Option<&ProfileOrigin> {
        self.origin.as_ref()
    }

    /// `(len - 1) · spacing`.
    pub fn measurement_length(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.spacing
    }

    /// Same spacing and origin, new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::new(values, self.spacing)?;
        p.origin = self.origin.clone();
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(invalid_arg(format!(
                "profile length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Index of the `i`-th of `count` evenly spaced cross-sections in `dim`.
pub(crate) fn cross_section_index(i: usize, count: usize, dim: usize) -> usize {
    let idx = ((i + 1) as f64 * dim as f64 / (count + 1) as f64).round() as usize;
    idx.min(dim - 1)
}

/// Takes `per_direction` rows (direction `x`) followed by `per_direction`
/// columns (direction `y`), evenly spaced across the grid.
pub fn extract_profiles(grid: &SurfaceGrid, per_direction: usize) -> Result<Vec<Profile>> {
    let limit = grid.rows.min(grid.cols);
    if per_direction == 0 || per_direction > limit {
        return Err(invalid_arg(format!(
            "per_direction must be in 1..={limit}, got {per_direction}"
        )));
    }
    let mut out = Vec::with_capacity(2 * per_direction);
    for i in 0..per_direction {
        let index = cross_section_index(i, per_direction, grid.rows);
        let p = Profile::new(grid.row(index).to_vec(), grid.spacing_x)?.with_origin(
            ProfileOrigin {
                source: None,
                direction: Direction::X,
                index,
            },
        );
        out.push(p);
    }
    for i in 0..per_direction {
        let index = cross_section_index(i, per_direction, grid.cols);
        let p = Profile::new(grid.column(index), grid.spacing_y)?.with_origin(ProfileOrigin {
            source: None,
            direction: Direction::Y,
            index,
        });
        out.push(p);
    }
    Ok(out)
}

/// Integer-valued image produced by quantizing heights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub levels: u32,
    pub pixels: Vec<u32>,
}

/// Maps `[min, max]` linearly onto `0..levels` with round-half-up. A
/// constant input maps to all zeros.
pub fn quantize_values(values: &[f64], levels: u32) -> Result<Vec<u32>> {
    if levels < 2 {
        return Err(invalid_arg(format!("levels must be >= 2, got {levels}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid_data("cannot quantize non-finite heights"));
    }
    let (lo, hi) = min_max(values);
    let span = hi - lo;
    if values.is_empty() || span <= 0.0 {
        return Ok(vec![0; values.len()]);
    }
    let top = f64::from(levels - 1);
    Ok(values
        .iter()
        .map(|&v| (((v - lo) / span) * top + 0.5).floor().min(top) as u32)
        .collect())
}

pub fn quantize_to_gray(grid: &SurfaceGrid, levels: u32) -> Result<GrayImage> {
    Ok(GrayImage {
        rows: grid.rows,
        cols: grid.cols,
        levels,
        pixels: quantize_values(&grid.heights, levels)?,
    })
}
