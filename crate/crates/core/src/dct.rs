//! Orthonormal type-II 2D DCT and the entropy-slope mode threshold.
//!
//! Modes `(p, q)` with `p, q <= t2` form the low-frequency (form + waviness)
//! block. The threshold search grows the block one L-shaped shell at a time,
//! so selecting `t2` costs `(t2 + 1)^2` mode reconstructions and the full
//! inverse is never formed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, ReportFlags, ThresholdMethod, ThresholdReport, ThresholdValue};
use crate::error::{invalid_arg, Result};
use crate::grid::{min_max, GrayImage, SurfaceGrid};

/// Row-major `n × n` matrix whose row `p` is the orthonormal cosine basis
/// vector `alpha_p cos(pi (2i + 1) p / 2n)`.
fn cosine_basis(n: usize) -> Vec<f64> {
    let a0 = (1.0 / n as f64).sqrt();
    let a = (2.0 / n as f64).sqrt();
    let mut m = vec![0.0; n * n];
    for p in 0..n {
        let alpha = if p == 0 { a0 } else { a };
        for i in 0..n {
            let arg = std::f64::consts::PI * ((2 * i + 1) * p) as f64 / (2 * n) as f64;
            m[p * n + i] = alpha * arg.cos();
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct DctCoefficients {
    rows: usize,
    cols: usize,
    coeffs: Vec<f64>,
    spacing: (f64, f64),
}

impl DctCoefficients {
    pub fn from_values(rows: usize, cols: usize, coeffs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || coeffs.len() != rows * cols {
            return Err(invalid_arg(format!(
                "{} coefficients do not fill a {rows}x{cols} matrix",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid_arg("non-finite DCT coefficient"));
        }
        Ok(Self {
            rows,
            cols,
            coeffs,
            spacing: (1.0, 1.0),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major `B_pq`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.coeffs[p * self.cols + q]
    }
}

/// `out = L · X · Rᵀ` for row-major `L (a × m)`, `X (m × n)`, `R (b × n)`.
fn sandwich(l: &[f64], x: &[f64], r: &[f64], m: usize, n: usize, a: usize, b: usize) -> Vec<f64> {
    // X · Rᵀ: each output row is a set of dot products between contiguous rows.
    let mut xr = vec![0.0; m * b];
    xr.par_chunks_mut(b).enumerate().for_each(|(i, out)| {
        let xi = &x[i * n..(i + 1) * n];
        for (q, o) in out.iter_mut().enumerate() {
            *o = xi.iter().zip(&r[q * n..(q + 1) * n]).map(|(u, v)| u * v).sum();
        }
    });
    let mut out = vec![0.0; a * b];
    out.par_chunks_mut(b).enumerate().for_each(|(p, row)| {
        for i in 0..m {
            let w = l[p * m + i];
            row.iter_mut().zip(&xr[i * b..(i + 1) * b]).for_each(|(o, v)| *o += w * v);
        }
    });
    out
}

fn transpose(m: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = m[i * n + j];
        }
    }
    t
}

/// Forward transform of a raw row-major buffer. Allows degenerate sizes
/// such as `1 × 1` that a [`SurfaceGrid`] cannot hold.
pub fn dct2_values(rows: usize, cols: usize, values: &[f64]) -> Result<DctCoefficients> {
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(invalid_arg(format!(
            "{} values do not fill a {rows}x{cols} matrix",
            values.len()
        )));
    }
    let cm = cosine_basis(rows);
    let cn = cosine_basis(cols);
    DctCoefficients::from_values(rows, cols, sandwich(&cm, values, &cn, rows, cols, rows, cols))
}

pub fn dct2_forward(grid: &SurfaceGrid) -> DctCoefficients {
    let (rows, cols) = grid.shape();
    let mut c = dct2_values(rows, cols, grid.heights()).expect("grid shape is valid");
    c.spacing = (grid.spacing_x(), grid.spacing_y());
    c
}

/// Inverse transform as a raw row-major buffer.
pub fn idct2_values(coeffs: &DctCoefficients) -> Vec<f64> {
    let (rows, cols) = coeffs.dims();
    let cm = transpose(&cosine_basis(rows), rows);
    let cn = transpose(&cosine_basis(cols), cols);
    sandwich(&cm, &coeffs.coeffs, &cn, rows, cols, rows, cols)
}

pub fn dct2_inverse(coeffs: &DctCoefficients) -> Result<SurfaceGrid> {
    let (rows, cols) = coeffs.dims();
    SurfaceGrid::with_spacing(rows, cols, idct2_values(coeffs), coeffs.spacing.0, coeffs.spacing.1)
}

/// Running sum of the `(t2 + 1)²` top-left modes.
pub struct BlockReconstructor<'a> {
    coeffs: &'a DctCoefficients,
    basis_m: Vec<f64>,
    basis_n: Vec<f64>,
    values: Vec<f64>,
    t2: Option<usize>,
    modes: usize,
}

impl<'a> BlockReconstructor<'a> {
    pub fn new(coeffs: &'a DctCoefficients) -> Self {
        let (rows, cols) = coeffs.dims();
        Self {
            coeffs,
            basis_m: cosine_basis(rows),
            basis_n: cosine_basis(cols),
            values: vec![0.0; rows * cols],
            t2: None,
            modes: 0,
        }
    }

    pub fn t2(&self) -> Option<usize> {
        self.t2
    }

    /// Modes accumulated so far.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds shell `t`: modes `(t, q ≤ t)` and `(p < t, t)`, as two rank-1
    /// updates.
    pub fn advance(&mut self) -> Result<usize> {
        let t = self.t2.map_or(0, |t| t + 1);
        let (rows, cols) = self.coeffs.dims();
        if t >= rows.min(cols) {
            return Err(invalid_arg(format!(
                "mode block t2 = {t} exceeds {}",
                rows.min(cols) - 1
            )));
        }
        let b = self.coeffs;
        let u_t = &self.basis_m[t * rows..(t + 1) * rows];
        let v_t = &self.basis_n[t * cols..(t + 1) * cols];
        // row vector r = Σ_{q≤t} B_tq v_q ; column vector c = Σ_{p<t} B_pt u_p
        let mut r = vec![0.0; cols];
        for q in 0..=t {
            let w = b.get(t, q);
            r.iter_mut()
                .zip(&self.basis_n[q * cols..(q + 1) * cols])
                .for_each(|(o, v)| *o += w * v);
        }
        let mut c = vec![0.0; rows];
        for p in 0..t {
            let w = b.get(p, t);
            c.iter_mut()
                .zip(&self.basis_m[p * rows..(p + 1) * rows])
                .for_each(|(o, u)| *o += w * u);
        }
        self.values
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| {
                let (ui, ci) = (u_t[i], c[i]);
                for ((o, rj), vj) in row.iter_mut().zip(&r).zip(v_t) {
                    *o += ui * rj + ci * vj;
                }
            });
        self.t2 = Some(t);
        self.modes += 2 * t + 1;
        Ok(t)
    }
}

/// Inverse contribution of the modes `p ≤ t2, q ≤ t2`, built shell by shell.
pub fn reconstruct_block(coeffs: &DctCoefficients, t2: usize) -> Result<SurfaceGrid> {
    let (rows, cols) = coeffs.dims();
    if t2 >= rows.min(cols) {
        return Err(invalid_arg(format!(
            "t2 = {t2} outside 0..{}",
            rows.min(cols)
        )));
    }
    let mut rec = BlockReconstructor::new(coeffs);
    for _ in 0..=t2 {
        rec.advance()?;
    }
    SurfaceGrid::with_spacing(rows, cols, rec.values, coeffs.spacing.0, coeffs.spacing.1)
}

/// Same block through a full inverse of the masked coefficient matrix.
pub fn reconstruct_block_direct(coeffs: &DctCoefficients, t2: usize) -> Result<SurfaceGrid> {
    let (rows, cols) = coeffs.dims();
    if t2 >= rows.min(cols) {
        return Err(invalid_arg(format!(
            "t2 = {t2} outside 0..{}",
            rows.min(cols)
        )));
    }
    let mut masked = coeffs.clone();
    for p in 0..rows {
        for q in 0..cols {
            if p > t2 || q > t2 {
                masked.coeffs[p * cols + q] = 0.0;
            }
        }
    }
    dct2_inverse(&masked)
}

/// Shannon entropy in nats of the histogram of `gray`, `p_i = count_i / pixels`.
pub fn image_entropy(gray: &GrayImage, bins: u32) -> Result<f64> {
    entropy_of(&gray.pixels, bins)
}

fn entropy_of(pixels: &[u32], bins: u32) -> Result<f64> {
    let mut hist = vec![0u64; bins as usize];
    for &v in pixels {
        let slot = hist
            .get_mut(v as usize)
            .ok_or_else(|| invalid_arg(format!("gray value {v} outside 0..{bins}")))?;
        *slot += 1;
    }
    let total = pixels.len() as f64;
    Ok(hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum())
}

/// How components are mapped to gray levels before measuring entropy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantization {
    /// Each component keeps the gray step of the source surface
    /// (`span / (bins − 1)`), offset to its own minimum and clamped to the
    /// top bin.
    #[default]
    GridStep,
    /// Each component is stretched over its own `[min, max]`.
    PerComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DctAutoConfig {
    pub slope_threshold: f64,
    /// Defaults to `min(rows, cols) − 1` when unset.
    pub t2_max: Option<usize>,
    pub bins: u32,
    pub quantization: Quantization,
}

impl Default for DctAutoConfig {
    fn default() -> Self {
        Self {
            slope_threshold: 0.005,
            t2_max: None,
            bins: 256,
            quantization: Quantization::GridStep,
        }
    }
}

impl DctAutoConfig {
    pub fn with_slope(slope_threshold: f64) -> Self {
        Self {
            slope_threshold,
            ..Self::default()
        }
    }

    fn resolve_t2_max(&self, rows: usize, cols: usize) -> Result<usize> {
        if !(self.slope_threshold > 0.0) {
            return Err(invalid_arg(format!(
                "slope threshold must be > 0, got {}",
                self.slope_threshold
            )));
        }
        if self.bins < 2 {
            return Err(invalid_arg(format!("bins must be >= 2, got {}", self.bins)));
        }
        let limit = rows.min(cols) - 1;
        let t = self.t2_max.unwrap_or(limit);
        if t < 1 || t > limit {
            return Err(invalid_arg(format!("t2_max = {t} outside 1..={limit}")));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub t2: usize,
    pub h_fw: f64,
    pub h_rough: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub points: Vec<EntropyPoint>,
    /// `h_fw(t) − h_fw(t − 1)` for `t = 1..`.
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DctThreshold {
    pub t2: usize,
    pub modes_computed: usize,
    pub capped: bool,
    pub curve: EntropyCurve,
}

struct Quantizer {
    mode: Quantization,
    step: f64,
    bins: u32,
}

impl Quantizer {
    fn apply(&self, values: &[f64], out: &mut Vec<u32>) {
        out.clear();
        let (lo, hi) = min_max(values);
        let top = f64::from(self.bins - 1);
        let step = match self.mode {
            Quantization::GridStep => self.step,
            Quantization::PerComponent => (hi - lo) / top,
        };
        if !(step > 0.0) {
            out.resize(values.len(), 0);
            return;
        }
        out.extend(
            values
                .iter()
                .map(|&v| ((v - lo) / step + 0.5).floor().clamp(0.0, top) as u32),
        );
    }
}

/// Grows the mode block until the form+waviness entropy gains less than the
/// slope threshold in one step; returns that `t2`.
pub fn dct_auto_threshold(grid: &SurfaceGrid, cfg: &DctAutoConfig) -> Result<DctThreshold> {
    let coeffs = dct2_forward(grid);
    auto_from_coeffs(grid, &coeffs, cfg).map(|(t, _)| t)
}

fn auto_from_coeffs(
    grid: &SurfaceGrid,
    coeffs: &DctCoefficients,
    cfg: &DctAutoConfig,
) -> Result<(DctThreshold, Vec<f64>)> {
    let (rows, cols) = grid.shape();
    let t2_max = cfg.resolve_t2_max(rows, cols)?;
    let (lo, hi) = grid.min_max();
    let q = Quantizer {
        mode: cfg.quantization,
        step: (hi - lo) / f64::from(cfg.bins - 1),
        bins: cfg.bins,
    };
    let mut rec = BlockReconstructor::new(coeffs);
    let mut rough = vec![0.0; rows * cols];
    let mut gray = Vec::with_capacity(rows * cols);
    let mut points: Vec<EntropyPoint> = Vec::new();
    let mut slopes = Vec::new();
    let mut selected = None;
    loop {
        let t = rec.advance()?;
        q.apply(rec.values(), &mut gray);
        let h_fw = entropy_of(&gray, cfg.bins)?;
        rough
            .iter_mut()
            .zip(grid.heights())
            .zip(rec.values())
            .for_each(|((r, x), f)| *r = x - f);
        q.apply(&rough, &mut gray);
        let h_rough = entropy_of(&gray, cfg.bins)?;
        if let Some(prev) = points.last() {
            let slope = h_fw - prev.h_fw;
            slopes.push(slope);
            if slope < cfg.slope_threshold {
                selected = Some(t);
            }
        }
        points.push(EntropyPoint { t2: t, h_fw, h_rough });
        if selected.is_some() || t >= t2_max {
            break;
        }
    }
    let t2 = selected.unwrap_or(t2_max);
    if selected.is_none() {
        log::warn!("entropy slope stayed above {} up to t2 = {t2_max}", cfg.slope_threshold);
    }
    let modes_computed = rec.modes();
    debug_assert_eq!(modes_computed, (t2 + 1) * (t2 + 1));
    Ok((
        DctThreshold {
            t2,
            modes_computed,
            capped: selected.is_none(),
            curve: EntropyCurve { points, slopes },
        },
        rec.values,
    ))
}

/// How the DCT split point is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DctMode {
    Auto(DctAutoConfig),
    Fixed(usize),
}

/// Form+waviness (stored in `form`; `waviness` is zero) and roughness from
/// the `t2` mode block.
pub fn dct_decompose(grid: &SurfaceGrid, mode: &DctMode) -> Result<Decomposition<SurfaceGrid>> {
    let coeffs = dct2_forward(grid);
    let (rows, cols) = grid.shape();
    let (method, t2, fw, curve, flags) = match mode {
        DctMode::Auto(cfg) => {
            let (th, fw) = auto_from_coeffs(grid, &coeffs, cfg)?;
            let curve = th.curve.points.iter().map(|p| (p.t2 as f64, p.h_fw)).collect();
            let flags = ReportFlags {
                capped: th.capped,
                degenerate: grid.min_max().0 == grid.min_max().1,
                ..Default::default()
            };
            (ThresholdMethod::DctAuto, th.t2, fw, curve, flags)
        }
        &DctMode::Fixed(t2) => {
            if t2 >= rows.min(cols) {
                return Err(invalid_arg(format!(
                    "t2 = {t2} outside 0..{}",
                    rows.min(cols)
                )));
            }
            let fw = reconstruct_block(&coeffs, t2)?.into_heights();
            (ThresholdMethod::DctFixed, t2, fw, Vec::new(), ReportFlags::default())
        }
    };
    let form = grid.with_heights(fw)?;
    let roughness = grid.sub(&form)?;
    Ok(Decomposition {
        waviness: grid.zeros_like(),
        form,
        roughness,
        report: ThresholdReport {
            method,
            selected_threshold: ThresholdValue::Index(t2),
            curve,
            modes_computed: Some((t2 + 1) * (t2 + 1)),
            flags,
        },
    })
}
