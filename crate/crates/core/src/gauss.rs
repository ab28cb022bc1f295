//! Gaussian filtering: a profile mean line with a table-driven cutoff, and
//! fixed-kernel areal smoothing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, ReportFlags, ThresholdMethod, ThresholdReport, ThresholdValue};
use crate::error::{invalid_arg, Result};
use crate::grid::{Profile, SurfaceGrid};

/// Upper bound on cutoff re-selection rounds.
pub const MAX_CUTOFF_ITERATIONS: usize = 10;

/// Index into `0..n` under half-sample symmetric extension.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// `α = √(ln 2 / π)`: the constant that puts 50% transmission at the cutoff.
pub const ISO_ALPHA: f64 = 0.469_718_639_349_825_66;

/// Samples of `(1 / αλc) exp(−π (x / αλc)²)` with [`ISO_ALPHA`], at
/// multiples of `spacing` within `|x| <= cutoff`, normalized to unit sum.
/// Index `len/2` is `x = 0`.
pub fn gauss1d_kernel(cutoff: f64, spacing: f64) -> Result<Vec<f64>> {
    gauss1d_kernel_with_alpha(cutoff, spacing, ISO_ALPHA)
}

/// [`gauss1d_kernel`] with an explicit width constant. `√(2/π)` moves the
/// cutoff transmission to `e⁻²`.
pub fn gauss1d_kernel_with_alpha(cutoff: f64, spacing: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(cutoff > 0.0 && cutoff.is_finite()) || !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid_arg(format!(
            "cutoff and spacing must be positive, got {cutoff} and {spacing}"
        )));
    }
    if !(alpha > 0.0) {
        return Err(invalid_arg(format!("alpha must be positive, got {alpha}")));
    }
    let scale = alpha * cutoff;
    let half = (cutoff / spacing + 1e-9).floor() as isize;
    let mut w: Vec<f64> = (-half..=half)
        .map(|i| {
            let x = i as f64 * spacing / scale;
            (-std::f64::consts::PI * x * x).exp() / scale
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    Ok(w)
}

fn convolve_symmetric(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len();
    let half = (kernel.len() / 2) as isize;
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * values[reflect(i + k as isize - half, n)])
                .sum()
        })
        .collect()
}

/// Mean line of `profile` for a fixed cutoff.
pub fn gauss1d_filter(profile: &Profile, cutoff: f64) -> Result<Profile> {
    let k = gauss1d_kernel(cutoff, profile.spacing())?;
    profile.with_values(convolve_symmetric(profile.values(), &k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    /// Exclusive lower Ra bound.
    pub ra_min: f64,
    /// Inclusive upper Ra bound.
    pub ra_max: f64,
    pub cutoff: f64,
}

/// Ra bands mapped to cutoff wavelengths. The default expects heights in µm
/// and spacing in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffTable {
    pub rows: Vec<CutoffRow>,
}

impl Default for CutoffTable {
    fn default() -> Self {
        let r = |ra_min, ra_max, cutoff| CutoffRow { ra_min, ra_max, cutoff };
        Self {
            rows: vec![
                r(0.006, 0.02, 0.08),
                r(0.02, 0.1, 0.25),
                r(0.1, 2.0, 0.8),
                r(2.0, 10.0, 2.5),
                r(10.0, 80.0, 8.0),
            ],
        }
    }
}

impl CutoffTable {
    pub fn new(rows: Vec<CutoffRow>) -> Result<Self> {
        let t = Self { rows };
        t.validate()?;
        Ok(t)
    }

    /// Rows sorted by cutoff ascending; Ra bands contiguous once sorted by Ra.
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(invalid_arg("cutoff table is empty"));
        }
        for r in &self.rows {
            if !(r.cutoff > 0.0) || !(r.ra_max > r.ra_min) || r.ra_min < 0.0 {
                return Err(invalid_arg(format!("bad cutoff row {r:?}")));
            }
        }
        if self.rows.windows(2).any(|w| w[1].cutoff <= w[0].cutoff) {
            return Err(invalid_arg("cutoff rows must be ordered by cutoff ascending"));
        }
        let mut by_ra = self.rows.clone();
        by_ra.sort_by(|a, b| a.ra_min.total_cmp(&b.ra_min));
        for w in by_ra.windows(2) {
            if (w[1].ra_min - w[0].ra_max).abs() > 1e-12 * w[0].ra_max.max(1.0) {
                return Err(invalid_arg(format!(
                    "Ra bands not contiguous between {} and {}",
                    w[0].ra_max, w[1].ra_min
                )));
            }
        }
        Ok(())
    }

    /// Row whose band `(ra_min, ra_max]` holds `ra`; values outside the
    /// table clamp to the nearest end band.
    pub fn lookup(&self, ra: f64) -> usize {
        let mut lowest = 0;
        let mut highest = 0;
        for (i, r) in self.rows.iter().enumerate() {
            if ra > r.ra_min && ra <= r.ra_max {
                return i;
            }
            if r.ra_min < self.rows[lowest].ra_min {
                lowest = i;
            }
            if r.ra_max > self.rows[highest].ra_max {
                highest = i;
            }
        }
        if ra <= self.rows[lowest].ra_min {
            lowest
        } else {
            highest
        }
    }
}

fn mean_abs_deviation(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs()).sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSelection {
    pub cutoff: f64,
    pub row: usize,
    /// Filtering rounds performed.
    pub iterations: usize,
    /// Ra before filtering, then Ra of each round's roughness.
    pub ra_history: Vec<f64>,
    pub converged: bool,
    pub length_limited: bool,
}

/// Picks a cutoff from the raw Ra, then refilters and re-picks from the
/// roughness Ra until the table row stops changing.
pub fn select_cutoff(profile: &Profile, table: &CutoffTable) -> Result<CutoffSelection> {
    table.validate()?;
    let lm = profile.measurement_length();
    let ra0 = mean_abs_deviation(profile.values());
    let mut row = table.lookup(ra0);
    let mut length_limited = false;
    if table.rows[row].cutoff > lm {
        // Nothing held yet: fall back to the longest cutoff that fits.
        length_limited = true;
        row = (0..table.rows.len())
            .rev()
            .find(|&i| table.rows[i].cutoff <= lm)
            .unwrap_or(0);
    }
    let mut ra_history = vec![ra0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_CUTOFF_ITERATIONS {
        iterations += 1;
        let mean_line = gauss1d_filter(profile, table.rows[row].cutoff)?;
        let rough: Vec<f64> = profile
            .values()
            .iter()
            .zip(mean_line.values())
            .map(|(x, m)| x - m)
            .collect();
        let ra = mean_abs_deviation(&rough);
        ra_history.push(ra);
        let next = table.lookup(ra);
        if next == row {
            converged = true;
            break;
        }
        if table.rows[next].cutoff > lm {
            length_limited = true;
            converged = true;
            break;
        }
        row = next;
    }
    Ok(CutoffSelection {
        cutoff: table.rows[row].cutoff,
        row,
        iterations,
        ra_history,
        converged,
        length_limited,
    })
}

/// Mean line (in `form`) and roughness at a given cutoff.
pub fn gauss1d_split(profile: &Profile, cutoff: f64) -> Result<(Profile, Profile)> {
    let mean_line = gauss1d_filter(profile, cutoff)?;
    let rough = profile.sub(&mean_line)?;
    Ok((mean_line, rough))
}

/// Two-way split at the table-selected cutoff: mean line in `form`,
/// `waviness` zero.
pub fn gauss1d_roughness(profile: &Profile, table: &CutoffTable) -> Result<Decomposition<Profile>> {
    let sel = select_cutoff(profile, table)?;
    let (form, roughness) = gauss1d_split(profile, sel.cutoff)?;
    Ok(Decomposition {
        waviness: profile.zeros_like(),
        form,
        roughness,
        report: ThresholdReport {
            method: ThresholdMethod::Gauss,
            selected_threshold: ThresholdValue::Cutoff(sel.cutoff),
            curve: sel
                .ra_history
                .iter()
                .enumerate()
                .map(|(i, &ra)| (i as f64, ra))
                .collect(),
            modes_computed: None,
            flags: ReportFlags {
                capped: !sel.converged,
                length_limited: sel.length_limited,
                ..Default::default()
            },
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gauss2dConfig {
    /// Odd kernel edge `K = 2W + 1`.
    pub kernel_size: usize,
}

impl Default for Gauss2dConfig {
    fn default() -> Self {
        Self { kernel_size: 21 }
    }
}

impl Gauss2dConfig {
    pub fn new(kernel_size: usize) -> Result<Self> {
        let c = Self { kernel_size };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(invalid_arg(format!(
                "kernel size must be odd and >= 3, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    pub fn sigma(&self) -> f64 {
        self.kernel_size as f64 / 6.0
    }

    /// Row-major `K × K` weights, unit sum.
    pub fn kernel(&self) -> Vec<f64> {
        let g = self.axis_weights();
        g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect()
    }

    // The sampled 2D Gaussian factors into identical axis weights.
    fn axis_weights(&self) -> Vec<f64> {
        let w = self.half_width() as isize;
        let s = self.sigma();
        let mut g: Vec<f64> = (-w..=w)
            .map(|u| (-((u * u) as f64) / (2.0 * s * s)).exp())
            .collect();
        let sum: f64 = g.iter().sum();
        g.iter_mut().for_each(|v| *v /= sum);
        g
    }
}

/// Smoothed surface (in `form`) and roughness from a `K × K` Gaussian kernel.
pub fn gauss2d_smooth(grid: &SurfaceGrid, cfg: &Gauss2dConfig) -> Result<Decomposition<SurfaceGrid>> {
    cfg.validate()?;
    let (rows, cols) = grid.shape();
    if rows < cfg.kernel_size || cols < cfg.kernel_size {
        return Err(invalid_arg(format!(
            "{rows}x{cols} grid is smaller than the {0}x{0} kernel",
            cfg.kernel_size
        )));
    }
    let g = cfg.axis_weights();
    let mut tmp = vec![0.0; rows * cols];
    tmp.par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out)| out.copy_from_slice(&convolve_symmetric(grid.row(i), &g)));
    let w = cfg.half_width() as isize;
    let mut smooth = vec![0.0; rows * cols];
    smooth
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out)| {
            for (k, wk) in g.iter().enumerate() {
                let src = reflect(i as isize + k as isize - w, rows);
                out.iter_mut()
                    .zip(&tmp[src * cols..(src + 1) * cols])
                    .for_each(|(o, v)| *o += wk * v);
            }
        });
    let form = grid.with_heights(smooth)?;
    let roughness = grid.sub(&form)?;
    Ok(Decomposition {
        waviness: grid.zeros_like(),
        form,
        roughness,
        report: ThresholdReport {
            method: ThresholdMethod::Gauss,
            selected_threshold: ThresholdValue::Index(cfg.kernel_size),
            curve: Vec::new(),
            modes_computed: None,
            flags: ReportFlags::default(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sinusoid(n: usize, spacing: f64, wavelength: f64, amp: f64) -> Profile {
        Profile::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * i as f64 * spacing / wavelength).sin())
                .collect(),
            spacing,
        )
        .unwrap()
    }

    fn interior_amplitude(values: &[f64], margin: usize) -> f64 {
        values[margin..values.len() - margin]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn kernel_shape() {
        for (c, s) in [(0.8, 0.001), (2.5, 0.3), (1.0, 1.0)] {
            let k = gauss1d_kernel(c, s).unwrap();
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
            for i in 0..k.len() / 2 {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
        assert!(gauss1d_kernel(0.0, 1.0).is_err());
        assert!(gauss1d_kernel(1.0, -1.0).is_err());
    }

    #[test]
    fn half_transmission_at_cutoff() {
        let (lc, dx) = (0.8, 0.008);
        let p = sinusoid(2000, dx, lc, 1.0);
        let m = gauss1d_filter(&p, lc).unwrap();
        let ratio = interior_amplitude(m.values(), 200);
        assert!((ratio - 0.5).abs() < 0.02, "ratio {ratio}");
        let wide = gauss1d_kernel_with_alpha(lc, dx, (2.0 / PI).sqrt()).unwrap();
        let m = convolve_symmetric(p.values(), &wide);
        assert!((interior_amplitude(&m, 200) - (-2f64).exp()).abs() < 0.02);
    }

    #[test]
    fn iso_alpha_value() {
        assert!((ISO_ALPHA - (2f64.ln() / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn long_and_short_waves() {
        let (lc, dx) = (0.8, 0.008);
        let long = sinusoid(4000, dx, 20.0 * lc, 1.0);
        let (_, r) = gauss1d_split(&long, lc).unwrap();
        assert!(interior_amplitude(r.values(), 200) < 0.05);
        let short = sinusoid(4000, dx, lc / 8.0, 1.0);
        let (_, r) = gauss1d_split(&short, lc).unwrap();
        assert!(interior_amplitude(r.values(), 200) > 0.95);
    }

    #[test]
    fn constant_profile_has_no_roughness() {
        let p = Profile::new(vec![3.0; 300], 0.01).unwrap();
        let d = gauss1d_roughness(&p, &CutoffTable::default()).unwrap();
        assert!(d.roughness.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn default_table_lookup() {
        let t = CutoffTable::default();
        t.validate().unwrap();
        assert_eq!(t.rows[t.lookup(0.05)].cutoff, 0.25);
        assert_eq!(t.rows[t.lookup(2.0)].cutoff, 0.8);
        assert_eq!(t.rows[t.lookup(2.0001)].cutoff, 2.5);
        assert_eq!(t.rows[t.lookup(1e-4)].cutoff, 0.08);
        assert_eq!(t.rows[t.lookup(500.0)].cutoff, 8.0);
        let mut bad = t.clone();
        bad.rows.swap(0, 1);
        assert!(bad.validate().is_err());
        bad = t.clone();
        bad.rows[2].ra_min = 0.2;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fixed_point_in_one_round() {
        // Ra of a pure short wave lies in the 0.8 mm band before and after filtering.
        let p = sinusoid(3000, 0.002, 0.05, 1.0);
        let s = select_cutoff(&p, &CutoffTable::default()).unwrap();
        assert_eq!(s.cutoff, 0.8);
        assert_eq!(s.iterations, 1);
        assert!(s.converged && !s.length_limited);
    }

    #[test]
    fn length_limit_keeps_held_cutoff() {
        // Ra ~ 6.4 asks for 2.5 mm, but the profile is only ~1.6 mm long.
        let p = sinusoid(800, 0.002, 0.1, 10.0);
        let s = select_cutoff(&p, &CutoffTable::default()).unwrap();
        assert!(s.length_limited);
        assert!(s.cutoff <= p.measurement_length());
        assert_eq!(s.cutoff, 0.8);
    }

    #[test]
    fn oscillating_table_hits_cap() {
        // Large raw Ra picks a short cutoff, which strips the long wave; the
        // small residual Ra picks a long cutoff, which lets it back in.
        let table = CutoffTable::new(vec![
            CutoffRow { ra_min: 1.0, ra_max: 100.0, cutoff: 8.0 },
            CutoffRow { ra_min: 0.0, ra_max: 1.0, cutoff: 400.0 },
        ])
        .unwrap();
        let values = (0..2000)
            .map(|i| {
                let x = i as f64;
                10.0 * (2.0 * PI * x / 100.0).sin() + 0.5 * (2.0 * PI * x / 4.0).sin()
            })
            .collect();
        let p = Profile::new(values, 1.0).unwrap();
        let s = select_cutoff(&p, &table).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, MAX_CUTOFF_ITERATIONS);
        assert!(table.rows.iter().any(|r| r.cutoff == s.cutoff));
        let d = gauss1d_roughness(&p, &table).unwrap();
        assert!(d.report.flags.capped);
    }

    #[test]
    fn kernel_2d_parameters() {
        let c = Gauss2dConfig::default();
        assert_eq!(c.half_width(), 10);
        assert_eq!(c.sigma(), 3.5);
        assert!((c.kernel().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(Gauss2dConfig::new(4).is_err());
        assert!(Gauss2dConfig::new(1).is_err());
    }

    #[test]
    fn impulse_and_constant_2d() {
        let cfg = Gauss2dConfig::default();
        let n = 41;
        let g = SurfaceGrid::from_fn(n, n, |i, j| if i == 20 && j == 20 { 1.0 } else { 0.0 }).unwrap();
        let d = gauss2d_smooth(&g, &cfg).unwrap();
        let k = cfg.kernel();
        for u in 0..21 {
            for v in 0..21 {
                assert!((d.form.get(10 + u, 10 + v) - k[u * 21 + v]).abs() < 1e-15);
            }
        }
        let c = SurfaceGrid::new(30, 25, vec![-2.5; 750]).unwrap();
        let d = gauss2d_smooth(&c, &cfg).unwrap();
        assert!(d.roughness.heights().iter().all(|v| v.abs() < 1e-12));
        assert!(gauss2d_smooth(&SurfaceGrid::new(20, 30, vec![0.0; 600]).unwrap(), &cfg).is_err());
    }
}
