//! Self-affine test surfaces by spectral synthesis.
//!
//! Fourier amplitudes are complex Gaussians scaled by `q^-(H+1)`, where `q`
//! is the radial frequency in cycles per sample, giving a radially averaged
//! power spectrum `C(q) ∝ q^(-2(H+1))`. The DC term is zero, amplitudes
//! above `cutoff_fraction` are zero, and an optional roll-off holds the
//! amplitude flat below `rolloff_fraction`. The field is made Hermitian
//! before the inverse transform so the result is real, then rescaled to the
//! requested RMS height.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::grid::SurfaceGrid;
use crate::spectral::{fft2, fft_freq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub hurst: f64,
    pub size: usize,
    pub seed: u64,
    #[serde(default = "default_rms")]
    pub rms: f64,
    /// Short-wavelength cutoff in cycles per sample; 0.5 keeps every
    /// frequency up to Nyquist.
    #[serde(default = "default_cutoff")]
    pub cutoff_fraction: f64,
    /// Roll-off frequency in cycles per sample. Below it the amplitude is
    /// held at its roll-off value instead of continuing to grow.
    #[serde(default)]
    pub rolloff_fraction: Option<f64>,
}

fn default_rms() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    0.5
}

impl SynthConfig {
    pub fn new(hurst: f64, size: usize, seed: u64) -> Self {
        Self {
            hurst,
            size,
            seed,
            rms: default_rms(),
            cutoff_fraction: default_cutoff(),
            rolloff_fraction: None,
        }
    }

    /// Band-limited variant: nothing shorter than 16 samples, amplitude held
    /// flat beyond 256-sample wavelengths. Used for large (4096) surfaces
    /// whose profiles need a scale-separated energy spectrum.
    pub fn band_limited(hurst: f64, size: usize, seed: u64) -> Self {
        Self {
            cutoff_fraction: 1.0 / 16.0,
            rolloff_fraction: Some(1.0 / 256.0),
            ..Self::new(hurst, size, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hurst) {
            return Err(invalid_arg(format!(
                "hurst must be in [0, 1], got {}",
                self.hurst
            )));
        }
        if self.size < 16 || !self.size.is_power_of_two() {
            return Err(invalid_arg(format!(
                "size must be a power of two >= 16, got {}",
                self.size
            )));
        }
        if !(self.rms > 0.0 && self.rms.is_finite()) {
            return Err(invalid_arg(format!("rms must be positive, got {}", self.rms)));
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 0.5) {
            return Err(invalid_arg(format!(
                "cutoff_fraction must be in (0, 0.5], got {}",
                self.cutoff_fraction
            )));
        }
        if let Some(r) = self.rolloff_fraction {
            if !(r > 0.0 && r < self.cutoff_fraction) {
                return Err(invalid_arg(format!(
                    "rolloff_fraction must be in (0, cutoff_fraction), got {r}"
                )));
            }
        }
        Ok(())
    }
}

pub fn generate(config: &SynthConfig) -> Result<SurfaceGrid> {
    config.validate()?;
    let n = config.size;
    let exponent = -(config.hurst + 1.0);
    let floor_q = config.rolloff_fraction.unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut field = vec![Complex64::new(0.0, 0.0); n * n];

    // Draw each conjugate pair once, in row-major order of its first member.
    for i in 0..n {
        for j in 0..n {
            let (mi, mj) = ((n - i) % n, (n - j) % n);
            if (mi, mj) < (i, j) {
                continue;
            }
            let q = fft_freq(i, n).hypot(fft_freq(j, n));
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if q == 0.0 || q > config.cutoff_fraction {
                continue;
            }
            let amp = q.max(floor_q).powf(exponent);
            if (mi, mj) == (i, j) {
                field[i * n + j] = Complex64::new(re * amp, 0.0);
            } else {
                let z = Complex64::new(re * amp, im * amp);
                field[i * n + j] = z;
                field[mi * n + mj] = z.conj();
            }
        }
    }

    fft2(&mut field, n, n, FftDirection::Inverse);
    let mut heights: Vec<f64> = field.iter().map(|c| c.re).collect();
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    heights.iter_mut().for_each(|h| *h -= mean);
    let rms = (heights.iter().map(|h| h * h).sum::<f64>() / heights.len() as f64).sqrt();
    if rms > 0.0 {
        let scale = config.rms / rms;
        heights.iter_mut().for_each(|h| *h *= scale);
    }
    SurfaceGrid::new(n, n, heights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub count: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Class names in order of increasing H.
    pub classes: Vec<String>,
    pub class_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            count: 201,
            h_min: 0.0,
            h_max: 1.0,
            classes: vec!["rough".into(), "somewhat-rough".into(), "smooth".into()],
            class_sizes: vec![67, 67, 67],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(invalid_arg("sweep count must be positive"));
        }
        if self.classes.len() != self.class_sizes.len() {
            return Err(invalid_arg(format!(
                "{} class names but {} class sizes",
                self.classes.len(),
                self.class_sizes.len()
            )));
        }
        if self.class_sizes.iter().sum::<usize>() != self.count {
            return Err(invalid_arg(format!(
                "class sizes sum to {}, expected {}",
                self.class_sizes.iter().sum::<usize>(),
                self.count
            )));
        }
        if self.classes.iter().any(|c| c.is_empty()) {
            return Err(invalid_arg("class names must be non-empty"));
        }
        if !(self.h_min < self.h_max) {
            return Err(invalid_arg(format!(
                "h_min ({}) must be below h_max ({})",
                self.h_min, self.h_max
            )));
        }
        Ok(())
    }

    pub fn hurst_values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.h_min];
        }
        let step = (self.h_max - self.h_min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.h_max
                } else {
                    self.h_min + step * i as f64
                }
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes
            .iter()
            .zip(&self.class_sizes)
            .flat_map(|(c, &n)| std::iter::repeat_n(c.clone(), n))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepSample {
    pub id: String,
    pub hurst: f64,
    pub label: String,
    pub seed: u64,
    pub grid: SurfaceGrid,
}

/// SplitMix64 step, used to derive per-surface seeds from the master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn surface_id(index: usize) -> String {
    format!("s{index:04}")
}

/// Per-surface configs of a sweep without generating the grids.
pub fn sweep_configs(sweep: &SweepConfig, base: &SynthConfig) -> Result<Vec<(SynthConfig, String)>> {
    sweep.validate()?;
    let labels = sweep.labels();
    Ok(sweep
        .hurst_values()
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (h, label))| {
            let cfg = SynthConfig {
                hurst: h,
                seed: derive_seed(base.seed, i as u64),
                ..base.clone()
            };
            (cfg, label)
        })
        .collect())
}

pub fn generate_sweep(sweep: &SweepConfig, size: usize, seed: u64) -> Result<Vec<SweepSample>> {
    generate_sweep_with(sweep, &SynthConfig::new(0.0, size, seed))
}

/// Like [`generate_sweep`] but inherits rms, cutoff and roll-off from `base`;
/// `base.seed` is the master seed.
pub fn generate_sweep_with(sweep: &SweepConfig, base: &SynthConfig) -> Result<Vec<SweepSample>> {
    let configs = sweep_configs(sweep, base)?;
    configs
        .into_par_iter()
        .enumerate()
        .map(|(i, (cfg, label))| {
            Ok(SweepSample {
                id: surface_id(i),
                hurst: cfg.hurst,
                label,
                seed: cfg.seed,
                grid: generate(&cfg)?,
            })
        })
        .collect()
}
