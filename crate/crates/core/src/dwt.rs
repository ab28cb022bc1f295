//! Multilevel 1D wavelet decomposition and the energy-jump threshold that
//! splits detail levels into roughness and waviness.
//!
//! The transform is a cascaded two-channel filter bank with half-sample
//! symmetric extension. Each analysis step keeps the redundant boundary
//! coefficients (`(n + F - 1) / 2` per channel for an `F`-tap bank), so every
//! level reconstructs its input exactly regardless of length.

use serde::{Deserialize, Serialize};

use crate::decomposition::{
    Decomposition, ReportFlags, ThresholdMethod, ThresholdReport, ThresholdValue,
};
use crate::error::{invalid_arg, Result};
use crate::grid::Profile;

const BIOR44_DEC_LO: [f64; 10] = [
    0.0,
    0.037_828_455_507_264_04,
    -0.023_849_465_019_556_843,
    -0.110_624_404_418_437_18,
    0.377_402_855_612_830_66,
    0.852_698_679_008_893_8,
    0.377_402_855_612_830_66,
    -0.110_624_404_418_437_18,
    -0.023_849_465_019_556_843,
    0.037_828_455_507_264_04,
];
const BIOR44_DEC_HI: [f64; 10] = [
    0.0,
    -0.064_538_882_628_697_06,
    0.040_689_417_609_164_06,
    0.418_092_273_221_617_24,
    -0.788_485_616_405_582_9,
    0.418_092_273_221_617_24,
    0.040_689_417_609_164_06,
    -0.064_538_882_628_697_06,
    0.0,
    0.0,
];
const BIOR44_REC_LO: [f64; 10] = [
    0.0,
    -0.064_538_882_628_697_06,
    -0.040_689_417_609_164_06,
    0.418_092_273_221_617_24,
    0.788_485_616_405_582_9,
    0.418_092_273_221_617_24,
    -0.040_689_417_609_164_06,
    -0.064_538_882_628_697_06,
    0.0,
    0.0,
];
const BIOR44_REC_HI: [f64; 10] = [
    0.0,
    -0.037_828_455_507_264_04,
    -0.023_849_465_019_556_843,
    0.110_624_404_418_437_18,
    0.377_402_855_612_830_66,
    -0.852_698_679_008_893_8,
    0.377_402_855_612_830_66,
    0.110_624_404_418_437_18,
    -0.023_849_465_019_556_843,
    -0.037_828_455_507_264_04,
];

/// A biorthogonal filter bank stored with a common tap count.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    pub name: &'static str,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
    /// Length of the longest non-zero filter, used for the level limit.
    pub filter_len: usize,
}

impl Wavelet {
    /// CDF 9/7, the symmetric biorthogonal pair listed as bior4.4.
    pub fn bior44() -> Self {
        Self {
            name: "bior4.4",
            dec_lo: BIOR44_DEC_LO.to_vec(),
            dec_hi: BIOR44_DEC_HI.to_vec(),
            rec_lo: BIOR44_REC_LO.to_vec(),
            rec_hi: BIOR44_REC_HI.to_vec(),
            filter_len: 9,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "bior4.4" => Ok(Self::bior44()),
            other => Err(invalid_arg(format!("unknown wavelet {other:?}"))),
        }
    }

    fn taps(&self) -> usize {
        self.dec_lo.len()
    }
}

impl Default for Wavelet {
    fn default() -> Self {
        Self::bior44()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-sample symmetric: `x[-1] = x[0]`, `x[n] = x[n-1]`.
    #[default]
    Symmetric,
}

/// Deepest level `floor(log2(n / (filter_len - 1)))`, zero when the signal is
/// shorter than that ratio allows.
pub fn max_level(len: usize, filter_len: usize) -> usize {
    let base = filter_len.saturating_sub(1).max(1);
    if len < base {
        return 0;
    }
    (len / base).ilog2() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub levels: usize,
    pub approx: Vec<f64>,
    /// `details[0]` is level 1, the finest.
    pub details: Vec<Vec<f64>>,
    pub wavelet: Wavelet,
    pub boundary: Boundary,
    /// Input length of each analysis step; `lengths[0]` is the profile length.
    lengths: Vec<usize>,
    spacing: f64,
    template: Profile,
}

impl WaveletDecomposition {
    pub fn signal_len(&self) -> usize {
        self.lengths[0]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

#[inline]
fn symmetric_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn analysis_step(x: &[f64], w: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let taps = w.taps();
    let out_len = (n + taps - 1) / 2;
    let mut lo = vec![0.0; out_len];
    let mut hi = vec![0.0; out_len];
    for o in 0..out_len {
        let centre = 2 * o as isize + 1;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..taps {
            let v = x[symmetric_index(centre - j as isize, n)];
            a += w.dec_lo[j] * v;
            d += w.dec_hi[j] * v;
        }
        lo[o] = a;
        hi[o] = d;
    }
    (lo, hi)
}

/// Inverse of [`analysis_step`] producing `n` samples. Either channel may be
/// absent (treated as zeros).
fn synthesis_step(lo: Option<&[f64]>, hi: Option<&[f64]>, n: usize, w: &Wavelet) -> Vec<f64> {
    let taps = w.taps() as isize;
    let delay = taps - 2;
    let m = lo.or(hi).map_or(0, <[f64]>::len) as isize;
    let mut out = vec![0.0; n];
    for (t, slot) in out.iter_mut().enumerate() {
        let pos = t as isize + delay;
        let k_lo = ((pos - taps + 1) + 1).div_euclid(2).max(0);
        let k_hi = pos.div_euclid(2).min(m - 1);
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            let f = (pos - 2 * k) as usize;
            if let Some(a) = lo {
                acc += w.rec_lo[f] * a[k as usize];
            }
            if let Some(d) = hi {
                acc += w.rec_hi[f] * d[k as usize];
            }
        }
        *slot = acc;
    }
    out
}

/// Decomposes `profile` to `levels` (or the maximum level when `None`).
pub fn dwt_decompose(
    profile: &Profile,
    wavelet: &Wavelet,
    levels: Option<usize>,
) -> Result<WaveletDecomposition> {
    let n = profile.len();
    if n < wavelet.filter_len {
        return Err(invalid_arg(format!(
            "profile of length {n} is shorter than the {}-tap {} filter",
            wavelet.filter_len, wavelet.name
        )));
    }
    let limit = max_level(n, wavelet.filter_len);
    let levels = levels.unwrap_or(limit);
    if levels == 0 || levels > limit {
        return Err(invalid_arg(format!(
            "level {levels} outside 1..={limit} for length {n}"
        )));
    }

    let mut lengths = Vec::with_capacity(levels);
    let mut details = Vec::with_capacity(levels);
    let mut current = profile.values().to_vec();
    for _ in 0..levels {
        lengths.push(current.len());
        let (lo, hi) = analysis_step(&current, wavelet);
        details.push(hi);
        current = lo;
    }
    Ok(WaveletDecomposition {
        levels,
        approx: current,
        details,
        wavelet: wavelet.clone(),
        boundary: Boundary::Symmetric,
        lengths,
        spacing: profile.spacing(),
        template: profile.zeros_like(),
    })
}

/// One branch of the coefficient tree for single-branch reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Approx,
    /// 1-based level, 1 = finest.
    Detail(usize),
}

/// Synthesizes the signal from `approx` at `level` upward with all finer
/// details zero, optionally injecting `detail` at that same level.
fn cascade_up(
    dec: &WaveletDecomposition,
    level: usize,
    approx: Option<&[f64]>,
    detail: Option<&[f64]>,
) -> Vec<f64> {
    let w = &dec.wavelet;
    let mut signal = synthesis_step(approx, detail, dec.lengths[level - 1], w);
    for l in (1..level).rev() {
        signal = synthesis_step(Some(&signal), None, dec.lengths[l - 1], w);
    }
    signal
}

fn branch_values(dec: &WaveletDecomposition, which: Branch) -> Result<Vec<f64>> {
    match which {
        Branch::Approx => Ok(cascade_up(dec, dec.levels, Some(&dec.approx), None)),
        Branch::Detail(i) if (1..=dec.levels).contains(&i) => {
            Ok(cascade_up(dec, i, None, Some(&dec.details[i - 1])))
        }
        Branch::Detail(i) => Err(invalid_arg(format!(
            "detail level {i} outside 1..={}",
            dec.levels
        ))),
    }
}

/// Inverse transform of a single branch, every other coefficient zeroed.
pub fn reconstruct_level(dec: &WaveletDecomposition, which: Branch) -> Result<Profile> {
    dec.template.with_values(branch_values(dec, which)?)
}

/// Full inverse transform.
pub fn reconstruct(dec: &WaveletDecomposition) -> Result<Profile> {
    let w = &dec.wavelet;
    let mut signal = dec.approx.clone();
    for l in (1..=dec.levels).rev() {
        signal = synthesis_step(
            Some(&signal),
            Some(&dec.details[l - 1]),
            dec.lengths[l - 1],
            w,
        );
    }
    dec.template.with_values(signal)
}

pub fn energy(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    /// Per detail level, finest first.
    pub ratios: Vec<f64>,
    pub approx_ratio: f64,
    /// `diffs[i] = ratios[i + 1] - ratios[i]`.
    pub diffs: Vec<f64>,
    pub degenerate: bool,
}

/// Energy ratios of the reconstructed branches relative to their sum.
pub fn energy_curve(dec: &WaveletDecomposition) -> Result<EnergyCurve> {
    let mut detail_e = Vec::with_capacity(dec.levels);
    for i in 1..=dec.levels {
        detail_e.push(energy(&branch_values(dec, Branch::Detail(i))?));
    }
    let approx_e = energy(&branch_values(dec, Branch::Approx)?);
    Ok(curve_from_energies(&detail_e, approx_e))
}

pub(crate) fn curve_from_energies(detail_e: &[f64], approx_e: f64) -> EnergyCurve {
    let total: f64 = detail_e.iter().sum::<f64>() + approx_e;
    let (ratios, approx_ratio, degenerate) = if total > 0.0 {
        (
            detail_e.iter().map(|e| e / total).collect::<Vec<_>>(),
            approx_e / total,
            false,
        )
    } else {
        (vec![0.0; detail_e.len()], 1.0, true)
    };
    let diffs = ratios.windows(2).map(|w| w[1] - w[0]).collect();
    EnergyCurve {
        ratios,
        approx_ratio,
        diffs,
        degenerate,
    }
}

/// Level `k` below the largest jump in consecutive energy ratios; details
/// `1..=k` form roughness. Ties go to the smallest level. A degenerate curve
/// yields `k = 1`.
pub fn auto_threshold(curve: &EnergyCurve) -> Result<usize> {
    if curve.ratios.len() < 2 {
        return Err(invalid_arg(format!(
            "automatic threshold needs at least 2 levels, got {}",
            curve.ratios.len()
        )));
    }
    if curve.degenerate {
        return Ok(1);
    }
    let mut best = 0;
    for (i, &d) in curve.diffs.iter().enumerate() {
        if d > curve.diffs[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

fn split(
    dec: &WaveletDecomposition,
    k: usize,
    method: ThresholdMethod,
    curve: EnergyCurve,
) -> Result<Decomposition<Profile>> {
    let n = dec.signal_len();
    let mut rough = vec![0.0; n];
    let mut wavy = vec![0.0; n];
    for i in 1..=dec.levels {
        let b = branch_values(dec, Branch::Detail(i))?;
        let target = if i <= k { &mut rough } else { &mut wavy };
        target.iter_mut().zip(&b).for_each(|(t, v)| *t += v);
    }
    let form = branch_values(dec, Branch::Approx)?;
    let report = ThresholdReport {
        method,
        selected_threshold: ThresholdValue::Index(k),
        curve: curve
            .ratios
            .iter()
            .enumerate()
            .map(|(i, &r)| ((i + 1) as f64, r))
            .collect(),
        modes_computed: None,
        flags: ReportFlags {
            degenerate: curve.degenerate,
            ..Default::default()
        },
    };
    Ok(Decomposition {
        form: dec.template.with_values(form)?,
        waviness: dec.template.with_values(wavy)?,
        roughness: dec.template.with_values(rough)?,
        report,
    })
}

/// Max-level bior4.4 decomposition split at the automatic energy threshold.
pub fn dwt_decompose_auto(profile: &Profile) -> Result<Decomposition<Profile>> {
    let dec = dwt_decompose(profile, &Wavelet::bior44(), None)?;
    let curve = energy_curve(&dec)?;
    let k = auto_threshold(&curve)?;
    split(&dec, k, ThresholdMethod::DwtAuto, curve)
}

/// Same decomposition with a caller-chosen roughness level `k`.
pub fn dwt_decompose_fixed(profile: &Profile, k: usize) -> Result<Decomposition<Profile>> {
    let dec = dwt_decompose(profile, &Wavelet::bior44(), None)?;
    if k == 0 || k > dec.levels {
        return Err(invalid_arg(format!(
            "fixed level {k} outside 1..={}",
            dec.levels
        )));
    }
    let curve = energy_curve(&dec)?;
    split(&dec, k, ThresholdMethod::DwtFixed, curve)
}
