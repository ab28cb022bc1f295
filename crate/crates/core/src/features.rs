//! Profile (R*) and areal (S*) roughness parameters and feature matrices.
//!
//! Components are mean-centered before evaluation. Continuous integrals
//! become sample means; derivatives are central differences with one-sided
//! differences at the ends. Undefined shape parameters of a flat component
//! are written as 0 and the row is marked degenerate.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::grid::{Profile, SurfaceGrid};
use crate::spectral::magnitude_spectrum;

pub const DEFAULT_ACF_THRESHOLD: f64 = 0.2;

pub const FEATURE_NAMES_1D: [&str; 12] = [
    "Rq", "Rsk", "Rku", "Rt", "Ra", "Ral", "Rsw", "Rdt", "Rdq", "Rda", "Rdl", "Rdr",
];

pub const FEATURE_NAMES_2D: [&str; 9] = ["Sq", "Ssk", "Sku", "Sp", "Sv", "Sz", "Sa", "Sdq", "Sdr"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector1D {
    #[serde(rename = "Rq")]
    pub rq: f64,
    #[serde(rename = "Rsk")]
    pub rsk: f64,
    #[serde(rename = "Rku")]
    pub rku: f64,
    #[serde(rename = "Rt")]
    pub rt: f64,
    #[serde(rename = "Ra")]
    pub ra: f64,
    #[serde(rename = "Ral")]
    pub ral: f64,
    #[serde(rename = "Rsw")]
    pub rsw: f64,
    #[serde(rename = "Rdt")]
    pub rdt: f64,
    #[serde(rename = "Rdq")]
    pub rdq: f64,
    #[serde(rename = "Rda")]
    pub rda: f64,
    #[serde(rename = "Rdl")]
    pub rdl: f64,
    #[serde(rename = "Rdr")]
    pub rdr: f64,
    /// A sentinel replaced at least one undefined value.
    pub degenerate: bool,
}

impl FeatureVector1D {
    pub fn values(&self) -> [f64; 12] {
        [
            self.rq, self.rsk, self.rku, self.rt, self.ra, self.ral, self.rsw, self.rdt, self.rdq,
            self.rda, self.rdl, self.rdr,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector2D {
    #[serde(rename = "Sq")]
    pub sq: f64,
    #[serde(rename = "Ssk")]
    pub ssk: f64,
    #[serde(rename = "Sku")]
    pub sku: f64,
    #[serde(rename = "Sp")]
    pub sp: f64,
    #[serde(rename = "Sv")]
    pub sv: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
    #[serde(rename = "Sa")]
    pub sa: f64,
    #[serde(rename = "Sdq")]
    pub sdq: f64,
    #[serde(rename = "Sdr")]
    pub sdr: f64,
    pub degenerate: bool,
}

impl FeatureVector2D {
    pub fn values(&self) -> [f64; 9] {
        [
            self.sq, self.ssk, self.sku, self.sp, self.sv, self.sz, self.sa, self.sdq, self.sdr,
        ]
    }
}

fn centered(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

fn mean_of(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// `true` when the centered spread is rounding noise relative to the input.
fn is_flat(rms: f64, raw: &[f64]) -> bool {
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    rms == 0.0 || rms <= 16.0 * f64::EPSILON * scale
}

struct Moments {
    rms: f64,
    skew: f64,
    kurt: f64,
    mean_abs: f64,
    max: f64,
    min: f64,
    flat: bool,
}

fn moments(f: &[f64], raw: &[f64]) -> Moments {
    let n = f.len();
    let rms = mean_of(f.iter().map(|v| v * v), n).sqrt();
    let flat = is_flat(rms, raw);
    let (skew, kurt) = if flat {
        (0.0, 0.0)
    } else {
        (
            mean_of(f.iter().map(|v| v * v * v), n) / rms.powi(3),
            mean_of(f.iter().map(|v| v.powi(4)), n) / rms.powi(4),
        )
    };
    let (min, max) = crate::grid::min_max(f);
    Moments {
        rms: if flat { 0.0 } else { rms },
        skew,
        kurt,
        mean_abs: if flat { 0.0 } else { mean_of(f.iter().map(|v| v.abs()), n) },
        max: if flat { 0.0 } else { max },
        min: if flat { 0.0 } else { min },
        flat,
    }
}

/// Central differences, one-sided at both ends.
pub(crate) fn derivative(f: &[f64], step: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (f[1] - f[0]) / step
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / step
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * step)
            }
        })
        .collect()
}

/// Smallest lag (in length units) where the normalized autocorrelation falls
/// below `s`; the measurement length if it never does.
fn autocorrelation_length(f: &[f64], spacing: f64, s: f64) -> f64 {
    let n = f.len();
    let r0: f64 = f.iter().map(|v| v * v).sum();
    for k in 1..n {
        let rk: f64 = f[..n - k].iter().zip(&f[k..]).map(|(a, b)| a * b).sum();
        if rk / r0 < s {
            return k as f64 * spacing;
        }
    }
    (n - 1) as f64 * spacing
}

/// Wavelength of the strongest non-DC bin; ties go to the lowest frequency.
fn dominant_wavelength(f: &[f64], spacing: f64) -> f64 {
    let mag = magnitude_spectrum(f);
    let mut best = 1;
    for k in 2..mag.len() {
        if mag[k] > mag[best] {
            best = k;
        }
    }
    f.len() as f64 * spacing / best as f64
}

pub fn features_1d(roughness: &Profile, acf_threshold: f64) -> Result<FeatureVector1D> {
    let n = roughness.len();
    if n < 4 {
        return Err(invalid_arg(format!("profile features need >= 4 samples, got {n}")));
    }
    if !(acf_threshold > 0.0 && acf_threshold < 1.0) {
        return Err(invalid_arg(format!("ACF threshold must be in (0, 1), got {acf_threshold}")));
    }
    let dx = roughness.spacing();
    let raw = roughness.values();
    let m = moments(&centered(raw), raw);
    let f = if m.flat { vec![0.0; n] } else { centered(raw) };
    let d = derivative(&f, dx);
    let lm = roughness.measurement_length();
    let rdl: f64 = f
        .windows(2)
        .map(|w| (dx * dx + (w[1] - w[0]).powi(2)).sqrt())
        .sum();
    Ok(FeatureVector1D {
        rq: m.rms,
        rsk: m.skew,
        rku: m.kurt,
        rt: m.max + m.min.abs(),
        ra: m.mean_abs,
        ral: if m.flat { 0.0 } else { autocorrelation_length(&f, dx, acf_threshold) },
        rsw: if m.flat { 0.0 } else { dominant_wavelength(&f, dx) },
        rdt: d.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        rdq: mean_of(d.iter().map(|v| v * v), n).sqrt(),
        rda: mean_of(d.iter().map(|v| v.abs()), n),
        rdl,
        rdr: (rdl - lm) / lm,
        degenerate: m.flat,
    })
}

pub fn features_2d(roughness: &SurfaceGrid) -> Result<FeatureVector2D> {
    let (rows, cols) = roughness.shape();
    if rows < 3 || cols < 3 {
        return Err(invalid_arg(format!(
            "areal features need >= 3x3 samples, got {rows}x{cols}"
        )));
    }
    let raw = roughness.heights();
    let m = moments(&centered(raw), raw);
    let f = if m.flat { vec![0.0; raw.len()] } else { centered(raw) };
    let mut grad2 = vec![0.0; raw.len()];
    for i in 0..rows {
        let dx = derivative(&f[i * cols..(i + 1) * cols], roughness.spacing_x());
        grad2[i * cols..(i + 1) * cols]
            .iter_mut()
            .zip(&dx)
            .for_each(|(g, d)| *g = d * d);
    }
    let mut column = vec![0.0; rows];
    for j in 0..cols {
        for i in 0..rows {
            column[i] = f[i * cols + j];
        }
        for (i, d) in derivative(&column, roughness.spacing_y()).iter().enumerate() {
            grad2[i * cols + j] += d * d;
        }
    }
    let n = raw.len();
    let sp = m.max;
    let sv = m.min.abs();
    Ok(FeatureVector2D {
        sq: m.rms,
        ssk: m.skew,
        sku: m.kurt,
        sp,
        sv,
        sz: sp + sv,
        sa: m.mean_abs,
        sdq: mean_of(grad2.iter().copied(), n).sqrt(),
        sdr: mean_of(grad2.iter().map(|g| (1.0 + g).sqrt() - 1.0), n),
        degenerate: m.flat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

impl FeatureKind {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            Self::OneD => &FEATURE_NAMES_1D,
            Self::TwoD => &FEATURE_NAMES_2D,
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::OneD => "1d",
            Self::TwoD => "2d",
        })
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d" => Ok(Self::OneD),
            "2d" => Ok(Self::TwoD),
            _ => Err(invalid_arg(format!("feature kind must be 1d or 2d, got {s:?}"))),
        }
    }
}

/// A roughness component awaiting feature extraction.
#[derive(Debug, Clone, Copy)]
pub enum Component<'a> {
    Profile(&'a Profile),
    Grid(&'a SurfaceGrid),
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledComponent<'a> {
    /// `<surface id>:<tag>`; the part before `:` groups rows for
    /// cross-validation.
    pub id: &'a str,
    pub component: Component<'a>,
    pub label: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub values: Vec<f64>,
    pub degenerate: bool,
    pub label: String,
}

impl FeatureRow {
    /// Surface id shared by sibling profiles.
    pub fn group(&self) -> &str {
        self.id.split(':').next().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

/// Feature rows in input order.
pub fn build_matrix(
    samples: &[LabeledComponent<'_>],
    kind: FeatureKind,
    acf_threshold: f64,
) -> Result<FeatureMatrix> {
    if samples.is_empty() {
        return Err(invalid_arg("no samples to build a feature matrix from"));
    }
    let rows = samples
        .par_iter()
        .map(|s| {
            if s.label.is_empty() {
                return Err(invalid_arg(format!("sample {} has an empty label", s.id)));
            }
            let (values, degenerate) = match (kind, s.component) {
                (FeatureKind::OneD, Component::Profile(p)) => {
                    let v = features_1d(p, acf_threshold)?;
                    (v.values().to_vec(), v.degenerate)
                }
                (FeatureKind::TwoD, Component::Grid(g)) => {
                    let v = features_2d(g)?;
                    (v.values().to_vec(), v.degenerate)
                }
                _ => {
                    return Err(invalid_arg(format!(
                        "sample {} does not match feature kind {kind:?}",
                        s.id
                    )))
                }
            };
            Ok(FeatureRow {
                id: s.id.to_string(),
                values,
                degenerate,
                label: s.label.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        kind,
        columns: kind.names().iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

impl FeatureMatrix {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("degenerate".into());
        header.push("label".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.id.clone()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.push(u8::from(r.degenerate).to_string());
            rec.push(r.label.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let k = header.len();
        if k < 4 || header[0] != "id" || header[k - 2] != "degenerate" || header[k - 1] != "label" {
            return Err(Error::InvalidDataset(format!(
                "feature CSV header must be id,<features>,degenerate,label; got {}",
                header.join(",")
            )));
        }
        let columns: Vec<String> = header[1..k - 2].to_vec();
        let kind = if columns == FEATURE_NAMES_1D {
            FeatureKind::OneD
        } else if columns == FEATURE_NAMES_2D {
            FeatureKind::TwoD
        } else {
            return Err(Error::InvalidDataset(format!(
                "unrecognized feature columns {}",
                columns.join(",")
            )));
        };
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let values = (1..k - 2)
                .map(|i| {
                    rec[i].parse::<f64>().map_err(|_| {
                        Error::InvalidDataset(format!(
                            "row {}: column {} is not a number: {:?}",
                            line + 1,
                            header[i],
                            &rec[i]
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureRow {
                id: rec[0].to_string(),
                values,
                degenerate: &rec[k - 2] == "1",
                label: rec[k - 1].to_string(),
            });
        }
        Ok(Self { kind, columns, rows })
    }
}
