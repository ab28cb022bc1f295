//! Generate or load surfaces, decompose, extract features, cross-validate.
//!
//! Each surface's threshold reports and feature rows are cached as JSON
//! under `<out_dir>/cache`, keyed by a hash of everything that affects
//! them. A warm run reads the cache instead of regenerating and produces the
//! same outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{baseline_classify, EvalReport, ModeStats};
use crate::dct::{dct_decompose, DctAutoConfig, DctMode, Quantization};
use crate::decomposition::{ThresholdMethod, ThresholdReport};
use crate::dwt::{dwt_decompose_auto, dwt_decompose_fixed};
use crate::error::{invalid_arg, Error, Result};
use crate::features::{build_matrix, Component, FeatureKind, FeatureMatrix, FeatureRow, LabeledComponent};
use crate::gauss::{gauss1d_roughness, gauss2d_smooth, CutoffTable, Gauss2dConfig};
use crate::grid::{extract_profiles, Direction, Profile, SurfaceGrid};
use crate::io::read_grid;
use crate::preprocess::subsample;
use crate::report::{report_thresholds, SampleInfo, ThresholdTable};
use crate::synth::{generate, surface_id, sweep_configs, SweepConfig, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSource {
    pub size: usize,
    pub rms: f64,
    pub cutoff_fraction: f64,
    pub rolloff_fraction: Option<f64>,
    #[serde(flatten)]
    pub sweep: SweepConfig,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        Self {
            size: 256,
            rms: 1.0,
            cutoff_fraction: 0.5,
            rolloff_fraction: None,
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Source {
    Synthetic(SyntheticSource),
    /// CSV with columns `path,hurst,label`; `hurst` may be empty and paths
    /// are relative to the manifest.
    Manifest { path: PathBuf },
}

impl Default for Source {
    fn default() -> Self {
        Self::Synthetic(SyntheticSource::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub method: ThresholdMethod,
    /// Roughness level for `dwt-fixed`.
    pub dwt_level: usize,
    pub dct_slope: f64,
    pub dct_t2_max: Option<usize>,
    pub dct_quantization: Quantization,
    /// Mode block for `dct-fixed`.
    pub dct_t2: usize,
    /// Profile (`1d`) or areal (`2d`) Gaussian filtering.
    pub gauss_kind: FeatureKind,
    pub gauss_kernel: usize,
    pub cutoff_table: Option<CutoffTable>,
    pub profiles_per_direction: usize,
    pub acf_threshold: f64,
    /// Block-mean factor applied to loaded grids (ignored for synthetic ones).
    pub subsample_factor: Option<f64>,
    pub seed: u64,
    pub folds: usize,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub cache: bool,
    pub source: Source,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: ThresholdMethod::DwtAuto,
            dwt_level: 2,
            dct_slope: 0.005,
            dct_t2_max: None,
            dct_quantization: Quantization::GridStep,
            dct_t2: 50,
            gauss_kind: FeatureKind::TwoD,
            gauss_kernel: 21,
            cutoff_table: None,
            profiles_per_direction: 3,
            acf_threshold: crate::features::DEFAULT_ACF_THRESHOLD,
            subsample_factor: None,
            seed: 42,
            folds: 5,
            threads: None,
            out_dir: PathBuf::from("surftex-out"),
            cache: true,
            source: Source::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(invalid_arg(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.profiles_per_direction == 0 {
            return Err(invalid_arg("profiles_per_direction must be >= 1"));
        }
        if let Source::Manifest { path } = &self.source {
            if !path.exists() {
                return Err(invalid_arg(format!("manifest {} does not exist", path.display())));
            }
        }
        if let Some(t) = &self.cutoff_table {
            t.validate()?;
        }
        Gauss2dConfig::new(self.gauss_kernel)?;
        Ok(())
    }

    /// Feature family produced by the configured method.
    pub fn feature_kind(&self) -> FeatureKind {
        match self.method {
            ThresholdMethod::DwtAuto | ThresholdMethod::DwtFixed => FeatureKind::OneD,
            ThresholdMethod::DctAuto | ThresholdMethod::DctFixed => FeatureKind::TwoD,
            ThresholdMethod::Gauss => self.gauss_kind,
        }
    }

    fn dct_mode(&self) -> DctMode {
        match self.method {
            ThresholdMethod::DctFixed => DctMode::Fixed(self.dct_t2),
            _ => DctMode::Auto(DctAutoConfig {
                slope_threshold: self.dct_slope,
                t2_max: self.dct_t2_max,
                quantization: self.dct_quantization,
                ..Default::default()
            }),
        }
    }

    /// Settings that change per-surface results, as a cache key fragment.
    fn processing_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            method: ThresholdMethod,
            dwt_level: usize,
            dct: DctMode,
            gauss_kind: FeatureKind,
            gauss_kernel: usize,
            cutoff_table: &'a Option<CutoffTable>,
            profiles_per_direction: usize,
            acf_threshold: f64,
            subsample_factor: Option<f64>,
        }
        serde_json::to_string(&Key {
            method: self.method,
            dwt_level: self.dwt_level,
            dct: self.dct_mode(),
            gauss_kind: self.gauss_kind,
            gauss_kernel: self.gauss_kernel,
            cutoff_table: &self.cutoff_table,
            profiles_per_direction: self.profiles_per_direction,
            acf_threshold: self.acf_threshold,
            subsample_factor: self.subsample_factor,
        })
        .expect("key serializes")
    }
}

/// One input surface, before its grid is materialized.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSpec {
    pub id: String,
    pub label: String,
    pub hurst: Option<f64>,
    pub origin: SurfaceOrigin,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceOrigin {
    Synthetic(SynthConfig),
    File { path: PathBuf, len: u64, modified_ns: u128 },
}

impl SurfaceSpec {
    /// Grid for this surface. Synthetic heights are rounded to `f32` so they
    /// survive a trip through the native format unchanged.
    pub fn load(&self, subsample_factor: Option<f64>) -> Result<SurfaceGrid> {
        match &self.origin {
            SurfaceOrigin::Synthetic(cfg) => Ok(generate(cfg)?.to_f32_precision()),
            SurfaceOrigin::File { path, .. } => {
                let g = read_grid(path)?;
                match subsample_factor {
                    Some(f) => subsample(&g, f),
                    None => Ok(g),
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRecord {
    path: PathBuf,
    #[serde(default)]
    hurst: Option<f64>,
    label: String,
}

pub fn read_manifest(path: &Path) -> Result<Vec<SurfaceSpec>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<ManifestRecord>().enumerate() {
        let rec = rec?;
        if rec.label.is_empty() {
            return Err(Error::InvalidDataset(format!("manifest row {} has no label", i + 1)));
        }
        let p = if rec.path.is_absolute() { rec.path } else { base.join(rec.path) };
        let meta = fs::metadata(&p)?;
        let modified_ns = meta
            .modified()
            .ok()
            .and_then(|t| t.duration_since(std::time::UNIX_EPOCH).ok())
            .map_or(0, |d| d.as_nanos());
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().replace(':', "_"))
            .unwrap_or_else(|| surface_id(i));
        out.push(SurfaceSpec {
            id,
            label: rec.label,
            hurst: rec.hurst,
            origin: SurfaceOrigin::File { path: p, len: meta.len(), modified_ns },
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidDataset(format!("manifest {} is empty", path.display())));
    }
    Ok(out)
}

pub fn surface_specs(cfg: &PipelineConfig) -> Result<Vec<SurfaceSpec>> {
    match &cfg.source {
        Source::Synthetic(s) => {
            let base = SynthConfig {
                hurst: 0.0,
                size: s.size,
                seed: cfg.seed,
                rms: s.rms,
                cutoff_fraction: s.cutoff_fraction,
                rolloff_fraction: s.rolloff_fraction,
            };
            Ok(sweep_configs(&s.sweep, &base)?
                .into_iter()
                .enumerate()
                .map(|(i, (c, label))| SurfaceSpec {
                    id: surface_id(i),
                    label,
                    hurst: Some(c.hurst),
                    origin: SurfaceOrigin::Synthetic(c),
                })
                .collect())
        }
        Source::Manifest { path } => read_manifest(path),
    }
}

/// Tagged reports and feature rows of one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResult {
    pub id: String,
    pub label: String,
    pub hurst: Option<f64>,
    /// `(sample id, report)`; one entry per profile for 1D methods.
    pub reports: Vec<(String, ThresholdReport)>,
    pub features: Vec<FeatureRow>,
}

fn profile_tag(p: &Profile) -> String {
    match p.origin() {
        Some(o) => format!(
            "{}{}",
            match o.direction {
                Direction::X => "x",
                Direction::Y => "y",
            },
            o.index
        ),
        None => "p".into(),
    }
}

pub fn process_surface(cfg: &PipelineConfig, spec: &SurfaceSpec, grid: &SurfaceGrid) -> Result<SurfaceResult> {
    let kind = cfg.feature_kind();
    let mut reports = Vec::new();
    let matrix = match kind {
        FeatureKind::OneD => {
            let profiles = extract_profiles(grid, cfg.profiles_per_direction)?;
            let table = cfg.cutoff_table.clone().unwrap_or_default();
            let mut rough = Vec::with_capacity(profiles.len());
            for p in &profiles {
                let d = match cfg.method {
                    ThresholdMethod::DwtAuto => dwt_decompose_auto(p)?,
                    ThresholdMethod::DwtFixed => dwt_decompose_fixed(p, cfg.dwt_level)?,
                    ThresholdMethod::Gauss => gauss1d_roughness(p, &table)?,
                    m => return Err(invalid_arg(format!("{m} does not produce profiles"))),
                };
                let id = format!("{}:{}", spec.id, profile_tag(p));
                reports.push((id.clone(), d.report));
                rough.push((id, d.roughness));
            }
            let samples: Vec<_> = rough
                .iter()
                .map(|(id, r)| LabeledComponent {
                    id,
                    component: Component::Profile(r),
                    label: &spec.label,
                })
                .collect();
            build_matrix(&samples, kind, cfg.acf_threshold)?
        }
        FeatureKind::TwoD => {
            let d = match cfg.method {
                ThresholdMethod::DctAuto | ThresholdMethod::DctFixed => dct_decompose(grid, &cfg.dct_mode())?,
                ThresholdMethod::Gauss => gauss2d_smooth(grid, &Gauss2dConfig::new(cfg.gauss_kernel)?)?,
                m => return Err(invalid_arg(format!("{m} does not produce areal components"))),
            };
            let id = format!("{}:grid", spec.id);
            reports.push((id.clone(), d.report));
            let sample = LabeledComponent {
                id: &id,
                component: Component::Grid(&d.roughness),
                label: &spec.label,
            };
            build_matrix(&[sample], kind, cfg.acf_threshold)?
        }
    };
    Ok(SurfaceResult {
        id: spec.id.clone(),
        label: spec.label.clone(),
        hurst: spec.hurst,
        reports,
        features: matrix.rows,
    })
}

/// FNV-1a; only needs to be stable for one build.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn cache_path(cfg: &PipelineConfig, spec: &SurfaceSpec) -> PathBuf {
    let key = format!(
        "{}|{}",
        cfg.processing_key(),
        serde_json::to_string(spec).expect("spec serializes")
    );
    cfg.out_dir
        .join("cache")
        .join(format!("{}-{:016x}.json", spec.id, fnv1a(key.as_bytes())))
}

fn process_cached(cfg: &PipelineConfig, spec: &SurfaceSpec) -> Result<SurfaceResult> {
    let path = cache_path(cfg, spec);
    if cfg.cache {
        if let Ok(text) = fs::read_to_string(&path) {
            match serde_json::from_str(&text) {
                Ok(r) => return Ok(r),
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
            }
        }
    }
    let grid = spec.load(cfg.subsample_factor)?;
    let result = process_surface(cfg, spec, &grid)?;
    if cfg.cache {
        fs::create_dir_all(path.parent().expect("cache dir"))?;
        fs::write(&path, serde_json::to_string(&result)?)?;
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: EvalReport,
    pub matrix: FeatureMatrix,
    pub thresholds: ThresholdTable,
    pub surfaces: Vec<SurfaceResult>,
}

pub const FEATURES_FILE: &str = "features.csv";
pub const THRESHOLDS_CSV: &str = "thresholds.csv";
pub const THRESHOLDS_JSON: &str = "thresholds.json";
pub const REPORT_FILE: &str = "eval_report.json";

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid_arg(format!("cannot build thread pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Decomposes and featurizes every surface in parallel, merged in input
/// order.
pub fn process_all(cfg: &PipelineConfig) -> Result<Vec<SurfaceResult>> {
    cfg.validate()?;
    let specs = surface_specs(cfg)?;
    with_threads(cfg.threads, || specs.par_iter().map(|s| process_cached(cfg, s)).collect())?
}

pub fn feature_matrix(kind: FeatureKind, surfaces: &[SurfaceResult]) -> FeatureMatrix {
    FeatureMatrix {
        kind,
        columns: kind.names().iter().map(|s| s.to_string()).collect(),
        rows: surfaces.iter().flat_map(|s| s.features.iter().cloned()).collect(),
    }
}

pub fn threshold_table(surfaces: &[SurfaceResult]) -> Result<ThresholdTable> {
    let entries: Vec<(SampleInfo, ThresholdReport)> = surfaces
        .iter()
        .flat_map(|s| {
            s.reports.iter().map(move |(id, r)| {
                (
                    SampleInfo { id: id.clone(), hurst: s.hurst, label: Some(s.label.clone()) },
                    r.clone(),
                )
            })
        })
        .collect();
    report_thresholds(&entries)
}

/// [`process_all`], then evaluates the baseline and writes the feature
/// matrix, threshold table and report into `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let surfaces = process_all(cfg)?;
    let matrix = feature_matrix(cfg.feature_kind(), &surfaces);
    let thresholds = threshold_table(&surfaces)?;
    let mut report = baseline_classify(&matrix, cfg.folds, cfg.seed)?;
    let modes: Vec<usize> = surfaces
        .iter()
        .flat_map(|s| s.reports.iter().filter_map(|(_, r)| r.modes_computed))
        .collect();
    report.modes_computed = ModeStats::from_counts(&modes);

    fs::create_dir_all(&cfg.out_dir)?;
    matrix.write_csv(fs::File::create(cfg.out_dir.join(FEATURES_FILE))?)?;
    thresholds.write_csv(fs::File::create(cfg.out_dir.join(THRESHOLDS_CSV))?)?;
    fs::write(cfg.out_dir.join(THRESHOLDS_JSON), thresholds.to_json()?)?;
    fs::write(cfg.out_dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    Ok(PipelineOutput { report, matrix, thresholds, surfaces })
}
