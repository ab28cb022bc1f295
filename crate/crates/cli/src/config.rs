//! Config file loading and flag overrides.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use surftex::features::FeatureKind;
use surftex::gauss::{CutoffRow, CutoffTable};
use surftex::pipeline::{PipelineConfig, Source, SyntheticSource};
use surftex::synth::SweepConfig;
use surftex::ThresholdMethod;

use crate::{Cli, ProcessingArgs};

/// Config file contents (or defaults) with the global flags applied.
pub fn load(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

pub fn synthetic(cfg: &PipelineConfig) -> SyntheticSource {
    match &cfg.source {
        Source::Synthetic(s) => s.clone(),
        Source::Manifest { .. } => SyntheticSource::default(),
    }
}

/// `count` surfaces over `classes`, earlier classes taking the remainder.
pub fn even_sizes(count: usize, classes: usize) -> Vec<usize> {
    (0..classes).map(|i| count / classes + usize::from(i < count % classes)).collect()
}

pub fn resize_sweep(sweep: &mut SweepConfig, count: usize) {
    sweep.count = count;
    sweep.class_sizes = even_sizes(count, sweep.classes.len());
}

#[derive(Deserialize)]
struct TableFile {
    rows: Vec<CutoffRow>,
}

/// Reads a cutoff table from CSV (`ra_min,ra_max,cutoff`) or TOML.
pub fn read_cutoff_table(path: &Path) -> Result<CutoffTable> {
    let rows = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<TableFile>(&text).with_context(|| format!("parsing {}", path.display()))?.rows
        }
        _ => csv::Reader::from_path(path)
            .and_then(|mut r| r.deserialize().collect::<Result<Vec<CutoffRow>, _>>())
            .with_context(|| format!("reading cutoff table {}", path.display()))?,
    };
    Ok(CutoffTable::new(rows)?)
}

/// Applies decomposition and source flags. `kind` pins the feature family.
pub fn apply_processing(cfg: &mut PipelineConfig, p: &ProcessingArgs, kind: Option<FeatureKind>) -> Result<()> {
    if let Some(m) = p.method {
        cfg.method = m;
    } else if let Some(k) = kind {
        if cfg.feature_kind() != k {
            cfg.method = match k {
                FeatureKind::OneD => ThresholdMethod::DwtAuto,
                FeatureKind::TwoD => ThresholdMethod::DctAuto,
            };
        }
    }
    if let Some(v) = p.dwt_level {
        cfg.dwt_level = v;
    }
    if let Some(v) = p.dct_slope {
        cfg.dct_slope = v;
    }
    if let Some(v) = p.dct_t2 {
        cfg.dct_t2 = v;
    }
    if p.dct_t2_max.is_some() {
        cfg.dct_t2_max = p.dct_t2_max;
    }
    if let Some(q) = p.dct_quantization {
        cfg.dct_quantization = q.into();
    }
    if let Some(k) = p.gauss_kind {
        cfg.gauss_kind = k;
    }
    if cfg.method == ThresholdMethod::Gauss && p.gauss_kind.is_none() {
        if let Some(k) = kind {
            cfg.gauss_kind = k;
        }
    }
    if let Some(v) = p.gauss_kernel {
        cfg.gauss_kernel = v;
    }
    if let Some(path) = &p.cutoff_table {
        cfg.cutoff_table = Some(read_cutoff_table(path)?);
    }
    if let Some(v) = p.profiles_per_direction {
        cfg.profiles_per_direction = v;
    }
    if let Some(v) = p.acf_threshold {
        cfg.acf_threshold = v;
    }
    if p.subsample.is_some() {
        cfg.subsample_factor = p.subsample;
    }
    if p.no_cache {
        cfg.cache = false;
    }
    if let Some(path) = &p.manifest {
        if p.size.is_some() || p.count.is_some() {
            bail!("--size and --count apply to the synthetic sweep, not to --manifest");
        }
        cfg.source = Source::Manifest { path: path.clone() };
    } else if p.size.is_some() || p.count.is_some() {
        let mut s = synthetic(cfg);
        if let Some(n) = p.size {
            s.size = n;
        }
        if let Some(c) = p.count {
            resize_sweep(&mut s.sweep, c);
        }
        cfg.source = Source::Synthetic(s);
    }
    if let Some(k) = kind {
        if cfg.feature_kind() != k {
            bail!("method {} produces {} features, not {k}", cfg.method, cfg.feature_kind());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_split() {
        assert_eq!(even_sizes(201, 3), vec![67, 67, 67]);
        assert_eq!(even_sizes(10, 3), vec![4, 3, 3]);
    }

    #[test]
    fn partial_toml() {
        let cfg: PipelineConfig = toml::from_str(
            r#"
            method = "dct-auto"
            dct_slope = 0.01
            [source]
            kind = "synthetic"
            size = 64
            count = 4
            classes = ["a", "b"]
            class_sizes = [2, 2]
            [cutoff_table]
            rows = [{ ra_min = 0.0, ra_max = 1.0, cutoff = 0.8 }]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.method, ThresholdMethod::DctAuto);
        assert_eq!(cfg.seed, 42);
        let s = synthetic(&cfg);
        assert_eq!((s.size, s.sweep.count, s.rms), (64, 4, 1.0));
        assert_eq!(cfg.cutoff_table.unwrap().rows.len(), 1);
    }

    #[test]
    fn manifest_source_toml() {
        let cfg: PipelineConfig = toml::from_str("[source]\nkind = \"manifest\"\npath = \"m.csv\"\n").unwrap();
        assert_eq!(cfg.source, Source::Manifest { path: "m.csv".into() });
    }
}
