use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use surftex::classify::baseline_classify;
use surftex::dct::{dct_decompose, DctAutoConfig, DctMode};
use surftex::dwt::{dwt_decompose_auto, dwt_decompose_fixed};
use surftex::features::FeatureMatrix;
use surftex::gauss::{gauss1d_roughness, gauss2d_smooth, Gauss2dConfig};
use surftex::io::{read_grid, read_profile_csv, write_grid, write_profile_csv};
use surftex::pipeline::{
    feature_matrix, process_all, read_manifest, run_pipeline, with_threads, PipelineConfig, FEATURES_FILE,
    REPORT_FILE, THRESHOLDS_CSV, THRESHOLDS_JSON,
};
use surftex::preprocess::{crop, subsample, tile};
use surftex::report::{report_thresholds, SampleInfo};
use surftex::synth::{generate, generate_sweep_with, SynthConfig};
use surftex::{Decomposition, Profile, SurfaceGrid, ThresholdReport};

use crate::config::{self, read_cutoff_table, resize_sweep};
use crate::{
    Backend, ClassifyArgs, Cli, Command, DecomposeArgs, FeaturesArgs, GenerateArgs, PipelineArgs, PreprocessArgs,
    ReportArgs, SweepArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = config::load(&cli)?;
    let threads = cfg.threads;
    with_threads(threads, move || match cli.command {
        Command::Generate(a) => generate_cmd(cfg, a),
        Command::Sweep(a) => sweep_cmd(cfg, a),
        Command::Preprocess(a) => preprocess_cmd(cfg, a),
        Command::Decompose(a) => decompose_cmd(cfg, a),
        Command::Features(a) => features_cmd(cfg, a),
        Command::Classify(a) => classify_cmd(cfg, a),
        Command::Report(a) => report_cmd(cfg, a),
        Command::Pipeline(a) => pipeline_cmd(cfg, a),
    })?
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// `path` relative to the directory of `manifest` when it lies below it.
fn manifest_entry(manifest: &Path, path: &Path) -> Result<String> {
    let base = manifest.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let (base, full) = (base.canonicalize()?, path.canonicalize()?);
    let p = full.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(full);
    Ok(p.to_string_lossy().into_owned())
}

fn generate_cmd(cfg: PipelineConfig, a: GenerateArgs) -> Result<()> {
    let src = config::synthetic(&cfg);
    let sc = SynthConfig {
        hurst: a.hurst,
        size: a.size.unwrap_or(src.size),
        seed: cfg.seed,
        rms: a.rms.unwrap_or(src.rms),
        cutoff_fraction: a.cutoff_fraction.unwrap_or(src.cutoff_fraction),
        rolloff_fraction: a.rolloff_fraction.or(src.rolloff_fraction),
    };
    let g = generate(&sc)?;
    create_parent(&a.out)?;
    write_grid(&g, &a.out)?;
    println!("wrote {} ({}x{}, H = {})", a.out.display(), sc.size, sc.size, sc.hurst);
    Ok(())
}

fn sweep_cmd(cfg: PipelineConfig, a: SweepArgs) -> Result<()> {
    let mut src = config::synthetic(&cfg);
    let sweep = &mut src.sweep;
    if let Some(c) = a.classes {
        sweep.classes = c;
        sweep.class_sizes = config::even_sizes(sweep.count, sweep.classes.len());
    }
    if let Some(n) = a.count {
        resize_sweep(sweep, n);
    }
    if let Some(s) = a.class_sizes {
        sweep.class_sizes = s;
    }
    if let Some(h) = a.h_min {
        sweep.h_min = h;
    }
    if let Some(h) = a.h_max {
        sweep.h_max = h;
    }
    let base = SynthConfig {
        hurst: 0.0,
        size: a.size.unwrap_or(src.size),
        seed: cfg.seed,
        rms: src.rms,
        cutoff_fraction: src.cutoff_fraction,
        rolloff_fraction: src.rolloff_fraction,
    };
    let samples = generate_sweep_with(&src.sweep, &base)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let manifest = a.manifest.unwrap_or_else(|| cfg.out_dir.join("manifest.csv"));
    create_parent(&manifest)?;
    let mut w = csv::Writer::from_path(&manifest)?;
    w.write_record(["path", "hurst", "label"])?;
    for s in &samples {
        let path = cfg.out_dir.join(format!("{}.sgrid", s.id));
        write_grid(&s.grid, &path)?;
        w.write_record([manifest_entry(&manifest, &path)?, s.hurst.to_string(), s.label.clone()])?;
    }
    w.flush()?;
    println!("wrote {} surfaces and {}", samples.len(), manifest.display());
    Ok(())
}

fn preprocess_cmd(cfg: PipelineConfig, a: PreprocessArgs) -> Result<()> {
    let scan = read_grid(&a.input)?;
    let cropped = crop(&scan, a.crop_mod)?;
    info!("cropped {:?} to {:?}", scan.shape(), cropped.shape());
    let tiles = tile(&cropped, a.tile)?;
    let stem = a.input.file_stem().map_or("tile".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&cfg.out_dir)?;
    let manifest = cfg.out_dir.join("tiles.csv");
    let mut w = csv::Writer::from_path(&manifest)?;
    let mut header = vec!["path", "row", "col"];
    if a.label.is_some() {
        header.push("label");
    }
    w.write_record(&header)?;
    for t in &tiles {
        let g = subsample(&t.grid, a.subsample)?;
        let name = format!("{stem}_r{}_c{}.sgrid", t.row, t.col);
        write_grid(&g, cfg.out_dir.join(&name))?;
        let mut rec = vec![name, t.row.to_string(), t.col.to_string()];
        rec.extend(a.label.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("wrote {} tiles and {}", tiles.len(), manifest.display());
    Ok(())
}

fn is_profile(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn write_profiles(d: &Decomposition<Profile>, prefix: &str) -> Result<()> {
    for (name, p) in [("form", &d.form), ("waviness", &d.waviness), ("roughness", &d.roughness)] {
        write_profile_csv(p, format!("{prefix}_{name}.csv"))?;
    }
    Ok(())
}

fn write_grids(d: &Decomposition<SurfaceGrid>, prefix: &str) -> Result<()> {
    for (name, g) in [("form", &d.form), ("waviness", &d.waviness), ("roughness", &d.roughness)] {
        write_grid(g, format!("{prefix}_{name}.sgrid"))?;
    }
    Ok(())
}

fn decompose_cmd(cfg: PipelineConfig, a: DecomposeArgs) -> Result<()> {
    let prefix = match &a.out_prefix {
        Some(p) => p.clone(),
        None => cfg.out_dir.join(a.input.file_stem().context("input has no file name")?),
    };
    create_parent(&prefix)?;
    let prefix = prefix.to_string_lossy().into_owned();
    let profile_input = is_profile(&a.input);
    let report = match a.method {
        Backend::Dwt => {
            if !profile_input {
                bail!("dwt decomposes profiles; pass a position,height CSV");
            }
            let p = read_profile_csv(&a.input)?;
            let d = match a.level {
                Some(k) => dwt_decompose_fixed(&p, k)?,
                None => dwt_decompose_auto(&p)?,
            };
            write_profiles(&d, &prefix)?;
            d.report
        }
        Backend::Dct => {
            if profile_input {
                bail!("dct decomposes grids; pass a .sgrid or image");
            }
            let g = read_grid(&a.input)?;
            let mode = match a.t2 {
                Some(t) => DctMode::Fixed(t),
                None => DctMode::Auto(DctAutoConfig {
                    slope_threshold: a.slope.unwrap_or(cfg.dct_slope),
                    t2_max: a.t2_max.or(cfg.dct_t2_max),
                    quantization: a.quantization.map_or(cfg.dct_quantization, Into::into),
                    ..Default::default()
                }),
            };
            let d = dct_decompose(&g, &mode)?;
            write_grids(&d, &prefix)?;
            d.report
        }
        Backend::Gauss => {
            if profile_input {
                let table = match &a.cutoff_table {
                    Some(p) => read_cutoff_table(p)?,
                    None => cfg.cutoff_table.clone().unwrap_or_default(),
                };
                let d = gauss1d_roughness(&read_profile_csv(&a.input)?, &table)?;
                write_profiles(&d, &prefix)?;
                d.report
            } else {
                let k = Gauss2dConfig::new(a.kernel.unwrap_or(cfg.gauss_kernel))?;
                let d = gauss2d_smooth(&read_grid(&a.input)?, &k)?;
                write_grids(&d, &prefix)?;
                d.report
            }
        }
    };
    let path = format!("{prefix}_report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    let modes = report.modes_computed.map(|m| format!(", {m} modes")).unwrap_or_default();
    let mut flags = Vec::new();
    for (set, name) in [
        (report.flags.capped, "capped"),
        (report.flags.degenerate, "degenerate"),
        (report.flags.length_limited, "length-limited"),
    ] {
        if set {
            flags.push(name);
        }
    }
    let flags = if flags.is_empty() { String::new() } else { format!(" [{}]", flags.join(", ")) };
    println!("{}: threshold {}{modes}{flags}; wrote {prefix}_*", report.method, report.selected_threshold);
    Ok(())
}

fn features_cmd(mut cfg: PipelineConfig, a: FeaturesArgs) -> Result<()> {
    config::apply_processing(&mut cfg, &a.processing, a.kind)?;
    let surfaces = process_all(&cfg)?;
    let matrix = feature_matrix(cfg.feature_kind(), &surfaces);
    let out = a.out.unwrap_or_else(|| cfg.out_dir.join(FEATURES_FILE));
    create_parent(&out)?;
    matrix.write_csv(fs::File::create(&out)?)?;
    let degenerate = matrix.rows.iter().filter(|r| r.degenerate).count();
    println!(
        "{} {} feature rows from {} surfaces ({degenerate} degenerate) -> {}",
        matrix.rows.len(),
        matrix.kind,
        surfaces.len(),
        out.display()
    );
    Ok(())
}

fn classify_cmd(cfg: PipelineConfig, a: ClassifyArgs) -> Result<()> {
    let file = fs::File::open(&a.features).with_context(|| format!("opening {}", a.features.display()))?;
    let matrix = FeatureMatrix::read_csv(file)?;
    let report = baseline_classify(&matrix, a.folds.unwrap_or(cfg.folds), cfg.seed)?;
    let out = a.out.unwrap_or_else(|| cfg.out_dir.join(REPORT_FILE));
    create_parent(&out)?;
    fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "mean accuracy {:.4} +/- {:.4} over {} folds -> {}",
        report.mean_accuracy,
        report.std_accuracy,
        report.folds.len(),
        out.display()
    );
    Ok(())
}

fn report_cmd(cfg: PipelineConfig, a: ReportArgs) -> Result<()> {
    let known: HashMap<String, (Option<f64>, String)> = match &a.manifest {
        Some(m) => read_manifest(m)?.into_iter().map(|s| (s.id, (s.hurst, s.label))).collect(),
        None => HashMap::new(),
    };
    let mut entries = Vec::new();
    for path in &a.reports {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let report: ThresholdReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let stem = path.file_stem().map_or(String::new(), |s| s.to_string_lossy().into_owned());
        let id = stem.strip_suffix("_report").unwrap_or(&stem).to_string();
        let (hurst, label) = match known.get(&id) {
            Some((h, l)) => (*h, Some(l.clone())),
            None => (None, None),
        };
        entries.push((SampleInfo { id, hurst, label }, report));
    }
    let table = report_thresholds(&entries)?;
    fs::create_dir_all(&cfg.out_dir)?;
    table.write_csv(fs::File::create(cfg.out_dir.join(THRESHOLDS_CSV))?)?;
    fs::write(cfg.out_dir.join(THRESHOLDS_JSON), table.to_json()?)?;
    for (m, mean) in table.mean_by_method() {
        println!("{m}: mean threshold {mean:.3}");
    }
    println!("wrote {} rows to {}", table.rows.len(), cfg.out_dir.join(THRESHOLDS_CSV).display());
    Ok(())
}

fn pipeline_cmd(mut cfg: PipelineConfig, a: PipelineArgs) -> Result<()> {
    config::apply_processing(&mut cfg, &a.processing, None)?;
    if let Some(f) = a.folds {
        cfg.folds = f;
    }
    let out = run_pipeline(&cfg)?;
    let r = &out.report;
    println!(
        "{}: {} samples from {} surfaces, mean accuracy {:.4} +/- {:.4} over {} folds",
        cfg.method,
        out.matrix.rows.len(),
        out.surfaces.len(),
        r.mean_accuracy,
        r.std_accuracy,
        r.folds.len()
    );
    if let Some(m) = &r.modes_computed {
        println!("modes computed: mean {:.1}, min {}, max {}", m.mean, m.min, m.max);
    }
    let written: Vec<PathBuf> =
        [FEATURES_FILE, THRESHOLDS_CSV, THRESHOLDS_JSON, REPORT_FILE].iter().map(|f| cfg.out_dir.join(f)).collect();
    info!("wrote {written:?}");
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}
