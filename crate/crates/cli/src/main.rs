//! `surftex` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surftex::features::FeatureKind;
use surftex::ThresholdMethod;

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "surftex", version, about = "Surface form/waviness/roughness decomposition and texture features")]
pub struct Cli {
    /// TOML file with pipeline settings; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for generation and fold assignment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for outputs.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one self-affine surface as a .sgrid file.
    Generate(GenerateArgs),
    /// Generate a labeled Hurst-exponent sweep plus a manifest.
    Sweep(SweepArgs),
    /// Crop, tile and subsample a scan into .sgrid tiles plus a manifest.
    Preprocess(PreprocessArgs),
    /// Split one profile or grid into form, waviness and roughness.
    Decompose(DecomposeArgs),
    /// Decompose surfaces and write their roughness feature matrix.
    Features(FeaturesArgs),
    /// Cross-validate the baseline classifier on a feature matrix.
    Classify(ClassifyArgs),
    /// Collect decomposition reports into a threshold table.
    Report(ReportArgs),
    /// Generate or load surfaces, decompose, featurize and evaluate.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Hurst exponent in [0, 1]; 0 is roughest.
    #[arg(long)]
    pub hurst: f64,
    /// Grid edge, a power of two.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub rms: Option<f64>,
    /// Highest wavenumber kept, as a fraction of the sample rate.
    #[arg(long)]
    pub cutoff_fraction: Option<f64>,
    /// Wavenumber below which the spectrum is held flat.
    #[arg(long)]
    pub rolloff_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub h_min: Option<f64>,
    #[arg(long)]
    pub h_max: Option<f64>,
    /// Class names in order of increasing H.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Surfaces per class; default splits the count evenly.
    #[arg(long, value_delimiter = ',')]
    pub class_sizes: Option<Vec<usize>>,
    /// Manifest path (default: `<out-dir>/manifest.csv`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Scan image (.png, .tif) or .sgrid.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Crop each dimension down to a multiple of this.
    #[arg(long, default_value_t = 1000)]
    pub crop_mod: usize,
    /// Tile edge in samples.
    #[arg(long, default_value_t = 2400)]
    pub tile: usize,
    /// Sampling factor for block-mean subsampling; 1 keeps every sample.
    #[arg(long, default_value_t = 0.1)]
    pub subsample: f64,
    /// Label written into every manifest row.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Dwt,
    Dct,
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantizationArg {
    GridStep,
    PerComponent,
}

impl From<QuantizationArg> for surftex::dct::Quantization {
    fn from(q: QuantizationArg) -> Self {
        match q {
            QuantizationArg::GridStep => Self::GridStep,
            QuantizationArg::PerComponent => Self::PerComponent,
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, value_enum)]
    pub method: Backend,
    /// Profile CSV (`position,height`) or grid (.sgrid, .png, .tif).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Automatic threshold (the default unless --level or --t2 is given).
    #[arg(long, conflicts_with_all = ["level", "t2"])]
    pub auto: bool,
    /// Fixed DWT roughness level.
    #[arg(long)]
    pub level: Option<usize>,
    /// Fixed DCT mode block.
    #[arg(long)]
    pub t2: Option<usize>,
    /// DCT entropy slope threshold.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub t2_max: Option<usize>,
    #[arg(long, value_enum)]
    pub quantization: Option<QuantizationArg>,
    /// 2D Gaussian kernel size (odd).
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Cutoff table, CSV (`ra_min,ra_max,cutoff`) or TOML (`[[rows]]`).
    #[arg(long)]
    pub cutoff_table: Option<PathBuf>,
    /// Output prefix (default: `<out-dir>/<input stem>`).
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
}

/// Decomposition and feature settings shared by `features` and `pipeline`.
#[derive(Debug, Args)]
pub struct ProcessingArgs {
    #[arg(long)]
    pub method: Option<ThresholdMethod>,
    #[arg(long)]
    pub dwt_level: Option<usize>,
    #[arg(long)]
    pub dct_slope: Option<f64>,
    #[arg(long)]
    pub dct_t2: Option<usize>,
    #[arg(long)]
    pub dct_t2_max: Option<usize>,
    #[arg(long, value_enum)]
    pub dct_quantization: Option<QuantizationArg>,
    #[arg(long)]
    pub gauss_kind: Option<FeatureKind>,
    #[arg(long)]
    pub gauss_kernel: Option<usize>,
    #[arg(long)]
    pub cutoff_table: Option<PathBuf>,
    #[arg(long)]
    pub profiles_per_direction: Option<usize>,
    #[arg(long)]
    pub acf_threshold: Option<f64>,
    /// Block-mean factor for loaded grids.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Surface manifest (`path,hurst,label`); default is the synthetic sweep.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Synthetic grid edge.
    #[arg(long)]
    pub size: Option<usize>,
    /// Synthetic surface count, split evenly across classes.
    #[arg(long)]
    pub count: Option<usize>,
    /// Recompute everything and write no cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub kind: Option<FeatureKind>,
    /// Output CSV (default: `<out-dir>/features.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub processing: ProcessingArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Feature CSV as written by `features`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output JSON (default: `<out-dir>/eval_report.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `*_report.json` files written by `decompose`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Manifest supplying H and label by surface id (file stem).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub processing: ProcessingArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
