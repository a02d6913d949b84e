use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mnl",
    version,
    about = "Magnitude effects and latent number lines in number embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the effects and number lines for one or more corpora and write tables.
    Analyze(AnalyzeArgs),
    /// Write a synthetic corpus with a known latent number line.
    Synth(SynthArgs),
    /// Regress ratio-effect layer averages on distance and size layer averages.
    Regress(RegressArgs),
    /// Combine results.json bundles from separate runs into one set of tables.
    ReportMerge(MergeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EffectArg {
    Distance,
    Size,
    Ratio,
    Mds,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[value(name = "lowercase_word")]
    LowercaseWord,
    #[value(name = "mixedcase_word")]
    MixedcaseWord,
    Digit,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    #[value(name = "group_then_normalize")]
    GroupThenNormalize,
    #[value(name = "normalize_then_group")]
    NormalizeThenGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmitArg {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Corpus interchange file (.json or .json.gz); repeat for several corpora.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Effects to fit, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub effect: Vec<EffectArg>,
    /// 1-based layers, comma separated, or "all".
    #[arg(long)]
    pub layer: Option<String>,
    /// Number formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<FormatArg>,
    /// Force one grouping/normalization order for every effect.
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    /// Average ratio-effect pairs that share a ratio into one point.
    #[arg(long)]
    pub ratio_average_duplicates: bool,
    /// Refine each classical MDS solution with 1-D SMACOF.
    #[arg(long)]
    pub smacof: bool,
    /// Format whose layer-averaged number line feeds the residual table.
    #[arg(long, value_enum)]
    pub residual_format: Option<FormatArg>,
    /// Output directory (falls back to the config file, then MNL_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table formats to write, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub emit: Vec<EmitArg>,
    /// Worker threads for the cell grid (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// TOML file supplying defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// log10, linear, or custom:p1,...,p9.
    #[arg(long, default_value = "log10")]
    pub positions: String,
    /// Tuning-curve width.
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    /// Embedding dimension (number of tuning-curve centers).
    #[arg(long, default_value_t = 64)]
    pub dims: usize,
    /// Uniform noise amplitude.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub layers: usize,
    /// Share one noise draw across every layer and format.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub formats_identical: bool,
    #[arg(long, default_value = "synthetic")]
    pub model_id: String,
    /// Variant label (default: the position model name).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// distance_by_layer.csv
    #[arg(long)]
    pub distance: PathBuf,
    /// size_by_layer.csv
    #[arg(long)]
    pub size: PathBuf,
    /// ratio_by_layer.csv (the response)
    #[arg(long)]
    pub ratio: PathBuf,
    /// Recompute each layer's average from the model columns instead of reading avg.
    #[arg(long)]
    pub recompute_avg: bool,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// results.json bundle; repeat for each run.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory (falls back to MNL_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub emit: Vec<EmitArg>,
}
