use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "proxtree", version, about = "Proximity features, tree learners, importance and effect curves")]
pub struct Cli {
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the modeling table from observations and an event catalog.
    Featurize(FeaturizeArgs),
    /// Partition a table into train and test files.
    Split(SplitArgs),
    /// Fit one learner and report its MSE.
    Fit(FitArgs),
    /// Permutation importance of a fitted model on a test table.
    Importance(ImportanceArgs),
    /// Monte Carlo comparison of the learners on synthetic data.
    Simulate(SimulateArgs),
    /// Effect curve of one feature for one profile.
    Effects(EffectsArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Observations CSV: id, lat/lon or zip, attributes, optional outcome.
    #[arg(long)]
    pub respondents: PathBuf,
    /// Events CSV: id,lat,lon,time,size[,flags...].
    #[arg(long)]
    pub events: PathBuf,
    /// Zip centroids CSV (zip,lat,lon); needed when observations carry zips only.
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// Observation schema JSON (id, outcome, attributes, strict, impute).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Outcome column; overrides the schema.
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Distance unit: km or thousand-km.
    #[arg(long, default_value = "km")]
    pub scale: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Training rows: a count (40000) or a fraction (0.8).
    #[arg(long)]
    pub train: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Ols,
    Lasso,
    Tree,
    Forest,
    Bart,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// JSON with optional sections: tree, forest, bart, lasso.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out table; its MSE is printed and recorded.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Upper bound on internal nodes of the single tree.
    #[arg(long)]
    pub max_splits: Option<usize>,
    /// Trees in the forest or the sum-of-trees model.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Also write every posterior draw (bart only).
    #[arg(long)]
    pub draws: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// Permutations per feature; 1 is allowed but noisier.
    #[arg(long, default_value_t = 3)]
    pub k_perms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the per-observation matrix.
    #[arg(long)]
    pub local: bool,
    /// Permute one-hot indicators separately instead of as a block.
    #[arg(long)]
    pub per_indicator: bool,
    /// Restrict to these features (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config JSON; defaults for everything absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One-row profile CSV.
    #[arg(long, conflicts_with = "auto_profile")]
    pub profile: Option<PathBuf>,
    /// Pick the test row where the feature matters most; needs --local and --test.
    #[arg(long)]
    pub auto_profile: bool,
    /// Per-observation importance CSV written by `importance --local`.
    #[arg(long)]
    pub local: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Outcome column of the test table, excluded from the profile.
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub feature: String,
    /// `lo:hi:step` or a comma list.
    #[arg(long, default_value = "0:1:0.1")]
    pub grid: String,
    /// Grid point the effects are measured against.
    #[arg(long)]
    pub baseline: f64,
    /// Attribute override `name=value` for a second curve; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}
