use std::path::PathBuf;

use clap::{Parser, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "midist",
    version,
    about = "Posterior distribution of mutual information from a contingency table",
    long_about = "Reads an r x s table of counts, applies a Dirichlet prior and reports the \
                  exact posterior mean of the mutual information, its variance, skewness and \
                  kurtosis expansions, moment-matched densities with tail probabilities, and \
                  optionally a Monte Carlo check. Values are in nats."
)]
pub struct Args {
    /// Table of counts, one row per line (csv/tsv) or an array of arrays (json).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    pub input_format: InputFormat,

    #[arg(long, value_enum, default_value_t = Prior::Jeffreys)]
    pub prior: Prior,

    /// Prior pseudo-counts for `--prior custom`, same shape and format as the input.
    #[arg(long, value_name = "PATH")]
    pub prior_matrix: Option<PathBuf>,

    /// Variance expansion order; `auto` takes the highest valid one.
    #[arg(long, value_enum, default_value_t = VarOrder::Auto)]
    pub var_order: VarOrder,

    /// Fitted density family; repeat for several.
    #[arg(long, value_enum, default_values_t = [FitChoice::Gamma])]
    pub fit: Vec<FitChoice>,

    /// Report p(I > X) for each fit (and the Monte Carlo run); repeatable.
    #[arg(long = "quantile", value_name = "X", allow_negative_numbers = true)]
    pub quantiles: Vec<f64>,

    /// Monte Carlo check with N Dirichlet samples.
    #[arg(long, value_name = "N")]
    pub mc: Option<usize>,

    #[arg(long, visible_alias = "seed", value_name = "S", default_value_t = 0)]
    pub mc_seed: u64,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Prior {
    Haldane,
    Perks,
    Jeffreys,
    Uniform,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarOrder {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitChoice {
    Normal,
    Gamma,
    Lognormal,
    Ansatz,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}
