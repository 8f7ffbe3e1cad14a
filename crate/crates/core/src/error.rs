//! Crate-wide error type.

use std::path::PathBuf;

/// Errors surfaced by fallible operations across the crate.
///
/// Math kernels with hard preconditions (dimension agreement, non-empty
/// batches) panic instead; everything a caller can plausibly get wrong from
/// configuration or input data goes through this enum.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column '{0}' not found in header")]
    MissingColumn(String),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has {0} distinct label(s); need at least 2")]
    TooFewClasses(usize),

    #[error("partition failed: {0}")]
    Partition(String),

    #[error("poison fraction > 0 but the trigger feature set is empty")]
    EmptyTrigger,

    #[error("trigger feature index {index} out of range (dataset has {num_features} features)")]
    TriggerFeatureOutOfRange { index: usize, num_features: usize },

    #[error("krum needs n - r - 2 >= 1, got n = {n}, r = {r}")]
    KrumTooFewClients { n: usize, r: usize },

    #[error("global model became non-finite at round {0}")]
    NonFinite(usize),

    #[error("certified radius requires at least one attacker")]
    NoAttackers,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config file: {0}")]
    ConfigParse(String),

    #[error("unknown aggregator '{0}' (expected wpcra | mean | krum | rfa | perturbing)")]
    UnknownAggregator(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
