//! Experiment configuration: flat key-value files, CLI overrides,
//! validation, and scenario presets.
//!
//! A config file is flat TOML (`key = value` per line). Every key has a
//! default, so an empty file is a valid all-defaults experiment. Command
//! line flags override file values field by field. Validation turns the
//! raw form into typed settings and rejects bad combinations with the
//! offending key named.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregator, WgmeOptions, WpcraParams};
use crate::cert::ExPostConfig;
use crate::error::{Error, Result};
use crate::model::{BatchSize, TrainConfig};

/// Batch size as written in a config file: `"full"` or a count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchField {
    Count(usize),
    Named(String),
}

impl Default for BatchField {
    fn default() -> Self {
        BatchField::Named("full".into())
    }
}

fn default_dataset() -> String {
    "synthetic".into()
}
fn default_label_column() -> String {
    "label".into()
}
fn default_true() -> bool {
    true
}
fn default_num_samples() -> usize {
    5000
}
fn default_num_features() -> usize {
    20
}
fn default_num_classes() -> usize {
    3
}
fn default_class_separation() -> f64 {
    8.0
}
fn default_num_clients() -> usize {
    20
}
fn default_rounds() -> usize {
    100
}
fn default_adversarial_round() -> usize {
    10
}
fn default_partition() -> String {
    "dirichlet".into()
}
fn default_dirichlet_beta() -> f64 {
    2.0
}
fn default_attacker_selection() -> String {
    "largest".into()
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_gamma() -> f64 {
    0.1
}
fn default_trigger_features() -> Vec<usize> {
    vec![0, 1]
}
fn default_poison_fraction() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.001
}
fn default_tau() -> usize {
    1
}
fn default_sigma() -> f64 {
    0.01
}
fn default_rho_scale() -> f64 {
    1.0
}
fn default_mc_samples() -> usize {
    1000
}
fn default_eps_alpha() -> f64 {
    0.001
}
fn default_l_z() -> f64 {
    1.0
}
fn default_eps_s() -> f64 {
    1e-9
}
fn default_eps_r() -> f64 {
    1e-6
}
fn default_eps_g() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    100
}
fn default_perturbing_clip() -> f64 {
    10.0
}
fn default_aggregator() -> String {
    "wpcra".into()
}
fn default_seed() -> u64 {
    42
}

/// The flat, file-facing configuration. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    // dataset
    pub dataset: String,
    pub csv_path: Option<String>,
    pub label_column: String,
    pub group_column: Option<String>,
    pub normalize: bool,
    pub num_samples: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub class_separation: f64,
    // federation
    pub num_clients: usize,
    pub num_attackers: usize,
    pub rounds: usize,
    pub adversarial_round: usize,
    pub partition: String,
    pub dirichlet_beta: f64,
    pub attacker_selection: String,
    pub test_fraction: f64,
    // attack
    pub gamma: f64,
    pub trigger_features: Vec<usize>,
    pub target_label: usize,
    pub poison_fraction: f64,
    pub alpha: Option<f64>,
    pub repeat_attack: bool,
    // local training
    pub eta: f64,
    pub tau: usize,
    pub batch_size: BatchField,
    // ex-post / certification
    pub sigma: f64,
    pub rho_scale: f64,
    pub clip: bool,
    pub mc_samples: usize,
    pub eps_alpha: f64,
    pub l_z: f64,
    // ex-ante / median
    pub eps_s: f64,
    pub eps_r: f64,
    pub eps_g: f64,
    pub max_iters: usize,
    pub pardoning: bool,
    // perturbing baseline
    pub perturbing_clip: f64,
    pub perturbing_sigma: f64,
    // run
    pub aggregator: String,
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            dataset: default_dataset(),
            csv_path: None,
            label_column: default_label_column(),
            group_column: None,
            normalize: default_true(),
            num_samples: default_num_samples(),
            num_features: default_num_features(),
            num_classes: default_num_classes(),
            class_separation: default_class_separation(),
            num_clients: default_num_clients(),
            num_attackers: 0,
            rounds: default_rounds(),
            adversarial_round: default_adversarial_round(),
            partition: default_partition(),
            dirichlet_beta: default_dirichlet_beta(),
            attacker_selection: default_attacker_selection(),
            test_fraction: default_test_fraction(),
            gamma: default_gamma(),
            trigger_features: default_trigger_features(),
            target_label: 0,
            poison_fraction: default_poison_fraction(),
            alpha: None,
            repeat_attack: false,
            eta: default_eta(),
            tau: default_tau(),
            batch_size: BatchField::default(),
            sigma: default_sigma(),
            rho_scale: default_rho_scale(),
            clip: default_true(),
            mc_samples: default_mc_samples(),
            eps_alpha: default_eps_alpha(),
            l_z: default_l_z(),
            eps_s: default_eps_s(),
            eps_r: default_eps_r(),
            eps_g: default_eps_g(),
            max_iters: default_max_iters(),
            pardoning: default_true(),
            perturbing_clip: default_perturbing_clip(),
            perturbing_sigma: default_sigma(),
            aggregator: default_aggregator(),
            seed: default_seed(),
            out_dir: None,
        }
    }
}

impl RawConfig {
    /// Parses a flat TOML config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&raw)
    }

    /// Parses flat TOML text.
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    /// Serializes back to the flat TOML form; re-parsing yields an equal
    /// config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization")
    }

    /// `key -> value` view of the whole config, for report echoing.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let table: toml::Value = toml::Value::try_from(self).expect("config to table");
        let mut map = BTreeMap::new();
        if let toml::Value::Table(entries) = table {
            for (k, v) in entries {
                let rendered = match v {
                    toml::Value::String(s) => s,
                    other => other.to_string(),
                };
                map.insert(k, rendered);
            }
        }
        map
    }
}

/// Field-by-field overrides (typically from CLI flags); `None` leaves the
/// underlying value alone.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverrides {
    pub dataset: Option<String>,
    pub csv_path: Option<String>,
    pub label_column: Option<String>,
    pub group_column: Option<String>,
    pub normalize: Option<bool>,
    pub num_samples: Option<usize>,
    pub num_features: Option<usize>,
    pub num_classes: Option<usize>,
    pub class_separation: Option<f64>,
    pub num_clients: Option<usize>,
    pub num_attackers: Option<usize>,
    pub rounds: Option<usize>,
    pub adversarial_round: Option<usize>,
    pub partition: Option<String>,
    pub dirichlet_beta: Option<f64>,
    pub attacker_selection: Option<String>,
    pub test_fraction: Option<f64>,
    pub gamma: Option<f64>,
    pub trigger_features: Option<Vec<usize>>,
    pub target_label: Option<usize>,
    pub poison_fraction: Option<f64>,
    pub alpha: Option<f64>,
    pub repeat_attack: Option<bool>,
    pub eta: Option<f64>,
    pub tau: Option<usize>,
    pub batch_size: Option<BatchField>,
    pub sigma: Option<f64>,
    pub rho_scale: Option<f64>,
    pub clip: Option<bool>,
    pub mc_samples: Option<usize>,
    pub eps_alpha: Option<f64>,
    pub l_z: Option<f64>,
    pub eps_s: Option<f64>,
    pub eps_r: Option<f64>,
    pub eps_g: Option<f64>,
    pub max_iters: Option<usize>,
    pub pardoning: Option<bool>,
    pub perturbing_clip: Option<f64>,
    pub perturbing_sigma: Option<f64>,
    pub aggregator: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
}

macro_rules! apply_field {
    ($raw:ident, $overrides:ident, $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$overrides.$field {
            $raw.$field = v.clone();
        })*
    };
}

macro_rules! apply_option_field {
    ($raw:ident, $overrides:ident, $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$overrides.$field {
            $raw.$field = Some(v.clone());
        })*
    };
}

/// Applies flag overrides on top of file values.
pub fn apply_overrides(raw: &mut RawConfig, overrides: &ConfigOverrides) {
    apply_field!(
        raw,
        overrides,
        dataset,
        label_column,
        normalize,
        num_samples,
        num_features,
        num_classes,
        class_separation,
        num_clients,
        num_attackers,
        rounds,
        adversarial_round,
        partition,
        dirichlet_beta,
        attacker_selection,
        test_fraction,
        gamma,
        trigger_features,
        target_label,
        poison_fraction,
        repeat_attack,
        eta,
        tau,
        batch_size,
        sigma,
        rho_scale,
        clip,
        mc_samples,
        eps_alpha,
        l_z,
        eps_s,
        eps_r,
        eps_g,
        max_iters,
        pardoning,
        perturbing_clip,
        perturbing_sigma,
        aggregator,
        seed,
    );
    apply_option_field!(raw, overrides, csv_path, group_column, alpha, out_dir);
}

/// Where the data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        num_samples: usize,
        num_features: usize,
        num_classes: usize,
        class_separation: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        group_column: Option<String>,
        normalize: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionKind {
    Uniform,
    ByGroup,
    Dirichlet { beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackerSelection {
    /// Lowest client ids.
    FirstR,
    /// The clients holding the most data.
    LargestShards,
}

/// Attack settings, present only when the run has attackers.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackParams {
    pub gamma: f64,
    pub trigger_features: Vec<usize>,
    pub target_label: usize,
    pub poison_fraction: f64,
    pub scale_factor: f64,
    pub adversarial_round: usize,
    pub repeat: bool,
}

/// Fully validated experiment settings.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub source: DatasetSource,
    pub num_clients: usize,
    pub num_attackers: usize,
    pub rounds: usize,
    pub partition: PartitionKind,
    pub attacker_selection: AttackerSelection,
    pub test_fraction: f64,
    pub attack: Option<AttackParams>,
    pub train: TrainConfig,
    pub expost: ExPostConfig,
    pub mc_samples: usize,
    pub eps_alpha: f64,
    pub l_z: f64,
    pub wpcra: WpcraParams,
    pub aggregator: Aggregator,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn invalid(key: &str, constraint: &str) -> Error {
    Error::InvalidConfig(format!("key '{key}': {constraint}"))
}

impl ExperimentConfig {
    /// Validates a raw config and resolves all typed settings.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        if raw.num_clients < 2 {
            return Err(invalid("num_clients", "must be at least 2"));
        }
        if raw.num_attackers >= raw.num_clients {
            return Err(invalid(
                "num_attackers",
                "must be strictly less than num_clients",
            ));
        }
        if !(raw.test_fraction > 0.0 && raw.test_fraction < 1.0) {
            return Err(invalid("test_fraction", "must lie strictly in (0, 1)"));
        }
        if raw.eta < 0.0 {
            return Err(invalid("eta", "must be non-negative"));
        }
        if raw.tau < 1 {
            return Err(invalid("tau", "must be at least 1"));
        }
        if raw.sigma < 0.0 {
            return Err(invalid("sigma", "must be non-negative"));
        }
        if raw.rho_scale <= 0.0 {
            return Err(invalid("rho_scale", "must be positive"));
        }
        if raw.mc_samples < 2 {
            return Err(invalid("mc_samples", "must be at least 2"));
        }
        if !(raw.eps_alpha > 0.0 && raw.eps_alpha <= 1.0) {
            return Err(invalid("eps_alpha", "must lie in (0, 1]"));
        }
        if raw.l_z <= 0.0 {
            return Err(invalid("l_z", "must be positive"));
        }
        for (key, value) in [
            ("eps_s", raw.eps_s),
            ("eps_r", raw.eps_r),
            ("eps_g", raw.eps_g),
        ] {
            if value <= 0.0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if raw.max_iters < 1 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if raw.perturbing_clip <= 0.0 {
            return Err(invalid("perturbing_clip", "must be positive"));
        }
        if !(0.0..=1.0).contains(&raw.poison_fraction) {
            return Err(invalid("poison_fraction", "must lie in [0, 1]"));
        }

        let source = match raw.dataset.as_str() {
            "synthetic" => {
                if raw.num_features < 2 {
                    return Err(invalid("num_features", "must be at least 2"));
                }
                if raw.num_classes < 2 {
                    return Err(invalid("num_classes", "must be at least 2"));
                }
                DatasetSource::Synthetic {
                    num_samples: raw.num_samples,
                    num_features: raw.num_features,
                    num_classes: raw.num_classes,
                    class_separation: raw.class_separation,
                }
            }
            "csv" => {
                let path = raw
                    .csv_path
                    .as_ref()
                    .ok_or_else(|| invalid("csv_path", "required when dataset = \"csv\""))?;
                DatasetSource::Csv {
                    path: PathBuf::from(path),
                    label_column: raw.label_column.clone(),
                    group_column: raw.group_column.clone(),
                    normalize: raw.normalize,
                }
            }
            other => {
                return Err(invalid(
                    "dataset",
                    &format!("unknown source '{other}' (expected synthetic | csv)"),
                ))
            }
        };

        let partition = match raw.partition.as_str() {
            "uniform" => PartitionKind::Uniform,
            "by_group" => {
                // synthetic data carries its class as the group tag
                if raw.dataset == "csv" && raw.group_column.is_none() {
                    return Err(invalid(
                        "group_column",
                        "required for by_group partitioning of csv data",
                    ));
                }
                PartitionKind::ByGroup
            }
            "dirichlet" => {
                if raw.dirichlet_beta <= 0.0 {
                    return Err(invalid("dirichlet_beta", "must be positive"));
                }
                PartitionKind::Dirichlet {
                    beta: raw.dirichlet_beta,
                }
            }
            other => {
                return Err(invalid(
                    "partition",
                    &format!(
                        "unknown strategy '{other}' (expected uniform | by_group | dirichlet)"
                    ),
                ))
            }
        };

        let attacker_selection = match raw.attacker_selection.as_str() {
            "first" => AttackerSelection::FirstR,
            "largest" => AttackerSelection::LargestShards,
            other => {
                return Err(invalid(
                    "attacker_selection",
                    &format!("unknown rule '{other}' (expected first | largest)"),
                ))
            }
        };

        let attack = if raw.num_attackers > 0 {
            let alpha = raw.alpha.ok_or_else(|| {
                invalid(
                    "alpha",
                    "required when num_attackers > 0; there is no sensible default scale factor",
                )
            })?;
            if alpha <= 0.0 {
                return Err(invalid("alpha", "must be positive"));
            }
            if raw.adversarial_round < 1 || raw.adversarial_round > raw.rounds {
                return Err(invalid(
                    "adversarial_round",
                    "must lie in [1, rounds] when attackers exist",
                ));
            }
            if raw.poison_fraction > 0.0 && raw.trigger_features.is_empty() {
                return Err(invalid(
                    "trigger_features",
                    "must be non-empty when poison_fraction > 0",
                ));
            }
            Some(AttackParams {
                gamma: raw.gamma,
                trigger_features: raw.trigger_features.clone(),
                target_label: raw.target_label,
                poison_fraction: raw.poison_fraction,
                scale_factor: alpha,
                adversarial_round: raw.adversarial_round,
                repeat: raw.repeat_attack,
            })
        } else {
            None
        };

        let batch = match &raw.batch_size {
            BatchField::Count(0) => return Err(invalid("batch_size", "must be positive")),
            BatchField::Count(n) => BatchSize::Size(*n),
            BatchField::Named(name) if name == "full" => BatchSize::Full,
            BatchField::Named(other) => {
                return Err(invalid(
                    "batch_size",
                    &format!("expected \"full\" or a positive count, got '{other}'"),
                ))
            }
        };
        let train = TrainConfig::new(raw.eta, raw.tau, batch);

        let expost = ExPostConfig {
            sigma: raw.sigma,
            rho_scale: raw.rho_scale,
            clip: raw.clip,
        };
        let wgme_opts = WgmeOptions {
            eps_r: raw.eps_r,
            eps_g: raw.eps_g,
            max_iters: raw.max_iters,
        };
        let wpcra = WpcraParams {
            eps_sim: raw.eps_s,
            pardoning: raw.pardoning,
            wgme: wgme_opts,
        };

        let aggregator = match raw.aggregator.as_str() {
            "wpcra" => Aggregator::Wpcra(wpcra),
            "mean" => Aggregator::Mean,
            "krum" => {
                if raw.num_clients < raw.num_attackers + 3 {
                    return Err(invalid(
                        "aggregator",
                        "krum needs num_clients - num_attackers - 2 >= 1",
                    ));
                }
                Aggregator::Krum {
                    num_attackers: raw.num_attackers,
                }
            }
            "rfa" => Aggregator::Rfa(wgme_opts),
            "perturbing" => Aggregator::Perturbing {
                clip_threshold: raw.perturbing_clip,
                sigma: raw.perturbing_sigma,
            },
            other => return Err(Error::UnknownAggregator(other.to_string())),
        };

        Ok(Self {
            raw: raw.clone(),
            source,
            num_clients: raw.num_clients,
            num_attackers: raw.num_attackers,
            rounds: raw.rounds,
            partition,
            attacker_selection,
            test_fraction: raw.test_fraction,
            attack,
            train,
            expost,
            mc_samples: raw.mc_samples,
            eps_alpha: raw.eps_alpha,
            l_z: raw.l_z,
            wpcra,
            aggregator,
            seed: raw.seed,
            out_dir: raw.out_dir.as_ref().map(PathBuf::from),
        })
    }
}

/// Table-style scenario presets on the synthetic dataset.
///
/// The `table1-n{N}r{R}` family covers the comparison grid; `default`
/// matches the sensitivity-analysis base point (N = 20, R = 4, T = 100,
/// sigma = 0.01).
pub fn preset(name: &str) -> Result<RawConfig> {
    let grid: &[(&str, usize, usize)] = &[
        ("table1-n10r4", 10, 4),
        ("table1-n20r3", 20, 3),
        ("table1-n20r4", 20, 4),
        ("table1-n30r4", 30, 4),
        ("table1-n40r4", 40, 4),
        ("table1-n40r5", 40, 5),
        ("table1-n50r4", 50, 4),
        ("table1-n50r5", 50, 5),
    ];
    let (n, r) = if name == "default" {
        (20, 4)
    } else {
        match grid.iter().find(|(g, _, _)| *g == name) {
            Some((_, n, r)) => (*n, *r),
            None => return Err(Error::UnknownPreset(name.to_string())),
        }
    };
    let mut raw = RawConfig {
        num_clients: n,
        num_attackers: r,
        rounds: 100,
        adversarial_round: 10,
        alpha: Some(10.0),
        ..RawConfig::default()
    };
    // The small synthetic blobs tolerate a larger step than real tabular
    // corpora; one local iteration at this rate reaches a useful model
    // within 100 rounds.
    raw.eta = 0.05;
    Ok(raw)
}

/// Sweepable axes for the sensitivity tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    NumClients,
    NumAttackers,
    Rounds,
    Sigma,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "N" => Ok(SweepAxis::NumClients),
            "R" => Ok(SweepAxis::NumAttackers),
            "T" => Ok(SweepAxis::Rounds),
            "sigma" => Ok(SweepAxis::Sigma),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis '{other}' (expected N | R | T | sigma)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::NumClients => "N",
            SweepAxis::NumAttackers => "R",
            SweepAxis::Rounds => "T",
            SweepAxis::Sigma => "sigma",
        }
    }

    /// Returns a copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &RawConfig, value: f64) -> Result<RawConfig> {
        let mut raw = base.clone();
        match self {
            SweepAxis::NumClients => raw.num_clients = as_count("N", value)?,
            SweepAxis::NumAttackers => raw.num_attackers = as_count("R", value)?,
            SweepAxis::Rounds => raw.rounds = as_count("T", value)?,
            SweepAxis::Sigma => {
                if value < 0.0 {
                    return Err(Error::InvalidConfig("sweep sigma must be >= 0".into()));
                }
                raw.sigma = value;
            }
        }
        Ok(raw)
    }
}

fn as_count(axis: &str, value: f64) -> Result<usize> {
    if value.fract() != 0.0 || value < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sweep axis {axis} needs non-negative integers, got {value}"
        )));
    }
    Ok(value as usize)
}
