//! Dataset ingestion, synthesis, normalization, and client partitioning.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::model::Sample;

/// A labelled tabular dataset, optionally carrying one group tag per sample
/// (used for group-based partitioning).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_features: usize,
    pub num_classes: usize,
    pub groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Indices of samples per class, in dataset order.
    fn by_class(&self) -> Vec<Vec<usize>> {
        let mut buckets = vec![Vec::new(); self.num_classes];
        for (i, s) in self.samples.iter().enumerate() {
            buckets[s.label].push(i);
        }
        buckets
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_features: self.num_features,
            num_classes: self.num_classes,
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        }
    }
}

/// Min-max normalizes every feature column to `[0, 1]` in place.
///
/// Constant columns map to all zeros. Idempotent: a second pass leaves the
/// data unchanged.
pub fn normalize_min_max(dataset: &mut Dataset) {
    let f = dataset.num_features;
    if dataset.samples.is_empty() || f == 0 {
        return;
    }
    let mut mins = vec![f64::INFINITY; f];
    let mut maxs = vec![f64::NEG_INFINITY; f];
    for s in &dataset.samples {
        for (j, v) in s.features.iter().enumerate() {
            mins[j] = mins[j].min(*v);
            maxs[j] = maxs[j].max(*v);
        }
    }
    for s in &mut dataset.samples {
        for (j, v) in s.features.iter_mut().enumerate() {
            let range = maxs[j] - mins[j];
            *v = if range == 0.0 {
                0.0
            } else {
                (*v - mins[j]) / range
            };
        }
    }
}

/// Loads a CSV file with a header row into a [`Dataset`].
///
/// Labels are mapped to dense indices in first-appearance order. All other
/// columns except the optional group column must parse as numbers. With
/// `normalize` set, features are min-max scaled to `[0, 1]`.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    group_column: Option<&str>,
    normalize: bool,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let group_idx = match group_column {
        Some(g) => Some(
            headers
                .iter()
                .position(|h| h == g)
                .ok_or_else(|| Error::MissingColumn(g.to_string()))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != group_idx)
        .collect();

    let mut samples = Vec::new();
    let mut groups = Vec::new();
    let mut label_map: Vec<String> = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record?;
        let mut features = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let raw = record.get(col).unwrap_or("").trim();
            let value: f64 = raw.parse().map_err(|_| Error::BadCell {
                row: row_num + 2, // 1-based, counting the header row
                column: headers[col].clone(),
                value: raw.to_string(),
            })?;
            features.push(value);
        }
        let raw_label = record.get(label_idx).unwrap_or("").trim().to_string();
        let label = match label_map.iter().position(|l| *l == raw_label) {
            Some(i) => i,
            None => {
                label_map.push(raw_label);
                label_map.len() - 1
            }
        };
        samples.push(Sample { features, label });
        if let Some(gi) = group_idx {
            groups.push(record.get(gi).unwrap_or("").trim().to_string());
        }
    }
    if label_map.len() < 2 {
        return Err(Error::TooFewClasses(label_map.len()));
    }
    let mut dataset = Dataset {
        num_features: feature_cols.len(),
        num_classes: label_map.len(),
        samples,
        groups: group_idx.map(|_| groups),
    };
    if normalize {
        normalize_min_max(&mut dataset);
    }
    Ok(dataset)
}

/// Draws class-conditional Gaussian blobs and min-max normalizes them.
///
/// Class `c` is centered at `separation * e_{c mod F}` with unit noise, and
/// labels are dealt round-robin so class counts stay balanced within one.
/// Each sample's group tag is its class, so group-based partitioning works
/// on synthetic data too (one class distribution per client).
pub fn synth_dataset(
    num_samples: usize,
    num_features: usize,
    num_classes: usize,
    class_separation: f64,
    seed: u64,
) -> Dataset {
    assert!(num_features >= 2, "need at least 2 features");
    assert!(num_classes >= 2, "need at least 2 classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut samples = Vec::with_capacity(num_samples);
    let mut groups = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let label = i % num_classes;
        let mut features: Vec<f64> = (0..num_features).map(|_| noise.sample(&mut rng)).collect();
        features[label % num_features] += class_separation;
        samples.push(Sample { features, label });
        groups.push(format!("class-{label}"));
    }
    let mut dataset = Dataset {
        samples,
        num_features,
        num_classes,
        groups: Some(groups),
    };
    normalize_min_max(&mut dataset);
    dataset
}

/// How to spread a dataset over clients.
#[derive(Clone, Debug, PartialEq)]
pub enum PartitionStrategy {
    /// One group value per client; errors unless distinct groups == clients.
    ByGroup,
    /// Seeded shuffle, then near-equal contiguous shards.
    UniformRandom { seed: u64 },
    /// Label-skewed shards: per class, client proportions drawn from a
    /// symmetric Dirichlet with concentration `beta`.
    Dirichlet { beta: f64, seed: u64 },
}

/// Splits `dataset` into `num_clients` disjoint shards covering it exactly.
pub fn partition(
    dataset: &Dataset,
    num_clients: usize,
    strategy: &PartitionStrategy,
) -> Result<Vec<Dataset>> {
    if num_clients < 2 {
        return Err(Error::Partition("need at least 2 clients".into()));
    }
    let assignments: Vec<Vec<usize>> = match strategy {
        PartitionStrategy::ByGroup => {
            let groups = dataset.groups.as_ref().ok_or_else(|| {
                Error::Partition("by_group partitioning needs a group column".into())
            })?;
            let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                by_group.entry(g.as_str()).or_default().push(i);
            }
            if by_group.len() != num_clients {
                return Err(Error::Partition(format!(
                    "found {} distinct groups but {} clients were requested",
                    by_group.len(),
                    num_clients
                )));
            }
            by_group.into_values().collect()
        }
        PartitionStrategy::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut indices: Vec<usize> = (0..dataset.len()).collect();
            indices.shuffle(&mut rng);
            let base = dataset.len() / num_clients;
            let extra = dataset.len() % num_clients;
            let mut shards = Vec::with_capacity(num_clients);
            let mut cursor = 0;
            for c in 0..num_clients {
                let take = base + usize::from(c < extra);
                shards.push(indices[cursor..cursor + take].to_vec());
                cursor += take;
            }
            shards
        }
        PartitionStrategy::Dirichlet { beta, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut shards = vec![Vec::new(); num_clients];
            for class_indices in dataset.by_class() {
                if class_indices.is_empty() {
                    continue;
                }
                let mut order = class_indices.clone();
                order.shuffle(&mut rng);
                let proportions = dirichlet_symmetric(*beta, num_clients, &mut rng);
                // Cumulative cut points over this class's samples.
                let n = order.len() as f64;
                let mut cumulative = 0.0;
                let mut start = 0usize;
                for (c, p) in proportions.iter().enumerate() {
                    cumulative += p;
                    let end = if c + 1 == num_clients {
                        order.len()
                    } else {
                        (cumulative * n).round() as usize
                    }
                    .clamp(start, order.len());
                    shards[c].extend_from_slice(&order[start..end]);
                    start = end;
                }
            }
            shards
        }
    };

    if let Some(empty) = assignments.iter().position(|a| a.is_empty()) {
        return Err(Error::Partition(format!(
            "client {empty} received no samples; use a larger dataset or fewer clients"
        )));
    }
    Ok(assignments.iter().map(|idx| dataset.subset(idx)).collect())
}

/// Symmetric Dirichlet draw via normalized Gamma samples.
fn dirichlet_symmetric(beta: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert!(beta > 0.0, "dirichlet concentration must be positive");
    let gamma = Gamma::new(beta, 1.0).unwrap();
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|g| g / total).collect()
}

/// Stratified train/test split; `test_fraction` of each class (rounded
/// down, at least leaving one training sample per class) goes to the test
/// set.
pub fn train_test_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    assert!((0.0..1.0).contains(&test_fraction));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for mut class_indices in dataset.by_class() {
        class_indices.shuffle(&mut rng);
        let take = ((class_indices.len() as f64) * test_fraction).floor() as usize;
        let take = take.min(class_indices.len().saturating_sub(1));
        test_idx.extend_from_slice(&class_indices[..take]);
        train_idx.extend_from_slice(&class_indices[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    (dataset.subset(&train_idx), dataset.subset(&test_idx))
}

/// Fraction of samples a plain argmax classifier gets right.
pub fn eval_accuracy(params: &crate::param::ParamVector, dataset: &Dataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let correct = dataset
        .samples
        .iter()
        .filter(|s| crate::model::predict_class(params, &s.features) == s.label)
        .count();
    correct as f64 / dataset.len() as f64
}
