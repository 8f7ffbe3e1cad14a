//! Backdoor trigger injection.
//!
//! The trigger bumps each chosen feature by `gamma / sqrt(n)` (clamped to
//! the normalized range) and forces the target label on a seeded uniform
//! subset of the victim dataset.

use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Everything that defines one backdoor campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackSpec {
    /// Feature indices the trigger overwrites (`n` = its length).
    pub trigger_features: Vec<usize>,
    /// Attack magnitude `gamma`, spread over the trigger features.
    pub gamma: f64,
    /// Label forced onto poisoned samples.
    pub target_label: usize,
    /// Fraction of the local dataset that gets triggered.
    pub poison_fraction: f64,
    /// Update scale factor applied when the attack fires.
    pub scale_factor: f64,
    /// Round in which attackers poison and scale.
    pub adversarial_round: usize,
    /// Client ids acting maliciously (`R` = its length).
    pub attacker_ids: Vec<usize>,
}

/// New value of one triggered feature: `min(v + gamma/sqrt(n), 1)`.
pub fn trigger_value(v: f64, gamma: f64, num_trigger_features: usize) -> f64 {
    assert!(
        num_trigger_features >= 1,
        "trigger needs at least one feature"
    );
    (v + gamma / (num_trigger_features as f64).sqrt()).min(1.0)
}

/// Returns a poisoned copy of `dataset`.
///
/// Exactly `floor(poison_fraction * |D|)` samples, chosen uniformly without
/// replacement by `seed`, get every trigger feature bumped and the label
/// replaced by the target. The input is left untouched.
pub fn inject_trigger(dataset: &Dataset, spec: &AttackSpec, seed: u64) -> Result<Dataset> {
    if spec.poison_fraction > 0.0 && spec.trigger_features.is_empty() {
        return Err(Error::EmptyTrigger);
    }
    for &j in &spec.trigger_features {
        if j >= dataset.num_features {
            return Err(Error::TriggerFeatureOutOfRange {
                index: j,
                num_features: dataset.num_features,
            });
        }
    }
    let mut poisoned = dataset.clone();
    let count = (spec.poison_fraction * dataset.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(poisoned);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.trigger_features.len();
    for idx in sample_indices(&mut rng, dataset.len(), count).iter() {
        let sample = &mut poisoned.samples[idx];
        for &j in &spec.trigger_features {
            sample.features[j] = trigger_value(sample.features[j], spec.gamma, n);
        }
        sample.label = spec.target_label;
    }
    Ok(poisoned)
}
