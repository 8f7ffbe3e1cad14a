//! Aggregation kernels: the whole-process robust pipeline and baselines.
//!
//! The robust pipeline chains similarity scoring, pardoning, and logit
//! reweighting (ex-ante) into a trust-weighted geometric median
//! (ex-durante). Baselines cover the size-weighted mean, Krum, plain
//! geometric median, and clipped-mean-plus-noise aggregation.

mod baselines;
mod exante;
mod wgme;

pub use baselines::{
    aggregate_krum, aggregate_mean, aggregate_perturbing, size_weights, KrumOutcome,
};
pub use exante::{
    logit_rescale, pairwise_similarity, pardon, trust_weights, SimilarityMatrix, TrustWeights,
    WeightStage,
};
pub use wgme::{aggregate_rfa, wgme, wgme_objective, WgmeOptions, WgmeOutcome};

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::param::ParamVector;

/// Knobs for the whole-process pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WpcraParams {
    /// Norm floor in the similarity denominator.
    pub eps_sim: f64,
    /// Whether the pardoning pass runs.
    pub pardoning: bool,
    pub wgme: WgmeOptions,
}

impl Default for WpcraParams {
    fn default() -> Self {
        Self {
            eps_sim: 1e-9,
            pardoning: true,
            wgme: WgmeOptions::default(),
        }
    }
}

/// Output of the whole-process aggregation.
#[derive(Clone, Debug)]
pub struct WpcraOutcome {
    pub update: ParamVector,
    /// Post-median weights `v_i / sum(v)`; these are the weights the
    /// false-negative metric inspects.
    pub final_weights: Vec<f64>,
    /// Normalized ex-ante trust weights that seeded the median.
    pub trust: Vec<f64>,
}

/// Whole-process aggregation: similarity -> pardon -> trust weights ->
/// logit stretch -> weighted geometric median.
pub fn aggregate_wpcra(
    updates: &[ParamVector],
    histories: &[ParamVector],
    sizes: &[f64],
    params: &WpcraParams,
) -> WpcraOutcome {
    assert_eq!(updates.len(), histories.len());
    assert_eq!(updates.len(), sizes.len());
    if updates.len() == 1 {
        return WpcraOutcome {
            update: updates[0].clone(),
            final_weights: vec![1.0],
            trust: vec![1.0],
        };
    }
    let mut matrix = pairwise_similarity(histories, params.eps_sim);
    if params.pardoning {
        matrix = pardon(&matrix);
    }
    let raw = trust_weights(&matrix.ms);
    let normalized = logit_rescale(&raw);
    let outcome = wgme(updates, &normalized.values, sizes, &params.wgme);
    WpcraOutcome {
        update: outcome.median,
        final_weights: outcome.final_weights,
        trust: normalized.values,
    }
}

/// Aggregator selection, as exposed on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Aggregator {
    Wpcra(WpcraParams),
    Mean,
    Krum { num_attackers: usize },
    Rfa(WgmeOptions),
    Perturbing { clip_threshold: f64, sigma: f64 },
}

impl Aggregator {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Wpcra(_) => "wpcra",
            Aggregator::Mean => "mean",
            Aggregator::Krum { .. } => "krum",
            Aggregator::Rfa(_) => "rfa",
            Aggregator::Perturbing { .. } => "perturbing",
        }
    }

    /// Runs the kernel and reports both the aggregate and the per-client
    /// weights it effectively used (size-proportional for weight-free
    /// kernels, one-hot for Krum).
    pub fn aggregate(
        &self,
        updates: &[ParamVector],
        histories: &[ParamVector],
        sizes: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(ParamVector, Vec<f64>)> {
        Ok(match self {
            Aggregator::Wpcra(params) => {
                let out = aggregate_wpcra(updates, histories, sizes, params);
                (out.update, out.final_weights)
            }
            Aggregator::Mean => (aggregate_mean(updates, sizes), size_weights(sizes)),
            Aggregator::Krum { num_attackers } => {
                let out = aggregate_krum(updates, *num_attackers)?;
                let mut weights = vec![0.0; updates.len()];
                weights[out.selected] = 1.0;
                (out.update, weights)
            }
            Aggregator::Rfa(opts) => {
                let out = aggregate_rfa(updates, sizes, opts);
                (out.median, out.final_weights)
            }
            Aggregator::Perturbing {
                clip_threshold,
                sigma,
            } => (
                aggregate_perturbing(updates, sizes, *clip_threshold, *sigma, rng),
                size_weights(sizes),
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;
    use rand::Rng;

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::from_vec(values.to_vec())
    }

    #[test]
    fn identical_benign_clients_keep_their_update() {
        let u = pv(&[0.3, -0.7]);
        let updates = vec![u.clone(), u.clone()];
        let out = aggregate_wpcra(&updates, &updates, &[1.0, 1.0], &WpcraParams::default());
        assert_eq!(out.update, u);
    }

    #[test]
    fn coordinated_attackers_lose_their_weight() {
        // 4 of 20 submit one identical large update; 16 benign clients
        // submit i.i.d. small updates.
        let mut rng = stream(3, "wpcra-detect", &[]);
        let n = 20;
        let attackers = 4;
        let dim = 8;
        let mut updates = Vec::new();
        let malicious = pv(&(0..dim).map(|_| 5.0).collect::<Vec<_>>());
        for _ in 0..attackers {
            updates.push(malicious.clone());
        }
        for _ in attackers..n {
            updates.push(pv(&(0..dim)
                .map(|_| rng.random_range(-0.1..0.1))
                .collect::<Vec<_>>()));
        }
        let sizes = vec![10.0; n];
        let out = aggregate_wpcra(&updates, &updates, &sizes, &WpcraParams::default());
        for i in 0..attackers {
            assert!(
                out.final_weights[i] < 1.0 / n as f64,
                "attacker {i} kept weight {}",
                out.final_weights[i]
            );
        }
        assert!((out.final_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_histories_reduce_to_rfa() {
        // With pairwise-orthogonal histories the ex-ante stage is uniform,
        // so the pipeline must agree with the plain geometric median.
        let dim = 6;
        let mut updates = Vec::new();
        let mut histories = Vec::new();
        for i in 0..4 {
            let mut h = vec![0.0; dim];
            h[i] = 1.0;
            histories.push(pv(&h));
            let mut u = vec![0.1; dim];
            u[i] = (i as f64) - 1.5;
            updates.push(pv(&u));
        }
        let sizes = vec![2.0, 5.0, 1.0, 4.0];
        let ours = aggregate_wpcra(&updates, &histories, &sizes, &WpcraParams::default());
        let rfa = aggregate_rfa(&updates, &sizes, &WgmeOptions::default());
        for i in 0..dim {
            assert!(
                (ours.update[i] - rfa.median[i]).abs() < 1e-9,
                "coordinate {i} differs"
            );
        }
    }

    #[test]
    fn aggregator_names_round_trip() {
        let aggs = [
            Aggregator::Wpcra(WpcraParams::default()),
            Aggregator::Mean,
            Aggregator::Krum { num_attackers: 1 },
            Aggregator::Rfa(WgmeOptions::default()),
            Aggregator::Perturbing {
                clip_threshold: 1.0,
                sigma: 0.0,
            },
        ];
        let names: Vec<_> = aggs.iter().map(|a| a.name()).collect();
        assert_eq!(names, ["wpcra", "mean", "krum", "rfa", "perturbing"]);
    }
}
