//! Baseline aggregation kernels: weighted mean, Krum, and the
//! clip-then-perturb mean.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::param::ParamVector;

/// Size-proportional weights `|D_i| / sum(|D|)`.
pub fn size_weights(sizes: &[f64]) -> Vec<f64> {
    let total: f64 = sizes.iter().sum();
    assert!(total > 0.0, "sizes must be positive");
    sizes.iter().map(|s| s / total).collect()
}

/// Size-weighted arithmetic mean of the updates.
pub fn aggregate_mean(updates: &[ParamVector], sizes: &[f64]) -> ParamVector {
    assert!(!updates.is_empty());
    assert_eq!(updates.len(), sizes.len());
    let weights = size_weights(sizes);
    let mut out = ParamVector::zeros(updates[0].dim());
    for (u, w) in updates.iter().zip(&weights) {
        out.add_scaled_assign(u, *w);
    }
    out
}

/// Krum's selection.
#[derive(Clone, Debug)]
pub struct KrumOutcome {
    /// Index of the chosen client (lowest index wins ties).
    pub selected: usize,
    pub update: ParamVector,
}

/// Krum: score each update by the sum of its `n - r - 2` smallest squared
/// distances to the others and return the lowest-scoring update verbatim.
pub fn aggregate_krum(updates: &[ParamVector], num_attackers: usize) -> Result<KrumOutcome> {
    let n = updates.len();
    let keep =
        n.checked_sub(num_attackers + 2)
            .filter(|k| *k >= 1)
            .ok_or(Error::KrumTooFewClients {
                n,
                r: num_attackers,
            })?;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d = updates[i].distance(&updates[j]);
                d * d
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let score: f64 = dists[..keep].iter().sum();
        match best {
            Some((s, _)) if score >= s => {}
            _ => best = Some((score, i)),
        }
    }
    let (_, selected) = best.unwrap();
    Ok(KrumOutcome {
        selected,
        update: updates[selected].clone(),
    })
}

/// Per-update norm clipping to `clip_threshold`, size-weighted mean, and
/// Gaussian perturbation of the aggregate.
pub fn aggregate_perturbing(
    updates: &[ParamVector],
    sizes: &[f64],
    clip_threshold: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> ParamVector {
    assert!(clip_threshold > 0.0);
    let clipped: Vec<ParamVector> = updates
        .iter()
        .map(|u| {
            let norm = u.norm();
            u.scaled((clip_threshold / norm).min(1.0))
        })
        .collect();
    let mut out = aggregate_mean(&clipped, sizes);
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).unwrap();
        for v in out.as_mut_slice() {
            *v += noise.sample(rng);
        }
    }
    out
}
