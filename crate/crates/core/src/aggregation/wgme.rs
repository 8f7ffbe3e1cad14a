//! Weighted geometric median estimation via smoothed Weiszfeld iteration.
//!
//! Minimizes `g(m) = sum_i w_i |D_i| ||m - delta_i||`. The iteration starts
//! at the weighted mean, reweights each update by the inverse of its
//! distance to the current estimate (floored at `eps_r`), and stops when
//! the relative objective change drops below `eps_g`.

use crate::param::ParamVector;

/// Smoothed-Weiszfeld knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WgmeOptions {
    /// Distance floor used in the reweighting step.
    pub eps_r: f64,
    /// Relative objective-change stopping threshold.
    pub eps_g: f64,
    pub max_iters: usize,
}

impl Default for WgmeOptions {
    fn default() -> Self {
        Self {
            eps_r: 1e-6,
            eps_g: 1e-6,
            max_iters: 100,
        }
    }
}

/// Result of one geometric-median estimation.
#[derive(Clone, Debug)]
pub struct WgmeOutcome {
    pub median: ParamVector,
    /// Normalized temporal weights `v_i / sum(v)` from the last iteration.
    pub final_weights: Vec<f64>,
    /// Objective value at the initial point and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The objective of the weighted geometric median problem.
pub fn wgme_objective(m: &ParamVector, updates: &[ParamVector], combined: &[f64]) -> f64 {
    updates
        .iter()
        .zip(combined)
        .map(|(u, w)| w * m.distance(u))
        .sum()
}

fn weighted_mean(updates: &[ParamVector], weights: &[f64]) -> ParamVector {
    let total: f64 = weights.iter().sum();
    let mut out = ParamVector::zeros(updates[0].dim());
    for (u, w) in updates.iter().zip(weights) {
        out.add_scaled_assign(u, *w);
    }
    out.scaled(1.0 / total)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

/// Estimates the weighted geometric median of `updates`.
///
/// `trust` carries the ex-ante weights and `sizes` the local dataset
/// sizes; the objective mixes them multiplicatively. Panics unless both
/// slices match `updates` in length and at least one product is positive.
///
/// If the initial point already attains a zero objective (all updates
/// identical) it is returned immediately with weights proportional to
/// `trust_i * sizes_i`.
pub fn wgme(
    updates: &[ParamVector],
    trust: &[f64],
    sizes: &[f64],
    opts: &WgmeOptions,
) -> WgmeOutcome {
    assert!(!updates.is_empty(), "wgme needs at least one update");
    assert_eq!(updates.len(), trust.len());
    assert_eq!(updates.len(), sizes.len());
    assert!(opts.eps_r > 0.0 && opts.eps_g > 0.0);
    let combined: Vec<f64> = trust.iter().zip(sizes).map(|(t, s)| t * s).collect();
    let total: f64 = combined.iter().sum();
    assert!(
        total > 0.0 && combined.iter().all(|w| *w >= 0.0),
        "wgme needs non-negative weights with a positive sum"
    );

    let mut median = weighted_mean(updates, &combined);
    let objective = wgme_objective(&median, updates, &combined);
    let mut trace = vec![objective];
    if objective == 0.0 {
        return WgmeOutcome {
            median,
            final_weights: normalized(&combined),
            objective_trace: trace,
            iterations: 0,
            converged: true,
        };
    }

    let mut temporal = combined.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev = objective;
    for _ in 0..opts.max_iters {
        iterations += 1;
        for (v, (u, w)) in temporal.iter_mut().zip(updates.iter().zip(&combined)) {
            *v = w / median.distance(u).max(opts.eps_r);
        }
        median = weighted_mean(updates, &temporal);
        let next = wgme_objective(&median, updates, &combined);
        trace.push(next);
        if next == 0.0 || (prev - next).abs() / next <= opts.eps_g {
            converged = true;
            break;
        }
        prev = next;
    }

    WgmeOutcome {
        median,
        final_weights: normalized(&temporal),
        objective_trace: trace,
        iterations,
        converged,
    }
}

/// Geometric-median aggregation with uniform trust: every client counts
/// only by data size.
pub fn aggregate_rfa(updates: &[ParamVector], sizes: &[f64], opts: &WgmeOptions) -> WgmeOutcome {
    wgme(updates, &vec![1.0; updates.len()], sizes, opts)
}
