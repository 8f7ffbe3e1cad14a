//! Ex-ante reweighting: update similarity, pardoning, and trust weights.
//!
//! Clients whose historic updates point the same way are suspicious;
//! coordinated attackers converge on a shared objective while honest
//! clients differ through their local data. The similarity matrix feeds a
//! malicious score per client, the pardoning pass protects honest clients
//! that merely look alike, and the logit map stretches the gap between the
//! resulting trust weights.

use crate::param::ParamVector;

/// Pairwise cosine similarities of historic updates plus per-client
/// malicious scores. The diagonal holds a `-inf` sentinel so row maxima
/// ignore self-similarity.
#[derive(Clone, Debug)]
pub struct SimilarityMatrix {
    pub sim: Vec<Vec<f64>>,
    pub ms: Vec<f64>,
}

/// Cosine similarity of every pair of histories with an `eps` floor on the
/// norms, so zero histories are well defined.
pub fn pairwise_similarity(histories: &[ParamVector], eps: f64) -> SimilarityMatrix {
    assert!(histories.len() >= 2, "similarity needs at least 2 clients");
    assert!(eps > 0.0);
    let n = histories.len();
    let norms: Vec<f64> = histories.iter().map(|h| h.norm().max(eps)).collect();
    let mut sim = vec![vec![f64::NEG_INFINITY; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sim[i][j] = histories[i].dot(&histories[j]) / (norms[i] * norms[j]);
            }
        }
    }
    let ms = row_maxima(&sim);
    SimilarityMatrix { sim, ms }
}

fn row_maxima(sim: &[Vec<f64>]) -> Vec<f64> {
    sim.iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Pardoning pass: for every ordered pair with `ms_j > ms_i` the entry
/// `sim_ij` is scaled by `ms_i / ms_j`, then malicious scores are
/// recomputed.
///
/// All rescales read a snapshot of the input scores, so the result is
/// order independent. Only positive entries are rescaled: the ratio is
/// then in `(0, 1)`, which keeps every entry from increasing and keeps
/// pardoning from raising anyone's malicious score (negative-cosine pairs
/// carry no collusion signal to shrink).
pub fn pardon(matrix: &SimilarityMatrix) -> SimilarityMatrix {
    let before = &matrix.ms;
    let mut sim = matrix.sim.clone();
    let n = sim.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && before[j] > before[i] && sim[i][j] > 0.0 {
                sim[i][j] *= before[i] / before[j];
            }
        }
    }
    let ms = row_maxima(&sim);
    SimilarityMatrix { sim, ms }
}

/// Lifecycle stage of a trust-weight vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightStage {
    /// Straight from the malicious scores; max client holds exactly 1.
    Raw,
    /// After the logit stretch, before normalization.
    Logit,
    /// Normalized to sum 1.
    Normalized,
    /// Post-WGME weights `v_i / sum(v)`.
    Final,
}

/// A per-client weight vector tagged with how far through the pipeline it
/// has come.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustWeights {
    pub values: Vec<f64>,
    pub stage: WeightStage,
}

impl TrustWeights {
    pub fn new(values: Vec<f64>, stage: WeightStage) -> Self {
        Self { values, stage }
    }
}

/// Raw trust weights `w_i = (1 - ms_i) / max_j(1 - ms_j)`.
///
/// Scores are clamped to at most 1 first. If every score is exactly 1 the
/// denominator vanishes and the weights fall back to uniform.
pub fn trust_weights(ms: &[f64]) -> TrustWeights {
    let clamped: Vec<f64> = ms.iter().map(|m| m.min(1.0)).collect();
    let denom = clamped
        .iter()
        .map(|m| 1.0 - m)
        .fold(f64::NEG_INFINITY, f64::max);
    if denom <= 0.0 {
        log::warn!("all malicious scores are 1; falling back to uniform trust weights");
        return TrustWeights::new(vec![1.0; ms.len()], WeightStage::Raw);
    }
    TrustWeights::new(
        clamped.iter().map(|m| (1.0 - m) / denom).collect(),
        WeightStage::Raw,
    )
}

const LOGIT_CLAMP: f64 = 1e-6;

/// Logit stretch and normalization of raw trust weights.
///
/// Each weight is clamped into the open unit interval, mapped through
/// `ln(w / (1 - w)) + 0.5`, clamped back into `[0, 1]`, and the vector is
/// normalized to sum 1. An all-zero result falls back to uniform.
pub fn logit_rescale(raw: &TrustWeights) -> TrustWeights {
    let stretched: Vec<f64> = raw
        .values
        .iter()
        .map(|w| {
            let w = w.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
            ((w / (1.0 - w)).ln() + 0.5).clamp(0.0, 1.0)
        })
        .collect();
    let total: f64 = stretched.iter().sum();
    if total <= 0.0 {
        log::warn!("all logit-rescaled weights are zero; falling back to uniform");
        let n = raw.values.len() as f64;
        return TrustWeights::new(vec![1.0 / n; raw.values.len()], WeightStage::Normalized);
    }
    TrustWeights::new(
        stretched.iter().map(|w| w / total).collect(),
        WeightStage::Normalized,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::from_vec(values.to_vec())
    }

    #[test]
    fn identical_vectors_have_unit_similarity() {
        let h = vec![pv(&[1.0, 2.0]), pv(&[1.0, 2.0])];
        let m = pairwise_similarity(&h, 1e-9);
        assert!((m.sim[0][1] - 1.0).abs() < 1e-12);
        assert!((m.ms[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_vectors_have_zero_similarity() {
        let h = vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])];
        let m = pairwise_similarity(&h, 1e-9);
        assert_eq!(m.sim[0][1], 0.0);
        assert_eq!(m.sim[1][0], 0.0);
    }

    #[test]
    fn zero_history_is_floored_not_nan() {
        let h = vec![pv(&[0.0, 0.0]), pv(&[1.0, 0.0])];
        let m = pairwise_similarity(&h, 1e-9);
        assert_eq!(m.sim[0][1], 0.0);
        assert!(m.sim[0][1].is_finite());
    }

    #[test]
    fn diagonal_is_excluded_from_scores() {
        let h = vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0]), pv(&[-1.0, 0.0])];
        let m = pairwise_similarity(&h, 1e-9);
        // without the sentinel every ms would be 1
        assert!(m.ms.iter().all(|&s| s < 1.0));
    }

    #[test]
    fn pardon_no_op_when_scores_equal() {
        let h = vec![pv(&[1.0, 1.0]), pv(&[1.0, 1.0])];
        let m = pairwise_similarity(&h, 1e-9);
        let p = pardon(&m);
        assert_eq!(p.sim, m.sim);
        assert_eq!(p.ms, m.ms);
    }

    #[test]
    fn pardon_matches_hand_applied_example() {
        // Hand-built matrix: scores (0.9, 0.6, 0.6); entries of the
        // lower-score clients pointing at client 0 shrink by 0.6/0.9.
        let sim = vec![
            vec![f64::NEG_INFINITY, 0.9, 0.3],
            vec![0.9, f64::NEG_INFINITY, 0.6],
            vec![0.3, 0.6, f64::NEG_INFINITY],
        ];
        let ms = vec![0.9, 0.6, 0.6];
        let p = pardon(&SimilarityMatrix { sim, ms });
        assert!(
            (p.sim[1][0] - 0.6).abs() < 1e-12,
            "sim_21 -> 0.9 * (0.6/0.9)"
        );
        assert!(
            (p.sim[2][0] - 0.2).abs() < 1e-12,
            "sim_31 -> 0.3 * (0.6/0.9)"
        );
        // the top-score client's row is untouched
        assert!((p.sim[0][1] - 0.9).abs() < 1e-12);
        assert!((p.sim[0][2] - 0.3).abs() < 1e-12);
        // ties between equal scores don't fire
        assert!((p.sim[1][2] - 0.6).abs() < 1e-12);
        assert!((p.sim[2][1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn trust_weight_examples() {
        let w = trust_weights(&[0.9, 0.2]);
        assert!((w.values[0] - 0.125).abs() < 1e-12);
        assert!((w.values[1] - 1.0).abs() < 1e-12);

        let w = trust_weights(&[0.4, 0.4, 0.4]);
        assert!(w.values.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let w = trust_weights(&[1.0, 0.0]);
        assert_eq!(w.values, vec![0.0, 1.0]);
    }

    #[test]
    fn all_ones_fall_back_to_uniform() {
        let w = trust_weights(&[1.0, 1.0, 1.0]);
        assert_eq!(w.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn logit_fixed_point_and_symmetry() {
        let w = logit_rescale(&TrustWeights::new(vec![0.5, 0.5], WeightStage::Raw));
        assert_eq!(w.values, vec![0.5, 0.5]);
        assert_eq!(w.stage, WeightStage::Normalized);
    }

    #[test]
    fn logit_saturates_tails() {
        // (0.9, 0.1) -> logits (2.697, -1.697) -> clamp (1, 0) -> (1, 0)
        let w = logit_rescale(&TrustWeights::new(vec![0.9, 0.1], WeightStage::Raw));
        assert!((w.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(w.values[1], 0.0);
    }

    #[test]
    fn logit_handles_exact_zero_and_one() {
        let w = logit_rescale(&TrustWeights::new(vec![1.0, 0.0], WeightStage::Raw));
        assert!(w.values.iter().all(|v| v.is_finite()));
        assert!((w.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
