//! Multinomial logistic regression trained with local SGD.
//!
//! Parameters live in a flat [`ParamVector`] of length `C * (F + 1)`:
//! class `c` owns the slice `[c*(F+1), (c+1)*(F+1))` holding `F` feature
//! weights followed by one bias. Loss is softmax cross-entropy with
//! max-subtraction for stability.

use rand::seq::index::sample as sample_indices;
use rand_chacha::ChaCha8Rng;

use crate::param::ParamVector;

/// One labelled data point. Features are expected in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Batch selection for local SGD steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    /// Use the whole local dataset every step (seed-independent).
    Full,
    /// Sample this many points without replacement each step.
    Size(usize),
}

/// Local training hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_iterations: usize,
    pub batch: BatchSize,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, local_iterations: usize, batch: BatchSize) -> Self {
        assert!(learning_rate >= 0.0, "learning rate must be non-negative");
        assert!(local_iterations >= 1, "need at least one local iteration");
        Self {
            learning_rate,
            local_iterations,
            batch,
        }
    }
}

/// Parameter dimension for a `num_classes` x `num_features` model.
pub fn param_dim(num_classes: usize, num_features: usize) -> usize {
    num_classes * (num_features + 1)
}

/// Raw class scores `w_c . x + b_c`. Panics on dimension mismatch.
pub fn predict_logits(params: &ParamVector, features: &[f64]) -> Vec<f64> {
    let stride = features.len() + 1;
    assert_eq!(
        params.dim() % stride,
        0,
        "param length {} is not a multiple of features+1 = {}",
        params.dim(),
        stride
    );
    let num_classes = params.dim() / stride;
    let p = params.as_slice();
    (0..num_classes)
        .map(|c| {
            let row = &p[c * stride..(c + 1) * stride];
            let mut z = row[features.len()]; // bias
            for (w, x) in row[..features.len()].iter().zip(features) {
                z += w * x;
            }
            z
        })
        .collect()
}

/// Predicted class: argmax of the logits, ties to the lowest class index.
pub fn predict_class(params: &ParamVector, features: &[f64]) -> usize {
    argmax(&predict_logits(params, features))
}

/// First index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax with max-subtraction. Output sums to 1 for finite logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean negative log-likelihood and its gradient over a batch.
///
/// Panics on an empty batch or mismatched dimensions.
pub fn softmax_cross_entropy_grad(params: &ParamVector, batch: &[&Sample]) -> (f64, ParamVector) {
    assert!(!batch.is_empty(), "gradient of an empty batch");
    let num_features = batch[0].features.len();
    let stride = num_features + 1;
    let num_classes = params.dim() / stride;
    assert_eq!(params.dim(), num_classes * stride);

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.dim()];
    for sample in batch {
        assert_eq!(sample.features.len(), num_features, "feature dim mismatch");
        assert!(sample.label < num_classes, "label out of range");
        let logits = predict_logits(params, &sample.features);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - logits[sample.label];
        for c in 0..num_classes {
            let p = (logits[c] - log_sum).exp();
            let delta = p - if c == sample.label { 1.0 } else { 0.0 };
            let row = &mut grad[c * stride..(c + 1) * stride];
            for (g, x) in row[..num_features].iter_mut().zip(&sample.features) {
                *g += delta * x;
            }
            row[num_features] += delta;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (loss * scale, ParamVector::from_vec(grad))
}

/// Runs `cfg.local_iterations` SGD steps from `start` and returns the result.
///
/// With [`BatchSize::Full`] the outcome does not consume the generator.
/// Panics if `data` is empty.
pub fn local_train(
    start: &ParamVector,
    data: &[Sample],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> ParamVector {
    assert!(!data.is_empty(), "local training needs at least one sample");
    let mut params = start.clone();
    for _ in 0..cfg.local_iterations {
        let batch: Vec<&Sample> = match cfg.batch {
            BatchSize::Full => data.iter().collect(),
            BatchSize::Size(k) => {
                let k = k.min(data.len()).max(1);
                sample_indices(rng, data.len(), k)
                    .iter()
                    .map(|i| &data[i])
                    .collect()
            }
        };
        let (_, grad) = softmax_cross_entropy_grad(&params, &batch);
        params.add_scaled_assign(&grad, -cfg.learning_rate);
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;

    fn toy_batch() -> Vec<Sample> {
        // 3 classes, 4 features
        vec![
            Sample {
                features: vec![0.1, 0.9, 0.3, 0.0],
                label: 0,
            },
            Sample {
                features: vec![0.8, 0.2, 0.5, 1.0],
                label: 2,
            },
            Sample {
                features: vec![0.4, 0.4, 0.9, 0.1],
                label: 1,
            },
        ]
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let params = ParamVector::zeros(param_dim(3, 4));
        let logits = predict_logits(&params, &[0.5, 0.1, 0.2, 0.9]);
        assert_eq!(logits, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_row_picks_feature() {
        // class-0 row = (1, 0, ..., 0 | bias 0), x = e_0
        let mut v = vec![0.0; param_dim(3, 4)];
        v[0] = 1.0;
        let params = ParamVector::from_vec(v);
        let logits = predict_logits(&params, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(logits, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn logits_match_naive_matrix_vector_product() {
        let mut rng = stream(11, "model-test", &[]);
        use rand::Rng;
        for _ in 0..20 {
            let f = rng.random_range(1..6);
            let c = rng.random_range(2..5);
            let params = ParamVector::from_vec(
                (0..param_dim(c, f))
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect(),
            );
            let x: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
            let logits = predict_logits(&params, &x);
            // independent naive double loop
            for (ci, logit) in logits.iter().enumerate() {
                let mut expect = 0.0;
                for (fi, xv) in x.iter().enumerate() {
                    expect += params[ci * (f + 1) + fi] * xv;
                }
                expect += params[ci * (f + 1) + f];
                assert!((logit - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_softmax_loss_is_ln_c() {
        let batch = toy_batch();
        let refs: Vec<&Sample> = batch.iter().collect();
        let params = ParamVector::zeros(param_dim(3, 4));
        let (loss, _) = softmax_cross_entropy_grad(&params, &refs);
        assert!((loss - (3.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let probs = softmax(&[3.0, -1.0, 250.0, 0.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let probs = softmax(&[-700.0, 700.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_loss_and_gradient() {
        // Single sample with features e_0; craft logits +20 for the true
        // class and -20 elsewhere via weights on feature 0.
        let f = 4;
        let mut v = vec![0.0; param_dim(3, f)];
        v[0] = 20.0; // class 0, weight on feature 0
        v[f + 1] = -20.0; // class 1
        v[2 * (f + 1)] = -20.0; // class 2
        let params = ParamVector::from_vec(v);
        let sample = Sample {
            features: vec![1.0, 0.0, 0.0, 0.0],
            label: 0,
        };
        let (loss, grad) = softmax_cross_entropy_grad(&params, &[&sample]);
        assert!(loss < 1e-6);
        assert!(grad.iter().all(|g| g.abs() < 1e-6));
    }

    /// Central finite differences; the independent oracle for the analytic
    /// gradient.
    fn numeric_gradient(params: &ParamVector, batch: &[&Sample], h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.dim());
        for i in 0..params.dim() {
            let mut plus = params.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[i] -= h;
            let (lp, _) = softmax_cross_entropy_grad(&plus, batch);
            let (lm, _) = softmax_cross_entropy_grad(&minus, batch);
            out.push((lp - lm) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let batch = toy_batch();
        let refs: Vec<&Sample> = batch.iter().collect();
        let mut rng = stream(5, "grad-check", &[]);
        use rand::Rng;
        let params = ParamVector::from_vec(
            (0..param_dim(3, 4))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
        let (_, analytic) = softmax_cross_entropy_grad(&params, &refs);
        let numeric = numeric_gradient(&params, &refs, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-6, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let data = toy_batch();
        let start = ParamVector::from_vec(vec![0.25; param_dim(3, 4)]);
        let cfg = TrainConfig::new(0.0, 3, BatchSize::Full);
        let mut rng = stream(1, "train", &[]);
        let out = local_train(&start, &data, &cfg, &mut rng);
        assert_eq!(out, start);
    }

    #[test]
    fn one_full_batch_step_equals_explicit_update() {
        let data = toy_batch();
        let refs: Vec<&Sample> = data.iter().collect();
        let start = ParamVector::zeros(param_dim(3, 4));
        let cfg = TrainConfig::new(0.1, 1, BatchSize::Full);
        let mut rng = stream(2, "train", &[]);
        let out = local_train(&start, &data, &cfg, &mut rng);
        let (_, grad) = softmax_cross_entropy_grad(&start, &refs);
        let expect = start.add(&grad.scaled(-0.1));
        assert_eq!(out, expect);
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        // Linearly separable 2-class toy set.
        let data: Vec<Sample> = (0..10)
            .map(|i| {
                let v = i as f64 / 10.0;
                if i % 2 == 0 {
                    Sample {
                        features: vec![v, 1.0],
                        label: 0,
                    }
                } else {
                    Sample {
                        features: vec![1.0, v * 0.3],
                        label: 1,
                    }
                }
            })
            .collect();
        let refs: Vec<&Sample> = data.iter().collect();
        let mut params = ParamVector::zeros(param_dim(2, 2));
        let cfg = TrainConfig::new(0.5, 1, BatchSize::Full);
        let mut rng = stream(3, "train", &[]);
        let mut last = softmax_cross_entropy_grad(&params, &refs).0;
        for _ in 0..10 {
            params = local_train(&params, &data, &cfg, &mut rng);
            let loss = softmax_cross_entropy_grad(&params, &refs).0;
            assert!(
                loss < last,
                "loss must strictly decrease ({loss} vs {last})"
            );
            last = loss;
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data = toy_batch();
        let start = ParamVector::zeros(param_dim(3, 4));
        let cfg = TrainConfig::new(0.1, 5, BatchSize::Size(2));
        let a = local_train(&start, &data, &cfg, &mut stream(9, "t", &[1]));
        let b = local_train(&start, &data, &cfg, &mut stream(9, "t", &[1]));
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "empty batch")]
    fn empty_batch_panics() {
        let params = ParamVector::zeros(param_dim(2, 1));
        let _ = softmax_cross_entropy_grad(&params, &[]);
    }
}
