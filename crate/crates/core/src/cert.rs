//! Ex-post hardening and certified-radius computation.
//!
//! Training side: per-round norm clipping against a linear threshold
//! schedule plus Gaussian perturbation (skipped in the final round).
//! Test side: Monte-Carlo smoothing of the final model, Hoeffding-bounded
//! class probabilities, and the certified radius with its model-level
//! aggregate.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{predict_class, Sample};
use crate::normal::std_normal_cdf;
use crate::param::ParamVector;

/// Clip threshold at round `t`.
pub fn rho_schedule(t: usize) -> f64 {
    0.025 * t as f64 + 2.0
}

/// Ex-post stage settings applied to the global model every round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExPostConfig {
    /// Noise standard deviation (constant schedule).
    pub sigma: f64,
    /// Multiplier on the clip threshold schedule.
    pub rho_scale: f64,
    /// Disables clipping entirely when false.
    pub clip: bool,
}

impl Default for ExPostConfig {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            rho_scale: 1.0,
            clip: true,
        }
    }
}

impl ExPostConfig {
    pub fn rho(&self, t: usize) -> f64 {
        self.rho_scale * rho_schedule(t)
    }

    pub fn sigma_at(&self, _t: usize) -> f64 {
        self.sigma
    }
}

/// Clips the global model to the round's threshold and, on every round but
/// the last, adds coordinate-wise Gaussian noise from `rng`.
pub fn clip_and_perturb(
    theta: &ParamVector,
    t: usize,
    total_rounds: usize,
    cfg: &ExPostConfig,
    rng: &mut ChaCha8Rng,
) -> ParamVector {
    let mut out = theta.clone();
    if cfg.clip {
        let rho = cfg.rho(t);
        let norm = out.norm();
        if norm > rho {
            out = out.scaled(rho / norm);
        }
    }
    let sigma = cfg.sigma_at(t);
    if t < total_rounds && sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).unwrap();
        for v in out.as_mut_slice() {
            *v += noise.sample(rng);
        }
    }
    out
}

/// Monte-Carlo smoothing result for one test sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedPrediction {
    /// Votes per class; sums to the number of noisy models.
    pub counts: Vec<usize>,
    /// Top class, ties to the lower index.
    pub c_a: usize,
    /// Runner-up class, ties to the lower index.
    pub c_b: usize,
    pub p_a_hat: f64,
    pub p_b_hat: f64,
}

/// Draws `m` noisy copies of the model, one coordinate stream in index
/// order, so the set of smoothed models is deterministic per seed.
pub fn draw_smoothed_models(
    theta: &ParamVector,
    m: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<ParamVector> {
    assert!(m >= 2, "smoothing needs at least 2 samples");
    if sigma == 0.0 {
        return vec![theta.clone(); m];
    }
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..m)
        .map(|_| {
            let mut copy = theta.clone();
            for v in copy.as_mut_slice() {
                *v += noise.sample(rng);
            }
            copy
        })
        .collect()
}

/// Counts the votes of pre-drawn smoothed models on one sample.
pub fn smoothed_counts(
    models: &[ParamVector],
    features: &[f64],
    num_classes: usize,
) -> SmoothedPrediction {
    let mut counts = vec![0usize; num_classes];
    for model in models {
        counts[predict_class(model, features)] += 1;
    }
    let (c_a, c_b) = top_two(&counts);
    let m = models.len() as f64;
    SmoothedPrediction {
        p_a_hat: counts[c_a] as f64 / m,
        p_b_hat: counts[c_b] as f64 / m,
        counts,
        c_a,
        c_b,
    }
}

/// Smooths the model on a single sample with its own noise stream.
pub fn smooth_predict(
    theta: &ParamVector,
    features: &[f64],
    num_classes: usize,
    m: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> SmoothedPrediction {
    let models = draw_smoothed_models(theta, m, sigma, rng);
    smoothed_counts(&models, features, num_classes)
}

/// Top-two vote-count classes; both tie-break toward the lower index.
fn top_two(counts: &[usize]) -> (usize, usize) {
    assert!(counts.len() >= 2);
    let mut a = 0;
    for (c, &v) in counts.iter().enumerate().skip(1) {
        if v > counts[a] {
            a = c;
        }
    }
    let mut b = usize::MAX;
    for (c, &v) in counts.iter().enumerate() {
        if c != a && (b == usize::MAX || v > counts[b]) {
            b = c;
        }
    }
    (a, b)
}

/// One-sided Hoeffding corrections on the vote frequencies, clamped to
/// `[0, 1]`.
pub fn hoeffding_bounds(p_a_hat: f64, p_b_hat: f64, m: usize, eps_alpha: f64) -> (f64, f64) {
    assert!(m >= 1);
    assert!(eps_alpha > 0.0 && eps_alpha <= 1.0);
    let correction = ((1.0 / eps_alpha).ln() / (2.0 * m as f64)).sqrt();
    (
        (p_a_hat - correction).clamp(0.0, 1.0),
        (p_b_hat + correction).clamp(0.0, 1.0),
    )
}

/// Per-attacker quantities entering the radius denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackerTerm {
    pub scale_factor: f64,
    pub learning_rate: f64,
    pub local_iterations: f64,
    pub poison_fraction: f64,
    /// The attacker's final aggregation weight `v_i / sum(v)`.
    pub weight: f64,
}

impl AttackerTerm {
    fn squared_product(&self) -> f64 {
        let p = self.scale_factor
            * self.learning_rate
            * self.local_iterations
            * self.poison_fraction
            * self.weight;
        p * p
    }
}

/// Everything the radius formula needs besides the probability bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct CertConfig {
    pub expost: ExPostConfig,
    /// Monte-Carlo sample count.
    pub mc_samples: usize,
    /// Hoeffding tolerance.
    pub eps_alpha: f64,
    /// Smoothness constant in the denominator.
    pub l_z: f64,
    pub attackers: Vec<AttackerTerm>,
    pub adversarial_round: usize,
    pub total_rounds: usize,
}

/// Certified radius of one test sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    /// The probability bounds overlap; nothing is certified.
    Abstain,
    Finite(f64),
    /// The bound diverges (`p_A = 1, p_B = 0` or a zero denominator).
    Infinite,
}

impl Radius {
    /// Value used when comparing against a certification threshold:
    /// abstention certifies nothing, infinity certifies everything.
    pub fn threshold_value(&self) -> f64 {
        match self {
            Radius::Abstain => 0.0,
            Radius::Finite(r) => *r,
            Radius::Infinite => f64::INFINITY,
        }
    }
}

/// Certified radius from bounded probabilities.
///
/// Abstains when the lower bound on the top class does not clear the upper
/// bound on the runner-up. Diverges to the infinite sentinel when the
/// separation is total or the attacker terms vanish.
pub fn certified_radius(p_a_lower: f64, p_b_upper: f64, cfg: &CertConfig) -> Result<Radius> {
    if cfg.attackers.is_empty() {
        return Err(Error::NoAttackers);
    }
    if p_a_lower <= p_b_upper {
        return Ok(Radius::Abstain);
    }
    let gap = (p_a_lower.sqrt() - p_b_upper.sqrt()).powi(2);
    let log_arg = 1.0 - gap;
    let sigma_ta = cfg.expost.sigma_at(cfg.adversarial_round);
    let numerator = -log_arg.ln() * sigma_ta * sigma_ta;
    if log_arg <= 0.0 {
        return Ok(Radius::Infinite);
    }

    let attacker_sum: f64 = cfg
        .attackers
        .iter()
        .map(AttackerTerm::squared_product)
        .sum();
    let mut phi_product = 1.0;
    for t in cfg.adversarial_round..=cfg.total_rounds {
        phi_product *= 2.0 * std_normal_cdf(cfg.expost.rho(t) / cfg.expost.sigma_at(t)) - 1.0;
    }
    let r = cfg.attackers.len() as f64;
    let denominator = 2.0 * r * cfg.l_z * cfg.l_z * attacker_sum * phi_product;
    if denominator <= 0.0 {
        return Ok(Radius::Infinite);
    }
    Ok(Radius::Finite((numerator / denominator).sqrt()))
}

/// Model-level certified radius: the maximum over per-sample radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelRadius {
    /// Every sample abstained; reported as radius 0 with no log form.
    AllAbstain,
    Finite(f64),
    Infinite,
}

impl ModelRadius {
    /// The raw model radius (0 when everything abstained).
    pub fn prime_value(&self) -> f64 {
        match self {
            ModelRadius::AllAbstain => 0.0,
            ModelRadius::Finite(r) => *r,
            ModelRadius::Infinite => f64::INFINITY,
        }
    }

    /// Base-10 log of the radius; `None` when undefined (all abstained).
    pub fn log10(&self) -> Option<f64> {
        match self {
            ModelRadius::AllAbstain => None,
            ModelRadius::Finite(r) => Some(r.log10()),
            ModelRadius::Infinite => Some(f64::INFINITY),
        }
    }

    /// Largest finite per-sample radius, used to cap certification grids.
    pub fn grid_cap(radii: &[Radius]) -> Option<f64> {
        radii
            .iter()
            .filter_map(|r| match r {
                Radius::Finite(v) => Some(*v),
                _ => None,
            })
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Reduces per-sample radii to the model-level radius.
pub fn model_radius(radii: &[Radius]) -> ModelRadius {
    if radii.iter().any(|r| matches!(r, Radius::Infinite)) {
        return ModelRadius::Infinite;
    }
    match ModelRadius::grid_cap(radii) {
        Some(max) => ModelRadius::Finite(max),
        None => ModelRadius::AllAbstain,
    }
}

/// Certification record for one test sample.
#[derive(Clone, Debug)]
pub struct SampleCert {
    pub c_a: usize,
    pub c_b: usize,
    pub p_a_hat: f64,
    pub p_b_hat: f64,
    pub p_a_lower: f64,
    pub p_b_upper: f64,
    pub radius: Radius,
}

/// Smoothed predictions plus radii over a whole test set.
#[derive(Clone, Debug)]
pub struct RadiusReport {
    pub samples: Vec<SampleCert>,
    pub model: ModelRadius,
}

impl RadiusReport {
    pub fn radii(&self) -> Vec<Radius> {
        self.samples.iter().map(|s| s.radius).collect()
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.c_a).collect()
    }
}

/// Smooths the final model once and certifies every test sample against
/// the shared noisy-model ensemble.
pub fn certify_test_set(
    theta: &ParamVector,
    test: &Dataset,
    cfg: &CertConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RadiusReport> {
    let models = draw_smoothed_models(
        theta,
        cfg.mc_samples,
        cfg.expost.sigma_at(cfg.total_rounds),
        rng,
    );
    let mut samples = Vec::with_capacity(test.len());
    for Sample { features, .. } in &test.samples {
        let pred = smoothed_counts(&models, features, test.num_classes);
        let (p_a_lower, p_b_upper) =
            hoeffding_bounds(pred.p_a_hat, pred.p_b_hat, cfg.mc_samples, cfg.eps_alpha);
        let radius = certified_radius(p_a_lower, p_b_upper, cfg)?;
        samples.push(SampleCert {
            c_a: pred.c_a,
            c_b: pred.c_b,
            p_a_hat: pred.p_a_hat,
            p_b_hat: pred.p_b_hat,
            p_a_lower,
            p_b_upper,
            radius,
        });
    }
    let model = model_radius(&samples.iter().map(|s| s.radius).collect::<Vec<_>>());
    Ok(RadiusReport { samples, model })
}
