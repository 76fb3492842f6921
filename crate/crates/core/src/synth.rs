//! Seeded synthetic score generation from known mixture parameters.
//!
//! This is the ground truth used throughout the test suites in place of
//! proprietary evaluation corpora. Reproducibility is part of the contract:
//! the stream is ChaCha12 keyed by `seed`, and each trial consumes exactly
//! two draws in order — one uniform in [0,1) to pick the label
//! (target iff u < pi1), then one standard normal (rand_distr's ziggurat)
//! scaled to N(mu_label, sigma^2). Identical specs produce bit-identical
//! output.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::calibration::GmmParams;
use crate::scores::{Label, LabeledScoreSet, ScoreSet};
use crate::{Error, Result};

/// Generator settings: truth parameters, trial count, RNG seed.
///
/// `pi1` may sit at the closed endpoints 0 and 1 (single-component data),
/// unlike a fitted mixture whose weight is strictly interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub pi1: f64,
    pub count: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(mu1: f64, mu2: f64, sigma: f64, pi1: f64, count: usize, seed: u64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite() && sigma.is_finite() && pi1.is_finite()) {
            return Err(Error::InvalidParams("non-finite generator parameter".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidParams(format!("sigma = {sigma} must be > 0")));
        }
        if !(0.0..=1.0).contains(&pi1) {
            return Err(Error::InvalidParams(format!("pi1 = {pi1} must lie in [0, 1]")));
        }
        if count == 0 {
            return Err(Error::InvalidParams("count must be positive".into()));
        }
        Ok(Self {
            mu1,
            mu2,
            sigma,
            pi1,
            count,
            seed,
        })
    }

    pub fn from_params(truth: &GmmParams, count: usize, seed: u64) -> Result<Self> {
        Self::new(
            truth.mu1(),
            truth.mu2(),
            truth.sigma2().sqrt(),
            truth.pi1(),
            count,
            seed,
        )
    }
}

/// Draw `spec.count` labeled trials. Labels are retained so the same data
/// serves the supervised path directly and the unsupervised path via
/// [`LabeledScoreSet::drop_labels`].
pub fn generate(spec: &SynthSpec) -> LabeledScoreSet {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut scores = Vec::with_capacity(spec.count);
    let mut labels = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let u: f64 = rng.random();
        let label = if u < spec.pi1 {
            Label::Target
        } else {
            Label::NonTarget
        };
        let mu = match label {
            Label::Target => spec.mu1,
            Label::NonTarget => spec.mu2,
        };
        let z: f64 = rng.sample(StandardNormal);
        scores.push(mu + spec.sigma * z);
        labels.push(label);
    }
    LabeledScoreSet::new(scores, labels).expect("generated scores are finite and non-empty")
}

/// Forget the labels, keeping order (free-function form of
/// [`LabeledScoreSet::drop_labels`]).
pub fn drop_labels(d: &LabeledScoreSet) -> ScoreSet {
    d.drop_labels()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn identical_spec_is_bit_identical() {
        let spec = SynthSpec::new(2.0, -2.0, 1.5, 0.3, 5000, 7).unwrap();
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a, b);
        for (x, y) in a.scores().iter().zip(b.scores()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let other = SynthSpec::new(2.0, -2.0, 1.5, 0.3, 5000, 8).unwrap();
        assert_ne!(generate(&other), a);
    }

    #[test]
    fn pi1_one_yields_only_targets_with_the_right_mean() {
        let t = 20_000usize;
        let spec = SynthSpec::new(3.0, -100.0, 2.0, 1.0, t, 3).unwrap();
        let data = generate(&spec);
        assert_eq!(data.target_count(), t);
        let m = math::mean(data.scores());
        assert!((m - 3.0).abs() < 4.0 * 2.0 / (t as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn target_fraction_matches_binomial_bound() {
        // sqrt(p(1-p)/T) ~ 2e-4 at p = 0.04, T = 1e6; 0.001 is a 5-sigma bound.
        let t = 1_000_000usize;
        let spec = SynthSpec::new(2.0, -2.0, 1.0, 0.04, t, 99).unwrap();
        let data = generate(&spec);
        let frac = data.target_count() as f64 / t as f64;
        assert!((frac - 0.04).abs() < 0.001, "target fraction {frac}");
    }

    #[test]
    fn per_class_moments_within_five_standard_errors() {
        let spec = SynthSpec::new(45.9, -168.7, 48.8, 0.034, 100_000, 17).unwrap();
        let data = generate(&spec);
        for (label, mu) in [
            (Label::Target, 45.9),
            (Label::NonTarget, -168.7),
        ] {
            let class = data.class_scores(label);
            let n = class.len() as f64;
            let m = math::mean(&class);
            let v = math::population_variance(&class);
            assert!((m - mu).abs() < 5.0 * 48.8 / n.sqrt(), "{label} mean {m}");
            let sigma2 = 48.8 * 48.8;
            assert!(
                (v - sigma2).abs() < 5.0 * sigma2 * (2.0 / n).sqrt(),
                "{label} var {v}"
            );
        }
    }

    #[test]
    fn drop_labels_preserves_scores_and_order() {
        let spec = SynthSpec::new(1.0, -1.0, 1.0, 0.5, 100, 5).unwrap();
        let labeled = generate(&spec);
        let plain = drop_labels(&labeled);
        assert_eq!(plain.len(), labeled.len());
        assert_eq!(plain.scores(), labeled.scores());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SynthSpec::new(1.0, -1.0, 0.0, 0.5, 10, 1).is_err());
        assert!(SynthSpec::new(1.0, -1.0, 1.0, -0.1, 10, 1).is_err());
        assert!(SynthSpec::new(1.0, -1.0, 1.0, 1.1, 10, 1).is_err());
        assert!(SynthSpec::new(1.0, -1.0, 1.0, 0.5, 0, 1).is_err());
        assert!(SynthSpec::new(f64::NAN, -1.0, 1.0, 0.5, 10, 1).is_err());
    }
}
