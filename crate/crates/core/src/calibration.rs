//! The two-Gaussian score model and the affine score-to-LLR calibration it
//! induces.
//!
//! A score s is modeled per class as N(s | mu_i, sigma2) with a shared
//! within-class variance. The log-likelihood-ratio of such a pair of
//! densities is affine in s, which is the calibration map applied at test
//! time. Class separation d' = (mu1 - mu2)/sigma summarizes accuracy, with
//! theoretical EER = Phi(-d'/2).

use serde::{Deserialize, Serialize};

use crate::math::{self, KahanSum};
use crate::scores::{Label, LabeledScoreSet};
use crate::{Error, Result};

/// Class-conditional model: target mean, non-target mean, shared variance.
///
/// The label-swap convention `mu1 > mu2` is enforced at construction; every
/// downstream consumer may rely on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalParams {
    mu1: f64,
    mu2: f64,
    sigma2: f64,
}

impl CalParams {
    pub fn new(mu1: f64, mu2: f64, sigma2: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite() && sigma2.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if sigma2 <= 0.0 {
            return Err(Error::InvalidParams(format!("sigma2 = {sigma2} must be > 0")));
        }
        if mu1 <= mu2 {
            return Err(Error::InvalidParams(format!(
                "mu1 = {mu1} must exceed mu2 = {mu2} (target scores are larger by convention)"
            )));
        }
        Ok(Self { mu1, mu2, sigma2 })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn class_mean(&self, label: Label) -> f64 {
        match label {
            Label::Target => self.mu1,
            Label::NonTarget => self.mu2,
        }
    }
}

/// Full mixture model: class-conditional parameters plus target proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmParamsJson", into = "GmmParamsJson")]
pub struct GmmParams {
    cal: CalParams,
    pi1: f64,
}

impl GmmParams {
    pub fn new(cal: CalParams, pi1: f64) -> Result<Self> {
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "pi1 = {pi1} must lie strictly inside (0, 1)"
            )));
        }
        Ok(Self { cal, pi1 })
    }

    pub fn from_values(mu1: f64, mu2: f64, sigma2: f64, pi1: f64) -> Result<Self> {
        Self::new(CalParams::new(mu1, mu2, sigma2)?, pi1)
    }

    pub fn cal(&self) -> CalParams {
        self.cal
    }

    pub fn mu1(&self) -> f64 {
        self.cal.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.cal.mu2
    }

    pub fn sigma2(&self) -> f64 {
        self.cal.sigma2
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }
}

#[derive(Serialize, Deserialize)]
struct GmmParamsJson {
    mu1: f64,
    mu2: f64,
    sigma2: f64,
    pi1: f64,
}

impl TryFrom<GmmParamsJson> for GmmParams {
    type Error = Error;
    fn try_from(j: GmmParamsJson) -> Result<Self> {
        GmmParams::from_values(j.mu1, j.mu2, j.sigma2, j.pi1)
    }
}

impl From<GmmParams> for GmmParamsJson {
    fn from(p: GmmParams) -> Self {
        GmmParamsJson {
            mu1: p.mu1(),
            mu2: p.mu2(),
            sigma2: p.sigma2(),
            pi1: p.pi1(),
        }
    }
}

/// The affine calibration map s -> scale * s + offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCal {
    pub scale: f64,
    pub offset: f64,
}

impl AffineCal {
    pub fn apply(&self, s: f64) -> f64 {
        self.scale * s + self.offset
    }
}

/// Class-conditional density N(s | mu_i, sigma2).
pub fn class_likelihood(s: f64, label: Label, c: &CalParams) -> f64 {
    math::normal_pdf(s, c.class_mean(label), c.sigma2)
}

/// Log-domain class-conditional density; the linear form above is a wrapper
/// over this.
pub fn log_class_likelihood(s: f64, label: Label, c: &CalParams) -> f64 {
    math::ln_normal_pdf(s, c.class_mean(label), c.sigma2)
}

/// The affine LLR map induced by `c`: scale = (mu1 - mu2)/sigma2,
/// offset = (mu2^2 - mu1^2)/(2 sigma2).
pub fn to_affine(c: &CalParams) -> AffineCal {
    AffineCal {
        scale: (c.mu1 - c.mu2) / c.sigma2,
        offset: (c.mu2 * c.mu2 - c.mu1 * c.mu1) / (2.0 * c.sigma2),
    }
}

/// Point-estimate log-likelihood-ratio of score `s` under `c`.
pub fn plugin_llr(s: f64, c: &CalParams) -> f64 {
    to_affine(c).apply(s)
}

/// Class separation (mu1 - mu2)/sigma; positive by the mu1 > mu2 convention.
pub fn d_prime(c: &CalParams) -> f64 {
    (c.mu1 - c.mu2) / c.sigma()
}

/// Theoretical equal-error-rate for a given separation: Phi(-d'/2).
/// At complete overlap (d' = 0) this is 0.5 and it decreases strictly in d'.
pub fn eer_from_d_prime(d: f64) -> f64 {
    math::normal_cdf(-d / 2.0)
}

/// Theoretical equal-error-rate of the model `c`.
pub fn theoretical_eer(c: &CalParams) -> f64 {
    eer_from_d_prime(d_prime(c))
}

/// Raw weighted maximum-likelihood estimates for the shared-variance
/// two-component model, given per-score target responsibilities in [0, 1].
///
/// No ordering, flooring or clipping is applied here: both the supervised
/// fit and the EM M-step funnel through this single accumulation so that
/// hard 0/1 responsibilities reproduce the supervised estimates bit-exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeightedMl {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub pi1: f64,
    /// Effective target count (sum of responsibilities).
    pub n1: f64,
    /// Effective non-target count.
    pub n2: f64,
}

pub(crate) fn weighted_ml(scores: &[f64], resp: &[f64]) -> WeightedMl {
    debug_assert_eq!(scores.len(), resp.len());
    let t = scores.len() as f64;
    let mut sum_r = KahanSum::new();
    let mut sum_rs = KahanSum::new();
    let mut sum_rs2 = KahanSum::new();
    let mut sum_s = KahanSum::new();
    let mut sum_s2 = KahanSum::new();
    for (&s, &r) in scores.iter().zip(resp) {
        sum_r.add(r);
        sum_rs.add(r * s);
        sum_rs2.add(r * s * s);
        sum_s.add(s);
        sum_s2.add(s * s);
    }
    let n1 = sum_r.sum();
    let n2 = t - n1;
    let mu1 = sum_rs.sum() / n1;
    let mu2 = (sum_s.sum() - sum_rs.sum()) / n2;
    // sum_t r (s - mu1)^2 + (1 - r)(s - mu2)^2, expanded around the class
    // means (the cross terms vanish at the ML means).
    let sigma2 = (sum_s2.sum() - n1 * mu1 * mu1 - n2 * mu2 * mu2) / t;
    WeightedMl {
        mu1,
        mu2,
        sigma2,
        pi1: n1 / t,
        n1,
        n2,
    }
}

/// Supervised maximum-likelihood fit: per-class sample means, pooled
/// within-class ML variance (divide by T) and empirical target proportion.
pub fn fit_supervised(data: &LabeledScoreSet) -> Result<GmmParams> {
    let n_target = data.target_count();
    let n_non = data.len() - n_target;
    if n_target < 2 || n_non < 2 {
        return Err(Error::InvalidInput(format!(
            "supervised fit needs at least 2 scores per class (got {n_target} targets, {n_non} non-targets)"
        )));
    }
    let resp: Vec<f64> = data
        .labels()
        .iter()
        .map(|l| if *l == Label::Target { 1.0 } else { 0.0 })
        .collect();
    let ml = weighted_ml(data.scores(), &resp);
    if ml.sigma2 <= 0.0 {
        return Err(Error::Degenerate(
            "pooled within-class variance is zero".into(),
        ));
    }
    if ml.mu1 <= ml.mu2 {
        return Err(Error::Degenerate(format!(
            "fitted target mean {} does not exceed non-target mean {}; scores look inverted",
            ml.mu1, ml.mu2
        )));
    }
    GmmParams::from_values(ml.mu1, ml.mu2, ml.sigma2, ml.pi1)
}
