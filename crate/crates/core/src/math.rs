//! Scalar numeric building blocks: stable log-domain primitives, compensated
//! summation and empirical quantiles.
//!
//! Everything here is pure and allocation-free; the EM and Laplace code paths
//! call these in tight loops over millions of scores.

pub const LOG_2PI: f64 = 1.8378770664093453;

/// log(exp(a) + exp(b)) without overflow.
#[inline(always)]
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log(sum(exp(xs))) over a slice, stabilized by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - m).exp());
    }
    m + acc.sum().ln()
}

/// ln(1 + exp(x)) without overflow for large |x|.
#[inline(always)]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function 1 / (1 + exp(-x)), stable at both tails.
#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(p / (1 - p)) for p in (0, 1).
#[inline(always)]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-density of N(mean, var) at x. `var` must be positive.
#[inline(always)]
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -0.5 * (LOG_2PI + var.ln() + z * z / var)
}

/// Density of N(mean, var) at x; thin wrapper over the log form so the two
/// can never disagree.
#[inline(always)]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    ln_normal_pdf(x, mean, var).exp()
}

/// Standard normal CDF via the error function.
#[inline(always)]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Neumaier-compensated accumulator. Total log-likelihoods over 10^6 scores
/// must be reproducible to ~1e-9 absolute for the monotone-EM checks, which
/// naive summation cannot guarantee.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    s: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self { s: 0.0, c: 0.0 }
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline(always)]
    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

/// Arithmetic mean (compensated).
pub fn mean(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.sum() / xs.len() as f64
}

/// Population (divide-by-N) variance, two-pass for accuracy.
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        let d = x - m;
        acc.add(d * d);
    }
    acc.sum() / xs.len() as f64
}

/// Linear-interpolation quantile (the common "type 7" rule) of a sorted
/// slice, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp2_matches_naive_at_moderate_magnitudes() {
        let cases = [(0.5, 2.0), (-3.0, -4.5), (10.0, 9.0), (0.0, 0.0)];
        for (a, b) in cases {
            let naive = (f64::exp(a) + f64::exp(b)).ln();
            assert!((log_sum_exp2(a, b) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp2_survives_overflow_range() {
        let r = log_sum_exp2(1000.0, 998.0);
        let expected = 1000.0 + (1.0 + (-2.0f64).exp()).ln();
        assert!((r - expected).abs() < 1e-12);
        assert_eq!(
            log_sum_exp2(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
        assert!((log_sum_exp2(f64::NEG_INFINITY, 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_slice_agrees_with_pairwise() {
        let xs = [0.1, -2.0, 3.5, 1.0];
        let mut acc = f64::NEG_INFINITY;
        for &x in &xs {
            acc = log_sum_exp2(acc, x);
        }
        assert!((log_sum_exp(&xs) - acc).abs() < 1e-12);
    }

    #[test]
    fn std_normal_density_at_zero() {
        // 1/sqrt(2*pi) to full double precision.
        assert!((normal_pdf(0.0, 0.0, 1.0) - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_matches_independent_reference() {
        // Frozen from a 30-digit evaluation of (1 + erf(x/sqrt(2)))/2.
        let cases = [
            (0.0, 0.5),
            (-1.0, 0.15865525393145707),
            (-2.1, 0.017864420562816557),
            (-2.75, 0.0029797632350545568),
            (1.0, 1.0 - 0.15865525393145707),
        ];
        for (x, expected) in cases {
            assert!(
                (normal_cdf(x) - expected).abs() < 1e-14,
                "cdf({x}) = {} vs {expected}",
                normal_cdf(x)
            );
        }
    }

    #[test]
    fn sigmoid_logit_round_trip_and_tails() {
        for &p in &[1e-12, 1e-4, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(-745.0) - (-745.0f64).exp()).abs() < 1e-300);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn kahan_recovers_cancellation_that_breaks_naive_sum() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        let naive: f64 = xs.iter().sum();
        let mut acc = KahanSum::new();
        for &x in &xs {
            acc.add(x);
        }
        assert_eq!(acc.sum(), 2.0);
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn quantile_hand_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&xs, 0.25) - 1.75).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn mean_variance_hand_cases() {
        assert!((mean(&[1.0, 3.0]) - 2.0).abs() < 1e-15);
        assert!((population_variance(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(population_variance(&[5.0]), 0.0);
    }
}
