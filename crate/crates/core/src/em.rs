//! Unsupervised maximum-likelihood fitting of the 2-component
//! shared-variance mixture, plus the constrained "profile" EM that holds
//! (d', logit pi1) fixed while optimizing location and scale.
//!
//! Everything dealing with the full score vector funnels through a single
//! fused pass that yields the total log-likelihood and the sufficient
//! statistics of the M-step at one exp() per score. Accumulation is
//! compensated so the per-restart log-likelihood sequence is monotone to
//! well below the 1e-8 slack the trace contract allows.

use serde::{Deserialize, Serialize};

use crate::calibration::{self, GmmParams};
use crate::math::{self, KahanSum};
use crate::scores::ScoreSet;
use crate::{Error, Result};

/// Effective-count fraction below which a component is flagged as dying.
const DEGENERACY_FRACTION: f64 = 1e-6;

/// Per-score posterior probability of the target component under a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    values: Vec<f64>,
}

impl Responsibilities {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput(
                "responsibilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// EM driver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Maximum number of parameter updates per restart.
    pub max_iterations: usize,
    /// Absolute per-datum log-likelihood improvement below which a restart
    /// is declared converged.
    pub tolerance: f64,
    /// Variance floor as a fraction of the sample variance of the data.
    pub variance_floor_factor: f64,
    /// Initial target proportions, one restart each.
    pub restart_proportions: Vec<f64>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-9,
            variance_floor_factor: 1e-6,
            restart_proportions: vec![1e-4, 1e-2, 0.1, 0.5],
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || self.tolerance <= 0.0
            || self.variance_floor_factor <= 0.0
            || self.restart_proportions.is_empty()
        {
            return Err(Error::InvalidParams(
                "EM config fields must be positive and at least one restart given".into(),
            ));
        }
        if self
            .restart_proportions
            .iter()
            .any(|p| !(*p > 0.0 && *p < 1.0))
        {
            return Err(Error::InvalidParams(
                "restart proportions must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn restart_count(&self) -> usize {
        self.restart_proportions.len()
    }
}

/// Mixture parameters without the canonical mu1 > mu2 ordering. The EM
/// trajectory is allowed to pass through swapped or coincident components;
/// ordering is repaired only at termination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub pi1: f64,
}

impl RawParams {
    pub(crate) fn from_params(m: &GmmParams) -> Self {
        Self {
            mu1: m.mu1(),
            mu2: m.mu2(),
            sigma2: m.sigma2(),
            pi1: m.pi1(),
        }
    }
}

/// Precomputed per-pass constants. The per-score log-likelihood term is
/// l2 + softplus(g) with g affine in the score, so one exp serves both the
/// responsibility and the likelihood.
struct PassConsts {
    mu2: f64,
    base2: f64,
    half_inv_var: f64,
    g0: f64,
    g1: f64,
}

impl PassConsts {
    fn new(p: &RawParams) -> Self {
        let l = math::logit(p.pi1);
        Self::with_logit(p, l)
    }

    /// `logit_pi1` supplied directly; keeps extreme fixed proportions exact
    /// in the constrained fit.
    fn with_logit(p: &RawParams, logit_pi1: f64) -> Self {
        let scale = (p.mu1 - p.mu2) / p.sigma2;
        let offset = (p.mu2 * p.mu2 - p.mu1 * p.mu1) / (2.0 * p.sigma2);
        PassConsts {
            mu2: p.mu2,
            // ln(1 - pi1) = -softplus(logit pi1)
            base2: -math::softplus(logit_pi1) - 0.5 * (math::LOG_2PI + p.sigma2.ln()),
            half_inv_var: 0.5 / p.sigma2,
            g0: logit_pi1 + offset,
            g1: scale,
        }
    }

    #[inline(always)]
    fn eval(&self, s: f64) -> (f64, f64) {
        let z = s - self.mu2;
        let l2 = self.base2 - z * z * self.half_inv_var;
        let g = self.g0 + self.g1 * s;
        // softplus(g) and sigmoid(g) from the same exp
        if g >= 0.0 {
            let t = (-g).exp();
            (l2 + g + t.ln_1p(), 1.0 / (1.0 + t))
        } else {
            let t = g.exp();
            (l2 + t.ln_1p(), t / (1.0 + t))
        }
    }
}

struct EPass {
    ll: f64,
    sum_r: f64,
    sum_rs: f64,
    sum_rs2: f64,
}

fn e_pass(scores: &[f64], c: &PassConsts) -> EPass {
    let mut ll = KahanSum::new();
    let mut sum_r = KahanSum::new();
    let mut sum_rs = KahanSum::new();
    let mut sum_rs2 = KahanSum::new();
    for &s in scores {
        let (l, r) = c.eval(s);
        ll.add(l);
        sum_r.add(r);
        sum_rs.add(r * s);
        sum_rs2.add(r * s * s);
    }
    EPass {
        ll: ll.sum(),
        sum_r: sum_r.sum(),
        sum_rs: sum_rs.sum(),
        sum_rs2: sum_rs2.sum(),
    }
}

pub(crate) fn ll_pass(scores: &[f64], p: &RawParams) -> f64 {
    let c = PassConsts::new(p);
    let mut ll = KahanSum::new();
    for &s in scores {
        ll.add(c.eval(s).0);
    }
    ll.sum()
}

/// Gradient of the total log-likelihood in the coordinates
/// [mu1, mu2, log sigma2, log pi1].
pub(crate) fn theta_grad_pass(scores: &[f64], p: &RawParams) -> [f64; 4] {
    let c = PassConsts::new(p);
    let inv_var = 1.0 / p.sigma2;
    let mut g_mu1 = KahanSum::new();
    let mut g_mu2 = KahanSum::new();
    let mut g_lv = KahanSum::new();
    let mut g_lp = KahanSum::new();
    let pi_ratio = p.pi1 / (1.0 - p.pi1);
    for &s in scores {
        let (_, r) = c.eval(s);
        let z1 = s - p.mu1;
        let z2 = s - p.mu2;
        g_mu1.add(r * z1 * inv_var);
        g_mu2.add((1.0 - r) * z2 * inv_var);
        g_lv.add((r * z1 * z1 + (1.0 - r) * z2 * z2) * 0.5 * inv_var - 0.5);
        g_lp.add(r - pi_ratio * (1.0 - r));
    }
    [g_mu1.sum(), g_mu2.sum(), g_lv.sum(), g_lp.sum()]
}

/// Total mixture log-likelihood, log-sum-exp stabilized.
pub fn gmm_log_likelihood(s: &ScoreSet, m: &GmmParams) -> f64 {
    ll_pass(s.scores(), &RawParams::from_params(m))
}

/// Posterior target probability per score under `m`.
pub fn e_step(s: &ScoreSet, m: &GmmParams) -> Responsibilities {
    let c = PassConsts::new(&RawParams::from_params(m));
    Responsibilities {
        values: s.scores().iter().map(|&x| c.eval(x).1).collect(),
    }
}

/// Weighted ML estimates updated from responsibilities. The means carry no
/// ordering guarantee (swap repair happens at termination of a fit), so the
/// result is reported as raw values plus a degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepEstimates {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub pi1: f64,
    /// True when a component's effective count fell below 1e-6 of the data.
    pub degenerate: bool,
}

impl MStepEstimates {
    /// Canonical, validated parameters; errors when the estimates violate
    /// the mu1 > mu2 convention or interiority.
    pub fn into_params(self) -> Result<GmmParams> {
        GmmParams::from_values(self.mu1, self.mu2, self.sigma2, self.pi1)
    }
}

fn finalize_m_step(
    stats: &EPass,
    sum_s: f64,
    sum_s2: f64,
    t: usize,
    variance_floor: f64,
) -> MStepEstimates {
    let tf = t as f64;
    let n1 = stats.sum_r;
    let n2 = tf - n1;
    let degenerate = n1 < DEGENERACY_FRACTION * tf || n2 < DEGENERACY_FRACTION * tf;
    let mu1 = stats.sum_rs / n1;
    let mu2 = (sum_s - stats.sum_rs) / n2;
    let sigma2_raw = (sum_s2 - n1 * mu1 * mu1 - n2 * mu2 * mu2) / tf;
    let clip = 1.0 / (10.0 * tf);
    MStepEstimates {
        mu1,
        mu2,
        sigma2: sigma2_raw.max(variance_floor),
        pi1: (n1 / tf).clamp(clip, 1.0 - clip),
        degenerate,
    }
}

/// One M-step from explicit responsibilities. Hard 0/1 responsibilities on
/// well-ordered data reproduce [`calibration::fit_supervised`] bit-exactly.
pub fn m_step(s: &ScoreSet, r: &Responsibilities, cfg: &EmConfig) -> MStepEstimates {
    assert_eq!(s.len(), r.len(), "responsibilities must match scores");
    let ml = calibration::weighted_ml(s.scores(), r.values());
    let floor = cfg.variance_floor_factor * math::population_variance(s.scores());
    let tf = s.len() as f64;
    let clip = 1.0 / (10.0 * tf);
    MStepEstimates {
        mu1: ml.mu1,
        mu2: ml.mu2,
        sigma2: ml.sigma2.max(floor),
        pi1: ml.pi1.clamp(clip, 1.0 - clip),
        degenerate: ml.n1 < DEGENERACY_FRACTION * tf || ml.n2 < DEGENERACY_FRACTION * tf,
    }
}

/// Fit trace: per-iteration log-likelihoods of the winning restart, final
/// parameters, and the terminal log-likelihood of every restart so peak
/// dominance can be audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    pub iterations: Vec<f64>,
    pub final_params: GmmParams,
    pub converged: bool,
    pub restart_index: usize,
    pub restart_final_lls: Vec<f64>,
}

impl EmTrace {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.iterations.last().expect("trace has iterations")
    }

    /// Log-likelihood margin of the chosen mode over the best rival
    /// restart's terminal point; `None` with a single restart.
    pub fn dominance_gap(&self) -> Option<f64> {
        let best_rival = self
            .restart_final_lls
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.restart_index)
            .map(|(_, ll)| *ll)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_rival == f64::NEG_INFINITY {
            None
        } else {
            Some(self.final_log_likelihood() - best_rival)
        }
    }
}

struct RestartRun {
    params: RawParams,
    iterations: Vec<f64>,
    converged: bool,
    degenerate: bool,
}

impl RestartRun {
    fn final_ll(&self) -> f64 {
        *self.iterations.last().expect("at least one iteration")
    }
}

fn run_em(scores: &[f64], init: RawParams, cfg: &EmConfig, floor: f64) -> RestartRun {
    let (sum_s, sum_s2) = {
        let mut a = KahanSum::new();
        let mut b = KahanSum::new();
        for &s in scores {
            a.add(s);
            b.add(s * s);
        }
        (a.sum(), b.sum())
    };
    let tol_total = cfg.tolerance * scores.len() as f64;
    let mut params = init;
    let mut iterations = Vec::new();
    let mut prev_ll = f64::NAN;
    let mut converged = false;
    let mut degenerate = false;
    let mut updates = 0usize;
    loop {
        let stats = e_pass(scores, &PassConsts::new(&params));
        iterations.push(stats.ll);
        if !prev_ll.is_nan() && (stats.ll - prev_ll).abs() < tol_total {
            converged = true;
            break;
        }
        prev_ll = stats.ll;
        if updates >= cfg.max_iterations {
            break;
        }
        let m = finalize_m_step(&stats, sum_s, sum_s2, scores.len(), floor);
        if m.degenerate {
            degenerate = true;
            break; // keep the last healthy parameters
        }
        params = RawParams {
            mu1: m.mu1,
            mu2: m.mu2,
            sigma2: m.sigma2,
            pi1: m.pi1,
        };
        updates += 1;
    }
    RestartRun {
        params,
        iterations,
        converged,
        degenerate,
    }
}

/// Swap components into the canonical mu1 > mu2 order; the mixture is
/// invariant under relabeling so only the naming changes.
fn canonicalize(p: RawParams) -> Result<GmmParams> {
    let (mu1, mu2, pi1) = if p.mu1 > p.mu2 {
        (p.mu1, p.mu2, p.pi1)
    } else if p.mu2 > p.mu1 {
        (p.mu2, p.mu1, 1.0 - p.pi1)
    } else {
        return Err(Error::Degenerate(format!(
            "components collapsed onto a single mean {}",
            p.mu1
        )));
    };
    GmmParams::from_values(mu1, mu2, p.sigma2, pi1)
}

fn default_init(
    pi1_init: f64,
    sorted: &[f64],
    median: f64,
    std: f64,
    var: f64,
) -> RawParams {
    let upper = math::quantile_sorted(sorted, 1.0 - pi1_init);
    RawParams {
        mu1: upper.max(median + 0.5 * std),
        mu2: median,
        sigma2: var / 2.0,
        pi1: pi1_init,
    }
}

/// Unsupervised fit: one EM run per configured restart proportion, keeping
/// the non-degenerate run with the highest final log-likelihood.
pub fn fit_unsupervised(s: &ScoreSet, cfg: &EmConfig) -> Result<EmTrace> {
    cfg.validate()?;
    if s.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "unsupervised fit needs at least 10 scores, got {}",
            s.len()
        )));
    }
    let scores = s.scores();
    let var = math::population_variance(scores);
    if var <= 0.0 {
        return Err(Error::Degenerate("all scores identical".into()));
    }
    let floor = cfg.variance_floor_factor * var;
    let std = var.sqrt();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = math::quantile_sorted(&sorted, 0.5);

    let runs: Vec<RestartRun> = cfg
        .restart_proportions
        .iter()
        .map(|&p| run_em(scores, default_init(p, &sorted, median, std, var), cfg, floor))
        .collect();

    let restart_final_lls: Vec<f64> = runs.iter().map(|r| r.final_ll()).collect();
    let chosen = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.degenerate)
        .max_by(|(_, a), (_, b)| a.final_ll().partial_cmp(&b.final_ll()).unwrap())
        .map(|(i, _)| i);
    let Some(idx) = chosen else {
        return Err(Error::Degenerate(
            "every restart lost a component; the data do not support two components".into(),
        ));
    };
    let run = &runs[idx];
    Ok(EmTrace {
        iterations: run.iterations.clone(),
        final_params: canonicalize(run.params)?,
        converged: run.converged,
        restart_index: idx,
        restart_final_lls,
    })
}

/// Single EM run from explicit initial parameters (no restarts). Useful for
/// fixed-point checks and warm starts.
pub fn fit_from(s: &ScoreSet, init: &GmmParams, cfg: &EmConfig) -> Result<EmTrace> {
    cfg.validate()?;
    if s.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 scores".into()));
    }
    let scores = s.scores();
    let var = math::population_variance(scores);
    if var <= 0.0 {
        return Err(Error::Degenerate("all scores identical".into()));
    }
    let run = run_em(
        scores,
        RawParams::from_params(init),
        cfg,
        cfg.variance_floor_factor * var,
    );
    if run.degenerate {
        return Err(Error::Degenerate("a component's effective count vanished".into()));
    }
    let final_ll = run.final_ll();
    Ok(EmTrace {
        iterations: run.iterations,
        final_params: canonicalize(run.params)?,
        converged: run.converged,
        restart_index: 0,
        restart_final_lls: vec![final_ll],
    })
}

/// Profile fit at fixed (d', logit pi1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedFit {
    pub mu2: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Expected complete-data log-likelihood of the constrained model as a
/// function of (mu2, ln sigma), up to terms constant in them. With
/// mu1 = mu2 + d' * sigma the quadratic-form pieces reduce to sufficient
/// statistics, making each evaluation O(1).
struct ConstrainedQ {
    t: f64,
    d_prime: f64,
    sum_s: f64,
    sum_s2: f64,
    sum_r: f64,
    sum_rs: f64,
    min_sigma2: f64,
}

impl ConstrainedQ {
    fn eval(&self, x: &[f64]) -> f64 {
        let mu2 = x[0];
        let sigma = x[1].exp();
        let sigma2 = sigma * sigma;
        if !sigma2.is_finite() || sigma2 < self.min_sigma2 {
            return -1e300;
        }
        // A = sum (s - mu2)^2, B = sum r (s - mu2)
        let a = self.sum_s2 - 2.0 * mu2 * self.sum_s + self.t * mu2 * mu2;
        let b = self.sum_rs - mu2 * self.sum_r;
        let quad = a - 2.0 * self.d_prime * sigma * b
            + self.d_prime * self.d_prime * sigma2 * self.sum_r;
        -0.5 * self.t * (math::LOG_2PI + sigma2.ln()) - quad / (2.0 * sigma2)
    }
}

/// Maximize the mixture likelihood over location and scale with the class
/// separation and target proportion held fixed. The M-step runs a
/// derivative-free simplex search over (mu2, ln sigma) because the tie
/// mu1 = mu2 + d' * sigma breaks the closed form.
pub fn fit_constrained(
    s: &ScoreSet,
    d_prime: f64,
    logit_pi1: f64,
    cfg: &EmConfig,
) -> Result<ConstrainedFit> {
    cfg.validate()?;
    if s.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "constrained fit needs at least 10 scores, got {}",
            s.len()
        )));
    }
    if !(d_prime >= 0.0) || !logit_pi1.is_finite() {
        return Err(Error::InvalidParams(format!(
            "need d_prime >= 0 (got {d_prime}) and finite logit pi1 (got {logit_pi1})"
        )));
    }
    let scores = s.scores();
    let var = math::population_variance(scores);
    if var <= 0.0 {
        return Err(Error::Degenerate("all scores identical".into()));
    }
    let floor = cfg.variance_floor_factor * var;
    let pi1 = math::sigmoid(logit_pi1);
    let m = math::mean(scores);

    // Moment-matched start: total variance = sigma^2 (1 + pi1 pi2 d'^2).
    let sigma0 = (var / (1.0 + pi1 * (1.0 - pi1) * d_prime * d_prime)).sqrt();
    let attempts = [
        (m - pi1 * d_prime * sigma0, sigma0),
        (m - 0.5 * pi1 * d_prime * sigma0, (2.0 * sigma0).min(var.sqrt())),
    ];

    let mut last_err = None;
    for (mu2_init, sigma_init) in attempts {
        match constrained_em(scores, d_prime, logit_pi1, pi1, mu2_init, sigma_init, floor, cfg) {
            Ok(fit) => return Ok(fit),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::OptimFailed("constrained fit failed".into())))
}

#[allow(clippy::too_many_arguments)]
fn constrained_em(
    scores: &[f64],
    d_prime: f64,
    logit_pi1: f64,
    pi1: f64,
    mu2_init: f64,
    sigma_init: f64,
    floor: f64,
    cfg: &EmConfig,
) -> Result<ConstrainedFit> {
    let (sum_s, sum_s2) = {
        let mut a = KahanSum::new();
        let mut b = KahanSum::new();
        for &x in scores {
            a.add(x);
            b.add(x * x);
        }
        (a.sum(), b.sum())
    };
    let t = scores.len() as f64;
    let tol_total = cfg.tolerance * t;

    let mut mu2 = mu2_init;
    let mut sigma = sigma_init.max(floor.sqrt());
    let mut prev_ll = f64::NAN;
    let mut ll = f64::NAN;
    let mut converged = false;
    let mut iterations = 0usize;

    while iterations <= cfg.max_iterations {
        let raw = RawParams {
            mu1: mu2 + d_prime * sigma,
            mu2,
            sigma2: sigma * sigma,
            pi1,
        };
        let stats = e_pass(scores, &PassConsts::with_logit(&raw, logit_pi1));
        ll = stats.ll;
        if !ll.is_finite() {
            return Err(Error::OptimFailed(format!(
                "non-finite likelihood at mu2={mu2}, sigma={sigma}"
            )));
        }
        if !prev_ll.is_nan() && (ll - prev_ll).abs() < tol_total {
            converged = true;
            break;
        }
        prev_ll = ll;
        if iterations == cfg.max_iterations {
            break;
        }

        let q = ConstrainedQ {
            t,
            d_prime,
            sum_s,
            sum_s2,
            sum_r: stats.sum_r,
            sum_rs: stats.sum_rs,
            min_sigma2: floor,
        };
        let start = [mu2, sigma.ln()];
        let steps = [0.1 * sigma, 0.05];
        let best = crate::optim::nelder_mead_max(|x| q.eval(x), &start, &steps, 1e-10, 400);
        mu2 = best.x[0];
        sigma = best.x[1].exp().max(floor.sqrt());
        iterations += 1;
    }

    Ok(ConstrainedFit {
        mu2,
        sigma,
        log_likelihood: ll,
        converged,
        iterations,
    })
}
