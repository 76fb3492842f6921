//! Score calibration from unlabeled trial scores.
//!
//! A recognizer emits a real-valued score per trial; making cost-effective
//! accept/reject decisions requires mapping scores to log-likelihood-ratios.
//! This crate learns that mapping without labels by fitting a 2-component
//! shared-variance Gaussian mixture to a score collection, quantifies the
//! parameter uncertainty with a Laplace approximation, exposes both the
//! plug-in (point-estimate) and predictive (posterior-averaged) calibration
//! maps, and evaluates calibration quality with normalized Bayes error-rates.
//!
//! Module map:
//! - [`scores`]: score collections and file I/O
//! - [`calibration`]: the two-Gaussian score model, affine calibration,
//!   accuracy summaries, supervised ML fitting
//! - [`em`]: unsupervised and constrained EM fitting of the mixture
//! - [`laplace`]: posterior mode polish, Hessian, Gaussian posterior,
//!   error bars
//! - [`predictive`]: posterior-averaged LLR, quadrature, KL diagnostics
//! - [`dcf`]: normalized/minimum detection cost and empirical EER
//! - [`surface`]: profile-likelihood exploration over (d', logit pi1)
//! - [`synth`]: seeded synthetic score generation for validation

pub mod calibration;
pub mod dcf;
pub mod em;
pub mod laplace;
pub mod math;
pub mod numdiff;
pub mod optim;
pub mod predictive;
pub mod quadrature;
pub mod scores;
pub mod surface;
pub mod synth;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("optimization failed: {0}")]
    OptimFailed(String),

    #[error("laplace approximation failed: {0}")]
    Laplace(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
