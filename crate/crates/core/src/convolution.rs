//! Convolution of independent surjective IT scores.
//!
//! A sum of `n` independent `Exp(1)` scores is Erlang(n, 1) distributed, so the
//! score of the sum is `s - ln Σ_{i<n} s^i / i!` with `s` the total score.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{RcaError, Result};
use crate::rng::stream_rng;
use crate::special::log_sum_exp;

/// Component scores to be combined. Non-empty, finite, non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionInput {
    scores: Vec<f64>,
}

impl ConvolutionInput {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(RcaError::InvalidInput("convolution needs at least one score".into()));
        }
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(RcaError::InvalidInput(format!(
                "scores must be finite and non-negative, got {bad}"
            )));
        }
        Ok(ConvolutionInput { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// `ln( e^{-s} Σ_{i=0}^{n-1} s^i / i! )`, accumulated in log space.
pub fn ln_erlang_tail(s: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(RcaError::InvalidInput("erlang tail needs n >= 1".into()));
    }
    if !(s >= 0.0) || s.is_infinite() {
        return Err(RcaError::InvalidInput(format!("erlang tail needs finite s >= 0, got {s}")));
    }
    Ok(-s + ln_series(s, n))
}

/// `P{Γ(n, 1) >= s} = e^{-s} Σ_{i=0}^{n-1} s^i / i!`.
pub fn erlang_tail(s: f64, n: usize) -> Result<f64> {
    Ok(ln_erlang_tail(s, n)?.exp())
}

// ln Σ_{i<n} s^i/i!, each term from the previous by the ratio s/i.
fn ln_series(s: f64, n: usize) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let ln_s = s.ln();
    let mut terms = Vec::with_capacity(n);
    let mut term = 0.0;
    terms.push(term);
    for i in 1..n {
        term += ln_s - (i as f64).ln();
        terms.push(term);
    }
    log_sum_exp(&terms)
}

/// IT score of the sum of the component scores.
pub fn convolve_scores(input: &ConvolutionInput) -> f64 {
    let s = input.total();
    let n = input.scores.len();
    // ln_series >= 0 since its first term is 1, so the result lies in [0, s].
    (s - ln_series(s, n)).max(0.0)
}

/// Convenience wrapper over [`ConvolutionInput::new`] + [`convolve_scores`].
pub fn convolve(scores: &[f64]) -> Result<f64> {
    Ok(convolve_scores(&ConvolutionInput::new(scores.to_vec())?))
}

/// Monte-Carlo estimate of a convolved score with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McScore {
    pub score: f64,
    /// Add-one smoothed tail fraction.
    pub tail: f64,
    /// Delta-method standard error of `score`.
    pub stderr: f64,
}

/// Draws `samples` tuples of i.i.d. `Exp(1)` variables and estimates
/// `-ln P{Σ E_j >= Σ scores}` by counting.
pub fn convolution_mc_estimate(scores: &[f64], samples: usize, seed: u64) -> McScore {
    let n = scores.len();
    let total: f64 = scores.iter().sum();
    let mut rng = stream_rng(seed, 0);
    let mut hits = 0usize;
    for _ in 0..samples {
        let sum: f64 = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum();
        if sum >= total {
            hits += 1;
        }
    }
    let tail = (hits + 1) as f64 / (samples + 1) as f64;
    McScore {
        score: -tail.ln(),
        tail,
        stderr: ((1.0 - tail) / (samples.max(1) as f64 * tail)).sqrt(),
    }
}

/// Independent Monte-Carlo check of [`convolve_scores`].
pub fn convolution_mc_oracle(scores: &[f64], samples: usize, seed: u64) -> f64 {
    convolution_mc_estimate(scores, samples, seed).score
}
