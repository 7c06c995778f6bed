//! Shapley attribution of a target node's outlier score to the noise terms of
//! its ancestors.
//!
//! The game's value of a set `T` of noise terms is
//! `v(T) = ln P{f(X_n) >= f(x_n) | N_T = n_T}`, estimated by Monte Carlo with
//! the remaining noise drawn from its model. `v(U) = 0` for the full relevant
//! set and `v(∅) = -S(x_n)`, so the contributions telescope to the target's
//! score. Every subset is estimated once from the same seed (common random
//! numbers) and reused by all orderings.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal_model::{Fcm, Observation};
use crate::error::{RcaError, Result};
use crate::rng::{stream, stream_rng};
use crate::scores::{FeatureKind, FittedScore};

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_EXACT_LIMIT: usize = 12;
pub const MIN_MC_SAMPLES: usize = 100;
/// Subsets are tracked as bitmasks in permutation mode.
const MAX_PERMUTATION_PLAYERS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapleyMode {
    /// Every subset of the relevant nodes.
    ExactSubsets,
    /// Average over random orderings.
    PermutationSampling { num_permutations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionConfig {
    pub mc_samples: usize,
    pub mode: ShapleyMode,
    pub exact_limit: usize,
    pub seed: u64,
    pub target_feature: FeatureKind,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            mc_samples: DEFAULT_MC_SAMPLES,
            mode: ShapleyMode::ExactSubsets,
            exact_limit: DEFAULT_EXACT_LIMIT,
            seed: 0,
            target_feature: FeatureKind::RightTail,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(RcaError::InvalidInput(format!(
                "mc_samples must be at least {MIN_MC_SAMPLES}, got {}",
                self.mc_samples
            )));
        }
        if let ShapleyMode::PermutationSampling { num_permutations: 0 } = self.mode {
            return Err(RcaError::InvalidInput("num_permutations must be at least 1".into()));
        }
        if self.target_feature.arity() != 1 {
            return Err(RcaError::InvalidInput("target feature must take a single value".into()));
        }
        self.target_feature.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionDiagnostics {
    /// Feature value of the observed target; the tail event is `f(X_n) >= threshold`.
    pub threshold: f64,
    pub mc_samples: usize,
    pub mode: ShapleyMode,
    pub seed: u64,
    /// Target plus its ancestors, in node order.
    pub relevant_nodes: Vec<String>,
    /// Log tail probability per evaluated subset, keyed by [`subset_id`].
    pub subset_estimates: BTreeMap<String, f64>,
    /// Delta-method standard error of each subset estimate.
    pub mc_stderr: BTreeMap<String, f64>,
    /// Target score against the fitted marginal data instead of the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_quantile_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub target: String,
    pub target_score: f64,
    /// One entry per node of the graph; nodes that are not ancestors of the
    /// target get exactly 0.
    pub contributions: BTreeMap<String, f64>,
    /// `target_score - Σ contributions`.
    pub residual: f64,
    pub diagnostics: AttributionDiagnostics,
}

impl AttributionReport {
    /// Contributions sorted by decreasing value, ties by name.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self.contributions.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }
}

/// Stable identifier of a node subset: `{A,B}` in node order.
pub fn subset_id(fcm: &Fcm, subset: &[bool]) -> String {
    let names: Vec<&str> = subset
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(j, _)| fcm.dag().name(j))
        .collect();
    format!("{{{}}}", names.join(","))
}

/// Threshold `f(x_n)` and the model-based target score `-v(∅)`.
pub fn target_threshold(fcm: &Fcm, target: &str, obs: &Observation, cfg: &AttributionConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let t = fcm.dag().node(target)?;
    let threshold = cfg.target_feature.eval(obs.get(t))?;
    let noise = fcm.recover_noise(obs);
    let empty = vec![false; fcm.dag().len()];
    let (log_tail, _) = estimate(fcm, t, threshold, &noise, &empty, &relevant_mask(fcm, t), cfg)?;
    Ok((threshold, 0.0 - log_tail))
}

/// `ln P{f(X_target) >= threshold | N_j = noise[j] for j in subset}`.
///
/// Returns exactly 0 when `subset` covers the target and all its ancestors.
pub fn log_tail_given_subset(
    fcm: &Fcm,
    target: &str,
    threshold: f64,
    noise: &[f64],
    subset: &[bool],
    cfg: &AttributionConfig,
) -> Result<f64> {
    cfg.validate()?;
    let t = fcm.dag().node(target)?;
    let n = fcm.dag().len();
    if noise.len() != n || subset.len() != n {
        return Err(RcaError::InvalidInput(format!("noise and subset need {n} entries")));
    }
    Ok(estimate(fcm, t, threshold, noise, subset, &relevant_mask(fcm, t), cfg)?.0)
}

fn relevant_mask(fcm: &Fcm, target: usize) -> Vec<bool> {
    let mut mask = vec![false; fcm.dag().len()];
    mask[target] = true;
    for a in fcm.dag().ancestors(target) {
        mask[a] = true;
    }
    mask
}

/// Log tail estimate and its standard error.
fn estimate(
    fcm: &Fcm,
    target: usize,
    threshold: f64,
    noise: &[f64],
    subset: &[bool],
    relevant: &[bool],
    cfg: &AttributionConfig,
) -> Result<(f64, f64)> {
    if relevant.iter().zip(subset).all(|(&r, &s)| !r || s) {
        return Ok((0.0, 0.0));
    }
    let frozen: Vec<Option<f64>> = noise
        .iter()
        .zip(subset)
        .map(|(&v, &s)| if s { Some(v) } else { None })
        .collect();
    let feature = &cfg.target_feature;
    let mut hits = 0usize;
    let mut failure = None;
    fcm.simulate(cfg.mc_samples, &frozen, cfg.seed, Some(relevant), |values| match feature.eval(values[target]) {
        Ok(f) if f >= threshold => hits += 1,
        Ok(_) => {}
        Err(e) => failure = Some(e),
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let m = cfg.mc_samples as f64;
    let p = (hits as f64 + 1.0) / (m + 1.0);
    Ok((p.ln(), ((1.0 - p) / (m * p)).sqrt()))
}

/// Shapley decomposition of the target's outlier score at `obs`.
pub fn shapley_attribution(
    fcm: &Fcm,
    target: &str,
    obs: &Observation,
    cfg: &AttributionConfig,
) -> Result<AttributionReport> {
    cfg.validate()?;
    let dag = fcm.dag();
    let t = dag.node(target)?;
    let n = dag.len();
    let threshold = cfg.target_feature.eval(obs.get(t))?;
    let noise = fcm.recover_noise(obs);
    let relevant = relevant_mask(fcm, t);
    let players: Vec<usize> = (0..n).filter(|&j| relevant[j]).collect();
    let u = players.len();

    let to_mask = |bits: u128| -> Vec<bool> {
        let mut m = vec![false; n];
        for (i, &p) in players.iter().enumerate() {
            m[p] = bits >> i & 1 == 1;
        }
        m
    };
    let eval = |bits: u128| -> Result<(f64, f64)> {
        estimate(fcm, t, threshold, &noise, &to_mask(bits), &relevant, cfg)
    };

    let mut cache: HashMap<u128, (f64, f64)> = HashMap::new();
    let mut phi = vec![0.0; u];
    match cfg.mode {
        ShapleyMode::ExactSubsets => {
            if u > cfg.exact_limit {
                return Err(RcaError::TooManySubsets { players: u, limit: cfg.exact_limit });
            }
            let values = (0..1u128 << u).into_par_iter().map(eval).collect::<Result<Vec<_>>>()?;
            let weights = shapley_weights(u);
            for (bits, &(v, _)) in values.iter().enumerate() {
                let size = (bits as u128).count_ones() as usize;
                for (i, slot) in phi.iter_mut().enumerate() {
                    if bits >> i & 1 == 1 {
                        // v(T ∪ {i}) enters with +w(|T|), v(T) with -w(|T|).
                        *slot += weights[size - 1] * v;
                    } else {
                        *slot -= weights[size] * v;
                    }
                }
            }
            cache.extend(values.into_iter().enumerate().map(|(b, v)| (b as u128, v)));
        }
        ShapleyMode::PermutationSampling { num_permutations } => {
            if u > MAX_PERMUTATION_PLAYERS {
                return Err(RcaError::InvalidInput(format!(
                    "permutation sampling supports at most {MAX_PERMUTATION_PLAYERS} relevant nodes, got {u}"
                )));
            }
            let mut rng = stream_rng(cfg.seed, stream::PERMUTATIONS);
            let mut order: Vec<usize> = (0..u).collect();
            let lookup = |bits: u128, cache: &mut HashMap<u128, (f64, f64)>| -> Result<f64> {
                if let Some(v) = cache.get(&bits) {
                    return Ok(v.0);
                }
                let v = eval(bits)?;
                cache.insert(bits, v);
                Ok(v.0)
            };
            for _ in 0..num_permutations {
                order.shuffle(&mut rng);
                let mut bits = 0u128;
                let mut prev = lookup(bits, &mut cache)?;
                for &i in &order {
                    bits |= 1 << i;
                    let next = lookup(bits, &mut cache)?;
                    phi[i] += next - prev;
                    prev = next;
                }
            }
            for c in &mut phi {
                *c /= num_permutations as f64;
            }
        }
    }

    let target_score = 0.0 - cache[&0].0;
    let mut contributions: BTreeMap<String, f64> = dag.names().iter().map(|name| (name.clone(), 0.0)).collect();
    for (i, &p) in players.iter().enumerate() {
        contributions.insert(dag.name(p).to_string(), phi[i]);
    }
    let residual = target_score - phi.iter().sum::<f64>();

    let mut keys: Vec<u128> = cache.keys().copied().collect();
    keys.sort_unstable();
    let mut subset_estimates = BTreeMap::new();
    let mut mc_stderr = BTreeMap::new();
    for bits in keys {
        let id = subset_id(fcm, &to_mask(bits));
        let (v, se) = cache[&bits];
        subset_estimates.insert(id.clone(), v);
        mc_stderr.insert(id, se);
    }

    let data_quantile_score = match &fcm.node(t).marginal {
        Some(m) => Some(FittedScore::fit(m.values(), cfg.target_feature.clone())?.score(obs.get(t))?),
        None => None,
    };

    Ok(AttributionReport {
        target: target.to_string(),
        target_score,
        contributions,
        residual,
        diagnostics: AttributionDiagnostics {
            threshold,
            mc_samples: cfg.mc_samples,
            mode: cfg.mode,
            seed: cfg.seed,
            relevant_nodes: players.iter().map(|&p| dag.name(p).to_string()).collect(),
            subset_estimates,
            mc_stderr,
            data_quantile_score,
        },
    })
}

/// `w[k] = k! (u-k-1)! / u!` for `k = 0..u`.
fn shapley_weights(u: usize) -> Vec<f64> {
    (0..u)
        .map(|k| {
            // 1 / (u * C(u-1, k))
            let mut binom = 1.0;
            for i in 0..k {
                binom = binom * (u - 1 - i) as f64 / (i + 1) as f64;
            }
            1.0 / (u as f64 * binom)
        })
        .collect()
}
