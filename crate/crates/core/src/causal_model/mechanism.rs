use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// Deterministic part `f_j(pa_j)` of an additive structural equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    /// Root node; outputs the fitted centering constant.
    Empty { center: f64 },
    Linear { coefficients: Vec<f64>, intercept: f64 },
    /// One hidden sigmoid layer: `Σ_h w_h σ(Σ_p W_hp x_p + b_h)`.
    TruthNn {
        /// `hidden × parents`
        input_weights: Vec<Vec<f64>>,
        hidden_biases: Vec<f64>,
        output_weights: Vec<f64>,
    },
    /// Mean target of the `k` nearest stored parent vectors, after per-parent
    /// scaling by `scales`.
    NearestNeighbor {
        k: usize,
        scales: Vec<f64>,
        /// Row-major `rows × parents`, already scaled.
        inputs: Vec<f64>,
        targets: Vec<f64>,
    },
}

pub(crate) const NN_HIDDEN_MIN: usize = 2;
pub(crate) const NN_HIDDEN_MAX: usize = 100;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mechanism {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Mechanism::Empty { .. } => "empty",
            Mechanism::Linear { .. } => "linear",
            Mechanism::TruthNn { .. } => "truth_nn",
            Mechanism::NearestNeighbor { .. } => "nearest_neighbor",
        }
    }

    /// Checks internal consistency against the node's parent count.
    pub fn validate(&self, parent_count: usize) -> Result<()> {
        let fail = |msg: String| Err(RcaError::InvalidInput(msg));
        match self {
            Mechanism::Empty { center } => {
                if parent_count != 0 {
                    return fail(format!("empty mechanism on a node with {parent_count} parents"));
                }
                if !center.is_finite() {
                    return fail("non-finite root center".into());
                }
            }
            Mechanism::Linear { coefficients, intercept } => {
                if coefficients.len() != parent_count {
                    return fail(format!(
                        "linear mechanism has {} coefficients for {parent_count} parents",
                        coefficients.len()
                    ));
                }
                if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
                    return fail("non-finite linear coefficient".into());
                }
            }
            Mechanism::TruthNn { input_weights, hidden_biases, output_weights } => {
                let h = output_weights.len();
                if !(NN_HIDDEN_MIN..=NN_HIDDEN_MAX).contains(&h) {
                    return fail(format!("hidden width {h} outside [{NN_HIDDEN_MIN}, {NN_HIDDEN_MAX}]"));
                }
                if input_weights.len() != h || hidden_biases.len() != h {
                    return fail("hidden layer shapes disagree".into());
                }
                if input_weights.iter().any(|w| w.len() != parent_count) {
                    return fail(format!("input weights do not match {parent_count} parents"));
                }
            }
            Mechanism::NearestNeighbor { k, scales, inputs, targets } => {
                if *k == 0 {
                    return fail("nearest-neighbour k must be >= 1".into());
                }
                if scales.len() != parent_count || parent_count == 0 {
                    return fail(format!("nearest-neighbour scales do not match {parent_count} parents"));
                }
                if targets.is_empty() || inputs.len() != targets.len() * parent_count {
                    return fail("nearest-neighbour training set is malformed".into());
                }
                if scales.iter().any(|s| !(*s > 0.0)) {
                    return fail("nearest-neighbour scales must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// `f(pa)`; `parents` follows the DAG's sorted parent order.
    pub fn predict(&self, parents: &[f64]) -> f64 {
        match self {
            Mechanism::Empty { center } => *center,
            Mechanism::Linear { coefficients, intercept } => {
                intercept + coefficients.iter().zip(parents).map(|(c, x)| c * x).sum::<f64>()
            }
            Mechanism::TruthNn { input_weights, hidden_biases, output_weights } => input_weights
                .iter()
                .zip(hidden_biases)
                .zip(output_weights)
                .map(|((w, b), out)| {
                    let pre: f64 = w.iter().zip(parents).map(|(w, x)| w * x).sum::<f64>() + b;
                    out * sigmoid(pre)
                })
                .sum(),
            Mechanism::NearestNeighbor { k, scales, inputs, targets } => {
                let query: Vec<f64> = parents.iter().zip(scales).map(|(x, s)| x / s).collect();
                knn_mean(*k, &query, inputs, targets, None)
            }
        }
    }
}

/// Mean target over the `k` nearest rows of `inputs` to `query`, optionally
/// leaving one row out.
pub(crate) fn knn_mean(k: usize, query: &[f64], inputs: &[f64], targets: &[f64], exclude: Option<usize>) -> f64 {
    let dim = query.len();
    let mut dist: Vec<(f64, usize)> = inputs
        .chunks_exact(dim)
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| {
            let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    dist[..k].iter().map(|&(_, i)| targets[i]).sum::<f64>() / k as f64
}
