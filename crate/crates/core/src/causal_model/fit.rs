use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};
use crate::special::mean_std;

use super::mechanism::knn_mean;
use super::{noise_independence_check, Dag, Dataset, Fcm, Mechanism, NodeModel, NoiseModel};

/// Regression family used for non-root mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Linear,
    /// k-nearest-neighbour mean; `k = None` means `ceil(sqrt(rows))`.
    NearestNeighbor { k: Option<usize> },
}

/// Per-node summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFitDiagnostics {
    pub node: String,
    pub mechanism: String,
    pub parents: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    /// Numerical rank of the design matrix (linear fits).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Set when the linear design was rank deficient and the minimum-norm
    /// solution was used.
    pub rank_deficient: bool,
    pub residual_mean: f64,
    pub residual_std: f64,
    /// Max |Spearman| between conditional scores and parent values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rows: usize,
    pub regressor: Regressor,
    pub nodes: Vec<NodeFitDiagnostics>,
}

/// Fits an additive-noise FCM on `dag` from `data`.
///
/// Roots get an [`Mechanism::Empty`] centered at the column mean; other nodes
/// are regressed on their parents. Residuals become empirical noise models
/// scored two-sided. Marginal statistics are attached to every node.
pub fn fit_fcm(dag: &Dag, data: &Dataset, regressor: Regressor) -> Result<(Fcm, FitDiagnostics)> {
    let data = data.aligned_to(dag)?;
    let m = data.len();
    if m < 2 {
        return Err(RcaError::InvalidInput(format!("fitting needs at least 2 rows, got {m}")));
    }
    let column = |j: usize| -> Vec<f64> { data.rows().iter().map(|r| r[j]).collect() };

    let mut nodes = Vec::with_capacity(dag.len());
    let mut diags = Vec::with_capacity(dag.len());
    for j in 0..dag.len() {
        let y = column(j);
        let parents = dag.parents(j);
        let mut diag = NodeFitDiagnostics {
            node: dag.name(j).to_string(),
            mechanism: String::new(),
            parents: parents.iter().map(|&p| dag.name(p).to_string()).collect(),
            coefficients: None,
            intercept: None,
            rank: None,
            rank_deficient: false,
            residual_mean: 0.0,
            residual_std: 0.0,
            independence: None,
        };
        let (mechanism, residuals) = if parents.is_empty() {
            let (center, _) = mean_std(&y);
            let residuals = y.iter().map(|v| v - center).collect();
            (Mechanism::Empty { center }, residuals)
        } else {
            let xs: Vec<Vec<f64>> = parents.iter().map(|&p| column(p)).collect();
            match regressor {
                Regressor::Linear => {
                    let fit = least_squares(&xs, &y);
                    diag.coefficients = Some(fit.coefficients.clone());
                    diag.intercept = Some(fit.intercept);
                    diag.rank = Some(fit.rank);
                    diag.rank_deficient = fit.rank < parents.len() + 1;
                    let mech = Mechanism::Linear { coefficients: fit.coefficients, intercept: fit.intercept };
                    let residuals = (0..m)
                        .map(|i| {
                            let pa: Vec<f64> = xs.iter().map(|c| c[i]).collect();
                            y[i] - mech.predict(&pa)
                        })
                        .collect();
                    (mech, residuals)
                }
                Regressor::NearestNeighbor { k } => fit_knn(&xs, &y, k.unwrap_or_else(|| default_k(m)))?,
            }
        };
        let (rmean, rstd) = mean_std(&residuals);
        diag.residual_mean = rmean;
        diag.residual_std = rstd;
        diag.mechanism = mechanism.kind_name().to_string();
        nodes.push(NodeModel::new(mechanism, NoiseModel::empirical_two_sided(&residuals)?));
        diags.push(diag);
    }

    let fcm = Fcm::new(dag.clone(), nodes)?.with_marginals(&data)?;
    if m >= super::MIN_INDEPENDENCE_ROWS {
        for (d, v) in diags.iter_mut().zip(noise_independence_check(&fcm, &data)?) {
            d.independence = Some(v);
        }
    }
    Ok((fcm, FitDiagnostics { rows: m, regressor, nodes: diags }))
}

fn default_k(rows: usize) -> usize {
    ((rows as f64).sqrt().ceil() as usize).max(1)
}

struct LinearFit {
    coefficients: Vec<f64>,
    intercept: f64,
    rank: usize,
}

/// Minimum-norm least squares of `y` on `[1, xs...]` via SVD.
fn least_squares(xs: &[Vec<f64>], y: &[f64]) -> LinearFit {
    let m = y.len();
    let p = xs.len();
    let design = DMatrix::from_fn(m, p + 1, |i, c| if c == 0 { 1.0 } else { xs[c - 1][i] });
    let target = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (m.max(p + 1) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let beta = svd.solve(&target, eps).expect("u and v were computed");
    LinearFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        rank,
    }
}

fn fit_knn(xs: &[Vec<f64>], y: &[f64], k: usize) -> Result<(Mechanism, Vec<f64>)> {
    if k == 0 {
        return Err(RcaError::InvalidInput("nearest-neighbour k must be >= 1".into()));
    }
    let m = y.len();
    let scales: Vec<f64> = xs
        .iter()
        .map(|c| {
            let (_, s) = mean_std(c);
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let mut inputs = Vec::with_capacity(m * xs.len());
    for i in 0..m {
        inputs.extend(xs.iter().zip(&scales).map(|(c, s)| c[i] / s));
    }
    let dim = xs.len();
    // Leave-one-out residuals so the noise scale is not shrunk by self-matches.
    let residuals = (0..m)
        .map(|i| y[i] - knn_mean(k, &inputs[i * dim..(i + 1) * dim], &inputs, y, Some(i)))
        .collect();
    Ok((
        Mechanism::NearestNeighbor { k, scales, inputs, targets: y.to_vec() },
        residuals,
    ))
}
