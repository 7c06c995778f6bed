use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal_model::{fit_fcm, format_f64, Fcm, Observation, Regressor, ScoreMode};
use crate::error::{RcaError, Result};
use crate::rng::derive_seed;
use crate::special::mean_std;

use super::{inject_perturbations, random_dag, random_mechanisms, roc_auc, SynthConfig};

/// Attempts per graph before giving up on drawing at least one perturbed node.
const MAX_REDRAWS: u64 = 10_000;

/// AUCs of one graph at one perturbation strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub graph: usize,
    pub graph_seed: u64,
    pub lambda: f64,
    pub num_flagged: usize,
    pub auc_conditional: f64,
    pub auc_unconditional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub mean_conditional: f64,
    pub std_conditional: f64,
    pub mean_unconditional: f64,
    pub std_unconditional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SynthConfig,
    pub num_graphs: usize,
    pub lambdas: Vec<f64>,
    pub regressor: Regressor,
    /// Graphs redrawn because no node was flagged.
    pub redraws: u64,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<LambdaSummary>,
}

impl ExperimentReport {
    /// One row per graph and λ.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph,graph_seed,lambda,num_flagged,auc_conditional,auc_unconditional\n");
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.graph,
                t.graph_seed,
                format_f64(t.lambda),
                t.num_flagged,
                format_f64(t.auc_conditional),
                format_f64(t.auc_unconditional)
            );
        }
        out
    }
}

/// Runs the perturbation study over `num_graphs` random graphs.
///
/// Each graph draws its structure, mechanisms and perturbation flags once and
/// reuses them for every λ. A model is fitted on clean rows from the
/// unperturbed truth; test rows come from the perturbed truth and every node
/// of every row is labeled by its flag. `cfg.seed` is the master seed and
/// `cfg.lambda` is ignored.
pub fn run_experiment(
    cfg: &SynthConfig,
    num_graphs: usize,
    lambdas: &[f64],
    regressor: Regressor,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if num_graphs == 0 {
        return Err(RcaError::InvalidInput("num_graphs must be at least 1".into()));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(RcaError::InvalidInput("lambdas must be a nonempty list of finite values >= 0".into()));
    }
    if cfg.perturb_prob == 0.0 {
        return Err(RcaError::InvalidInput("perturb_prob: must be positive for an experiment".into()));
    }
    let (train_rows, test_rows) = cfg.split_rows();
    if train_rows < 2 || test_rows == 0 {
        return Err(RcaError::InvalidInput(format!(
            "rows/train_fraction leave {train_rows} training and {test_rows} test rows"
        )));
    }

    let per_graph = (0..num_graphs)
        .into_par_iter()
        .map(|g| run_graph(cfg, g, lambdas, regressor, train_rows, test_rows))
        .collect::<Result<Vec<_>>>()?;

    let redraws = per_graph.iter().map(|(r, _)| r).sum();
    let trials: Vec<TrialResult> = per_graph.into_iter().flat_map(|(_, t)| t).collect();
    let summary = lambdas
        .iter()
        .map(|&lambda| {
            let (cond, uncond): (Vec<f64>, Vec<f64>) = trials
                .iter()
                .filter(|t| t.lambda == lambda)
                .map(|t| (t.auc_conditional, t.auc_unconditional))
                .unzip();
            let (mean_conditional, std_conditional) = mean_std(&cond);
            let (mean_unconditional, std_unconditional) = mean_std(&uncond);
            LambdaSummary { lambda, mean_conditional, std_conditional, mean_unconditional, std_unconditional }
        })
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        num_graphs,
        lambdas: lambdas.to_vec(),
        regressor,
        redraws,
        trials,
        summary,
    })
}

fn run_graph(
    cfg: &SynthConfig,
    graph: usize,
    lambdas: &[f64],
    regressor: Regressor,
    train_rows: usize,
    test_rows: usize,
) -> Result<(u64, Vec<TrialResult>)> {
    let base = derive_seed(cfg.seed, graph as u64);
    for attempt in 0..MAX_REDRAWS {
        let graph_seed = derive_seed(base, attempt);
        let gcfg = SynthConfig { seed: graph_seed, lambda: 0.0, ..cfg.clone() };
        let dag = random_dag(&gcfg)?;
        let truth = random_mechanisms(&dag, &gcfg)?;
        let (_, flags) = inject_perturbations(&truth, &gcfg)?;
        if !flags.iter().any(|&f| f) {
            continue;
        }
        let clean = vec![None; dag.len()];
        let train = truth.sample(train_rows, &clean, derive_seed(graph_seed, 1))?;
        let (fitted, _) = fit_fcm(&dag, &train, regressor)?;
        let num_flagged = flags.iter().filter(|&&f| f).count();

        let mut trials = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let (perturbed, _) = inject_perturbations(&truth, &SynthConfig { lambda, ..gcfg.clone() })?;
            let test = perturbed.sample(test_rows, &clean, derive_seed(graph_seed, 2))?;
            let (labels, cond, uncond) = score_rows(&fitted, test.rows(), &flags)?;
            trials.push(TrialResult {
                graph,
                graph_seed,
                lambda,
                num_flagged,
                auc_conditional: roc_auc(&labels, &cond)?.auc,
                auc_unconditional: roc_auc(&labels, &uncond)?.auc,
            });
        }
        return Ok((attempt, trials));
    }
    Err(RcaError::InvalidInput(format!(
        "graph {graph}: no perturbed node after {MAX_REDRAWS} draws"
    )))
}

type Scored = (Vec<bool>, Vec<f64>, Vec<f64>);

fn score_rows(fitted: &Fcm, rows: &[Vec<f64>], flags: &[bool]) -> Result<Scored> {
    let n = flags.len();
    let mut labels = Vec::with_capacity(rows.len() * n);
    let mut cond = Vec::with_capacity(rows.len() * n);
    let mut uncond = Vec::with_capacity(rows.len() * n);
    for row in rows {
        let obs = Observation::new(fitted.dag(), row.clone())?;
        for (j, &flag) in flags.iter().enumerate() {
            labels.push(flag);
            cond.push(fitted.conditional_score(j, &obs, ScoreMode::Z)?);
            uncond.push(fitted.unconditional_score(j, &obs, ScoreMode::Z)?);
        }
    }
    Ok((labels, cond, uncond))
}
