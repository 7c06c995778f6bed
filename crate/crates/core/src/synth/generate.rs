use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal_model::{Dag, Dataset, Fcm, Mechanism, NodeModel, NoiseModel};
use crate::error::{RcaError, Result};
use crate::rng::{derive_seed, stream, stream_rng};

/// Parameters of the random-graph perturbation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_roots: usize,
    pub linear_prob: f64,
    pub coeff_range: (f64, f64),
    pub nn_weight_range: (f64, f64),
    pub nn_hidden_range: (usize, usize),
    pub rows: usize,
    pub perturb_prob: f64,
    /// Perturbation strength in units of the node's noise std.
    pub lambda: f64,
    pub seed: u64,
    /// Gaussian std or uniform half-width is drawn uniformly from this range.
    pub noise_width_range: (f64, f64),
    /// Share of `rows` used to fit the model in experiments.
    pub train_fraction: f64,
    /// Cap on parents per node; `None` means all preceding nodes.
    pub max_parents: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_nodes: 18,
            num_roots: 3,
            linear_prob: 0.2,
            coeff_range: (-1.0, 1.0),
            nn_weight_range: (-5.0, 5.0),
            nn_hidden_range: (2, 100),
            rows: 2000,
            perturb_prob: 0.15,
            lambda: 0.0,
            seed: 0,
            noise_width_range: (0.5, 2.0),
            train_fraction: 0.5,
            max_parents: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(RcaError::InvalidInput(format!("{field}: {why}")));
        if self.num_nodes == 0 {
            return bad("num_nodes", "must be at least 1".into());
        }
        if self.num_roots == 0 || self.num_roots >= self.num_nodes {
            return bad("num_roots", format!("must be in [1, num_nodes), got {}", self.num_roots));
        }
        for (field, p) in [
            ("linear_prob", self.linear_prob),
            ("perturb_prob", self.perturb_prob),
            ("train_fraction", self.train_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(field, format!("must be in [0, 1], got {p}"));
            }
        }
        for (field, (lo, hi)) in [
            ("coeff_range", self.coeff_range),
            ("nn_weight_range", self.nn_weight_range),
            ("noise_width_range", self.noise_width_range),
        ] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(field, format!("needs finite lo < hi, got ({lo}, {hi})"));
            }
        }
        if !(self.noise_width_range.0 > 0.0) {
            return bad("noise_width_range", "widths must be positive".into());
        }
        let (hlo, hhi) = self.nn_hidden_range;
        if hlo < 2 || hhi > 100 || hlo > hhi {
            return bad("nn_hidden_range", format!("must lie within [2, 100], got [{hlo}, {hhi}]"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda", format!("must be finite and nonnegative, got {}", self.lambda));
        }
        if self.max_parents == Some(0) {
            return bad("max_parents", "must be at least 1".into());
        }
        Ok(())
    }

    /// Training and test row counts for a `rows`-sized split.
    pub fn split_rows(&self) -> (usize, usize) {
        let train = ((self.rows as f64) * self.train_fraction).round() as usize;
        (train, self.rows - train)
    }
}

/// A dataset drawn from a perturbed model together with the truth.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    /// `true` for nodes that received a perturbation.
    pub ground_truth: Vec<bool>,
    /// The unperturbed model.
    pub truth_fcm: Fcm,
}

/// Random DAG `X1..Xn` whose first `num_roots` nodes are roots. Every later
/// node draws `k` parents with `P(k) ∝ 1/k` among the nodes before it.
pub fn random_dag(cfg: &SynthConfig) -> Result<Dag> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::DAG);
    let names: Vec<String> = (1..=cfg.num_nodes).map(|i| format!("X{i}")).collect();
    let mut edges = Vec::new();
    for i in cfg.num_roots..cfg.num_nodes {
        let cap = cfg.max_parents.map_or(i, |c| c.min(i));
        let k = inverse_k(&mut rng, cap);
        let mut parents = sample_indices(&mut rng, i, k).into_vec();
        parents.sort_unstable();
        edges.extend(parents.into_iter().map(|p| (names[p].clone(), names[i].clone())));
    }
    Dag::new(&names, &edges)
}

fn inverse_k(rng: &mut ChaCha8Rng, cap: usize) -> usize {
    let total: f64 = (1..=cap).map(|k| 1.0 / k as f64).sum();
    let mut u = rng.random::<f64>() * total;
    for k in 1..=cap {
        u -= 1.0 / k as f64;
        if u < 0.0 {
            return k;
        }
    }
    cap
}

/// Random mechanisms and noise for every node of `dag`.
///
/// Roots are centered at 0. Other nodes are linear without intercept with
/// probability `linear_prob`, otherwise a one-hidden-layer sigmoid network.
/// Noise is Gaussian or uniform with equal odds.
pub fn random_mechanisms(dag: &Dag, cfg: &SynthConfig) -> Result<Fcm> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::MECHANISMS);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| rng.random_range(lo..hi);
    let mut nodes = Vec::with_capacity(dag.len());
    for j in 0..dag.len() {
        let p = dag.parents(j).len();
        let mechanism = if p == 0 {
            Mechanism::Empty { center: 0.0 }
        } else if rng.random_bool(cfg.linear_prob) {
            Mechanism::Linear {
                coefficients: (0..p).map(|_| uniform(&mut rng, cfg.coeff_range)).collect(),
                intercept: 0.0,
            }
        } else {
            let h = rng.random_range(cfg.nn_hidden_range.0..=cfg.nn_hidden_range.1);
            let w = cfg.nn_weight_range;
            Mechanism::TruthNn {
                input_weights: (0..h).map(|_| (0..p).map(|_| uniform(&mut rng, w)).collect()).collect(),
                hidden_biases: (0..h).map(|_| uniform(&mut rng, w)).collect(),
                output_weights: (0..h).map(|_| uniform(&mut rng, w)).collect(),
            }
        };
        let width = uniform(&mut rng, cfg.noise_width_range);
        let noise = if rng.random_bool(0.5) {
            NoiseModel::gaussian(0.0, width)?
        } else {
            NoiseModel::uniform(-width, width)?
        };
        nodes.push(NodeModel::new(mechanism, noise));
    }
    Fcm::new(dag.clone(), nodes)
}

/// Flags each node with probability `perturb_prob` and shifts flagged nodes
/// by `lambda` noise standard deviations. The flags depend only on the seed.
pub fn inject_perturbations(fcm: &Fcm, cfg: &SynthConfig) -> Result<(Fcm, Vec<bool>)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::PERTURBATION);
    let flags: Vec<bool> = (0..fcm.dag().len()).map(|_| rng.random_bool(cfg.perturb_prob)).collect();
    let offsets: Vec<f64> = fcm
        .nodes()
        .iter()
        .zip(&flags)
        .map(|(node, &f)| if f { cfg.lambda * node.noise.std() } else { 0.0 })
        .collect();
    Ok((fcm.clone().with_offsets(&offsets)?, flags))
}

/// Draws graph, mechanisms and perturbations from `cfg` and samples `rows`
/// observations from the perturbed model.
pub fn generate_labeled(cfg: &SynthConfig) -> Result<LabeledDataset> {
    let dag = random_dag(cfg)?;
    let truth_fcm = random_mechanisms(&dag, cfg)?;
    let (perturbed, ground_truth) = inject_perturbations(&truth_fcm, cfg)?;
    let frozen = vec![None; dag.len()];
    let dataset = perturbed.sample(cfg.rows, &frozen, derive_seed(cfg.seed, 0))?;
    Ok(LabeledDataset { dataset, ground_truth, truth_fcm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_graph_shape() {
        let cfg = SynthConfig::default();
        let dag = random_dag(&cfg).unwrap();
        assert_eq!(dag.len(), 18);
        assert_eq!((0..18).filter(|&j| dag.is_root(j)).count(), 3);
        assert_eq!(dag.names()[0], "X1");
        let again = random_dag(&cfg).unwrap();
        assert_eq!(dag.edges().collect::<Vec<_>>(), again.edges().collect::<Vec<_>>());
    }

    #[test]
    fn parent_counts_follow_inverse_law() {
        let mut rng = stream_rng(5, 0);
        let mut counts = [0usize; 4];
        let draws = 60_000;
        for _ in 0..draws {
            counts[inverse_k(&mut rng, 3)] += 1;
        }
        let h = 1.0 + 0.5 + 1.0 / 3.0;
        for (k, &count) in counts.iter().enumerate().skip(1) {
            let expected = 1.0 / (k as f64 * h);
            assert!((count as f64 / draws as f64 - expected).abs() < 0.01);
        }
    }

    #[test]
    fn forced_mechanism_branches() {
        let lin = SynthConfig { linear_prob: 1.0, ..Default::default() };
        let fcm = random_mechanisms(&random_dag(&lin).unwrap(), &lin).unwrap();
        for (j, node) in fcm.nodes().iter().enumerate() {
            match &node.mechanism {
                Mechanism::Empty { .. } => assert!(fcm.dag().is_root(j)),
                Mechanism::Linear { coefficients, intercept } => {
                    assert_eq!(*intercept, 0.0);
                    assert!(coefficients.iter().all(|c| (-1.0..1.0).contains(c)));
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        let nn = SynthConfig { linear_prob: 0.0, ..Default::default() };
        let fcm = random_mechanisms(&random_dag(&nn).unwrap(), &nn).unwrap();
        for node in fcm.nodes() {
            if let Mechanism::TruthNn { output_weights, .. } = &node.mechanism {
                assert!((2..=100).contains(&output_weights.len()));
            } else {
                assert!(matches!(node.mechanism, Mechanism::Empty { .. }));
            }
        }
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = SynthConfig { num_roots: 18, ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("num_roots"));
        let cfg = SynthConfig { perturb_prob: 1.5, ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("perturb_prob"));
        let cfg = SynthConfig { nn_hidden_range: (1, 5), ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("nn_hidden_range"));
    }

    #[test]
    fn zero_lambda_leaves_the_model_unchanged() {
        let cfg = SynthConfig { perturb_prob: 1.0, ..Default::default() };
        let fcm = random_mechanisms(&random_dag(&cfg).unwrap(), &cfg).unwrap();
        let (perturbed, flags) = inject_perturbations(&fcm, &cfg).unwrap();
        assert!(flags.iter().all(|&f| f));
        assert_eq!(perturbed, fcm);
    }

    #[test]
    fn labeled_dataset_has_requested_rows() {
        let cfg = SynthConfig { rows: 50, lambda: 2.0, seed: 3, ..Default::default() };
        let data = generate_labeled(&cfg).unwrap();
        assert_eq!(data.dataset.len(), 50);
        assert_eq!(data.ground_truth.len(), 18);
    }
}
