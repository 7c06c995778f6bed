use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::convolution::convolve;
use crate::error::{RcaError, Result};
use crate::rng::{stream, stream_rng};
use crate::scores::{FeatureKind, FittedScore};
use crate::special::mean_std;

use super::{Dag, DagSpec, Dataset, Mechanism, NoiseModel};

/// Noise standard deviations below this are treated as degenerate.
pub const MIN_NOISE_STD: f64 = 1e-12;

/// Rows per independently seeded sampling chunk.
const SAMPLE_CHUNK: usize = 1024;

/// Marginal statistics of a node, used for unconditional scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "MarginalSpec", into = "MarginalSpec")]
pub struct MarginalModel {
    mean: f64,
    std: f64,
    /// Sorted observed values.
    values: Vec<f64>,
    score: FittedScore,
}

#[derive(Serialize, Deserialize)]
struct MarginalSpec {
    mean: f64,
    std: f64,
    values: Vec<f64>,
}

impl From<MarginalSpec> for MarginalModel {
    fn from(s: MarginalSpec) -> Self {
        MarginalModel::build(s.mean, s.std, s.values)
    }
}

impl From<MarginalModel> for MarginalSpec {
    fn from(m: MarginalModel) -> Self {
        MarginalSpec { mean: m.mean, std: m.std, values: m.values }
    }
}

impl MarginalModel {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(RcaError::InvalidInput(
                "marginal statistics need at least two finite values".into(),
            ));
        }
        let (mean, std) = mean_std(values);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self::build(mean, std, sorted))
    }

    fn build(mean: f64, std: f64, values: Vec<f64>) -> Self {
        let centered: Vec<f64> = values.iter().map(|v| (v - mean).abs()).collect();
        let score = FittedScore::fit(&centered, FeatureKind::RightTail)
            .unwrap_or_else(|_| FittedScore::fit(&[0.0], FeatureKind::RightTail).expect("trivial fit"));
        MarginalModel { mean, std, values, score }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Two-sided IT score `-ln P{|X - mean| >= |x - mean|}`.
    pub fn it_score(&self, x: f64) -> Result<f64> {
        self.score.score((x - self.mean).abs())
    }
}

/// Structural equation `X_j = f_j(PA_j) + offset_j + N_j` of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    pub mechanism: Mechanism,
    pub noise: NoiseModel,
    /// Constant shift added to the structural equation (perturbation).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalModel>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl NodeModel {
    pub fn new(mechanism: Mechanism, noise: NoiseModel) -> Self {
        NodeModel { mechanism, noise, offset: 0.0, marginal: None }
    }
}

/// A complete assignment of values to the DAG nodes, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(dag: &Dag, values: Vec<f64>) -> Result<Self> {
        if values.len() != dag.len() {
            return Err(RcaError::InvalidInput(format!(
                "observation has {} values for {} nodes",
                values.len(),
                dag.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(RcaError::InvalidInput(format!("observation value {bad} is not finite")));
        }
        Ok(Observation(values))
    }

    pub fn from_map(dag: &Dag, map: &HashMap<String, f64>) -> Result<Self> {
        let values = dag
            .names()
            .iter()
            .map(|n| {
                map.get(n)
                    .copied()
                    .ok_or_else(|| RcaError::InvalidInput(format!("observation lacks node '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dag, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, node: usize) -> f64 {
        self.0[node]
    }
}

/// Which conditional/unconditional score to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Plain z-score, `|residual| / σ`.
    Z,
    /// IT score of the residual under the node's noise score.
    It,
}

/// Additive-noise functional causal model over a [`Dag`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FcmSpec", into = "FcmSpec")]
pub struct Fcm {
    dag: Dag,
    nodes: Vec<NodeModel>,
}

/// Serialized form: the DAG plus one entry per node in DAG order.
#[derive(Serialize, Deserialize)]
struct FcmSpec {
    dag: DagSpec,
    nodes: Vec<NamedNode>,
}

#[derive(Serialize, Deserialize)]
struct NamedNode {
    name: String,
    #[serde(flatten)]
    model: NodeModel,
}

impl TryFrom<FcmSpec> for Fcm {
    type Error = RcaError;

    fn try_from(spec: FcmSpec) -> Result<Self> {
        let dag = Dag::try_from(spec.dag)?;
        let mut by_name: HashMap<String, NodeModel> =
            spec.nodes.into_iter().map(|n| (n.name, n.model)).collect();
        let nodes = dag
            .names()
            .iter()
            .map(|n| by_name.remove(n).ok_or_else(|| RcaError::SchemaError(format!("no model for node '{n}'"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = by_name.keys().next() {
            return Err(RcaError::UnknownNode(extra.clone()));
        }
        Fcm::new(dag, nodes)
    }
}

impl From<Fcm> for FcmSpec {
    fn from(fcm: Fcm) -> Self {
        let dag = fcm.dag.spec();
        let nodes = dag
            .nodes
            .iter()
            .cloned()
            .zip(fcm.nodes)
            .map(|(name, model)| NamedNode { name, model })
            .collect();
        FcmSpec { dag, nodes }
    }
}

impl Fcm {
    pub fn new(dag: Dag, nodes: Vec<NodeModel>) -> Result<Self> {
        if nodes.len() != dag.len() {
            return Err(RcaError::InvalidInput(format!(
                "{} node models for {} nodes",
                nodes.len(),
                dag.len()
            )));
        }
        for (j, node) in nodes.iter().enumerate() {
            node.mechanism.validate(dag.parents(j).len()).map_err(|e| match e {
                RcaError::InvalidInput(msg) => RcaError::InvalidInput(format!("node '{}': {msg}", dag.name(j))),
                other => other,
            })?;
            if !node.offset.is_finite() {
                return Err(RcaError::InvalidInput(format!("node '{}': non-finite offset", dag.name(j))));
            }
        }
        Ok(Fcm { dag, nodes })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn node(&self, j: usize) -> &NodeModel {
        &self.nodes[j]
    }

    pub fn nodes(&self) -> &[NodeModel] {
        &self.nodes
    }

    /// Replaces every node's offset. Used to inject perturbations.
    pub fn with_offsets(mut self, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != self.nodes.len() || offsets.iter().any(|o| !o.is_finite()) {
            return Err(RcaError::InvalidInput("offsets must be finite, one per node".into()));
        }
        for (node, &o) in self.nodes.iter_mut().zip(offsets) {
            node.offset = o;
        }
        Ok(self)
    }

    /// Attaches marginal statistics computed from `data`.
    pub fn with_marginals(mut self, data: &Dataset) -> Result<Self> {
        let aligned = data.aligned_to(&self.dag)?;
        for (j, node) in self.nodes.iter_mut().enumerate() {
            let column: Vec<f64> = aligned.rows().iter().map(|r| r[j]).collect();
            node.marginal = Some(MarginalModel::fit(&column)?);
        }
        Ok(self)
    }

    fn parent_values(&self, j: usize, values: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.dag.parents(j).iter().map(|&p| values[p]));
    }

    /// `f_j(pa_j) + offset_j`, the noise-free part of node `j`'s equation.
    pub fn predict(&self, j: usize, values: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.dag.parents(j).len());
        self.parent_values(j, values, &mut buf);
        self.nodes[j].mechanism.predict(&buf) + self.nodes[j].offset
    }

    /// Inverts the additive equations: `n_j = x_j - f_j(pa_j) - offset_j`.
    pub fn recover_noise(&self, obs: &Observation) -> Vec<f64> {
        (0..self.dag.len())
            .map(|j| obs.get(j) - self.predict(j, obs.values()))
            .collect()
    }

    /// Ancestral pass `x_j = f_j(pa_j) + offset_j + n_j`.
    pub fn evaluate(&self, noise: &[f64]) -> Result<Observation> {
        if noise.len() != self.dag.len() {
            return Err(RcaError::InvalidInput(format!(
                "noise vector has {} entries for {} nodes",
                noise.len(),
                self.dag.len()
            )));
        }
        let mut values = vec![0.0; noise.len()];
        let mut buf = Vec::new();
        self.evaluate_into(noise, &mut values, &mut buf, None);
        Observation::new(&self.dag, values)
    }

    fn evaluate_into(&self, noise: &[f64], values: &mut [f64], buf: &mut Vec<f64>, needed: Option<&[bool]>) {
        for &j in self.dag.topo_order() {
            if needed.is_some_and(|m| !m[j]) {
                continue;
            }
            self.parent_values(j, values, buf);
            values[j] = self.nodes[j].mechanism.predict(buf) + self.nodes[j].offset + noise[j];
        }
    }

    /// Draws `count` observations. Nodes with a `frozen` entry keep that noise
    /// value; the others are drawn from their noise models.
    ///
    /// Every node's noise is drawn on every row whether frozen or not, so two
    /// calls with the same seed share the draws of all unfrozen coordinates.
    pub fn sample(&self, count: usize, frozen: &[Option<f64>], seed: u64) -> Result<Dataset> {
        let mut rows = Vec::with_capacity(count);
        self.simulate(count, frozen, seed, None, |values| rows.push(values.to_vec()))?;
        Dataset::new(self.dag.names().to_vec(), rows)
    }

    /// Like [`sample`](Self::sample) with frozen noise given by name.
    pub fn sample_named(&self, count: usize, frozen: &BTreeMap<String, f64>, seed: u64) -> Result<Dataset> {
        let mut full = vec![None; self.dag.len()];
        for (name, &v) in frozen {
            full[self.dag.node(name)?] = Some(v);
        }
        self.sample(count, &full, seed)
    }

    /// Streaming core of [`sample`](Self::sample). When `needed` is given, only
    /// the marked nodes are evaluated (it must be closed under ancestors);
    /// `visit` sees stale values for the others.
    pub fn simulate<F: FnMut(&[f64])>(
        &self,
        count: usize,
        frozen: &[Option<f64>],
        seed: u64,
        needed: Option<&[bool]>,
        mut visit: F,
    ) -> Result<()> {
        let n = self.dag.len();
        if frozen.len() != n {
            return Err(RcaError::InvalidInput(format!(
                "frozen map has {} entries for {n} nodes",
                frozen.len()
            )));
        }
        let mut noise = vec![0.0; n];
        let mut values = vec![0.0; n];
        let mut buf = Vec::new();
        for (chunk, start) in (0..count).step_by(SAMPLE_CHUNK).enumerate() {
            let mut rng = stream_rng(seed, stream::SAMPLING_BASE + chunk as u64);
            for _ in start..(start + SAMPLE_CHUNK).min(count) {
                for (j, slot) in noise.iter_mut().enumerate() {
                    let draw = self.nodes[j].noise.sample(&mut rng);
                    *slot = frozen[j].unwrap_or(draw);
                }
                self.evaluate_into(&noise, &mut values, &mut buf, needed);
                visit(&values);
            }
        }
        Ok(())
    }

    fn residual(&self, j: usize, obs: &Observation) -> f64 {
        obs.get(j) - self.predict(j, obs.values())
    }

    /// Outlier score of node `j` given its parents.
    pub fn conditional_score(&self, j: usize, obs: &Observation, mode: ScoreMode) -> Result<f64> {
        let residual = self.residual(j, obs);
        let noise = &self.nodes[j].noise;
        match mode {
            ScoreMode::Z => {
                if !(noise.std() >= MIN_NOISE_STD) {
                    return Err(RcaError::DegenerateNoise { node: self.dag.name(j).into(), std: noise.std() });
                }
                Ok(residual.abs() / noise.std())
            }
            ScoreMode::It => noise.score().score(residual),
        }
    }

    /// Outlier score of node `j` ignoring the graph.
    pub fn unconditional_score(&self, j: usize, obs: &Observation, mode: ScoreMode) -> Result<f64> {
        let marginal = self.nodes[j].marginal.as_ref().ok_or_else(|| {
            RcaError::InvalidInput(format!("node '{}' has no marginal statistics", self.dag.name(j)))
        })?;
        let x = obs.get(j);
        match mode {
            ScoreMode::Z => {
                if !(marginal.std() >= MIN_NOISE_STD) {
                    return Err(RcaError::DegenerateNoise { node: self.dag.name(j).into(), std: marginal.std() });
                }
                Ok((x - marginal.mean()).abs() / marginal.std())
            }
            ScoreMode::It => marginal.it_score(x),
        }
    }

    /// Convolution of all conditional IT scores of `obs`.
    pub fn convolve_conditional(&self, obs: &Observation) -> Result<f64> {
        let scores = (0..self.dag.len())
            .map(|j| self.conditional_score(j, obs, ScoreMode::It))
            .collect::<Result<Vec<_>>>()?;
        convolve(&scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal_model::noise::NoiseFamily;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// X ~ N(0,1), Y = X + N, N ~ N(0,1).
    pub(crate) fn chain() -> Fcm {
        let dag = Dag::new(&["X", "Y"], &[("X", "Y")]).unwrap();
        Fcm::new(
            dag,
            vec![
                NodeModel::new(Mechanism::Empty { center: 0.0 }, NoiseModel::gaussian(0.0, 1.0).unwrap()),
                NodeModel::new(
                    Mechanism::Linear { coefficients: vec![1.0], intercept: 0.0 },
                    NoiseModel::gaussian(0.0, 1.0).unwrap(),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn recover_and_evaluate_worked_example() {
        let fcm = chain();
        let obs = Observation::new(fcm.dag(), vec![2.0, 3.0]).unwrap();
        assert_eq!(fcm.recover_noise(&obs), vec![2.0, 1.0]);
        assert_eq!(fcm.evaluate(&[2.0, 1.0]).unwrap(), obs);
        assert_eq!(fcm.evaluate(&[0.0, 0.0]).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn root_noise_is_relative_to_center() {
        let dag = Dag::new(&["R"], &[] as &[(&str, &str)]).unwrap();
        let fcm = Fcm::new(
            dag,
            vec![NodeModel::new(Mechanism::Empty { center: 5.0 }, NoiseModel::gaussian(0.0, 1.0).unwrap())],
        )
        .unwrap();
        let obs = Observation::new(fcm.dag(), vec![6.5]).unwrap();
        assert_eq!(fcm.recover_noise(&obs), vec![1.5]);
    }

    #[test]
    fn conditional_z_scores() {
        let fcm = chain();
        let obs = Observation::new(fcm.dag(), vec![2.0, 3.0]).unwrap();
        assert_eq!(fcm.conditional_score(1, &obs, ScoreMode::Z).unwrap(), 1.0);
        let on_mean = Observation::new(fcm.dag(), vec![2.0, 2.0]).unwrap();
        assert_eq!(fcm.conditional_score(1, &on_mean, ScoreMode::Z).unwrap(), 0.0);
        // IT mode: -ln P{|N| >= 1}
        let it = fcm.conditional_score(1, &obs, ScoreMode::It).unwrap();
        assert_relative_eq!(it, -(0.317_310_507_862_914_1f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_noise_is_an_error() {
        let dag = Dag::new(&["X", "Y"], &[("X", "Y")]).unwrap();
        let fcm = Fcm::new(
            dag,
            vec![
                NodeModel::new(Mechanism::Empty { center: 0.0 }, NoiseModel::gaussian(0.0, 1.0).unwrap()),
                NodeModel::new(
                    Mechanism::Linear { coefficients: vec![2.0], intercept: 0.0 },
                    NoiseModel::empirical_two_sided(&[0.0, 0.0, 0.0]).unwrap(),
                ),
            ],
        )
        .unwrap();
        let obs = Observation::new(fcm.dag(), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            fcm.conditional_score(1, &obs, ScoreMode::Z),
            Err(RcaError::DegenerateNoise { .. })
        ));
    }

    #[test]
    fn convolution_of_conditional_scores() {
        let fcm = chain();
        let calm = Observation::new(fcm.dag(), vec![0.0, 0.0]).unwrap();
        assert_eq!(fcm.convolve_conditional(&calm).unwrap(), 0.0);
        let obs = Observation::new(fcm.dag(), vec![2.0, 3.0]).unwrap();
        let sx = fcm.conditional_score(0, &obs, ScoreMode::It).unwrap();
        let sy = fcm.conditional_score(1, &obs, ScoreMode::It).unwrap();
        let c = fcm.convolve_conditional(&obs).unwrap();
        assert_relative_eq!(c, sx + sy - (1.0 + sx + sy).ln(), epsilon = 1e-12);
        assert!(c <= sx + sy);
    }

    #[test]
    fn sampling_is_deterministic_and_respects_frozen_noise() {
        let fcm = chain();
        let a = fcm.sample(3000, &[None, None], 7).unwrap();
        let b = fcm.sample(3000, &[None, None], 7).unwrap();
        assert_eq!(a, b);
        let frozen = fcm.sample(2000, &[Some(2.0), None], 7).unwrap();
        assert!(frozen.rows().iter().all(|r| r[0] == 2.0));
        // Unfrozen coordinates share draws across frozen sets.
        let y_noise_a: Vec<f64> = a.rows().iter().take(2000).map(|r| r[1] - r[0]).collect();
        let y_noise_f: Vec<f64> = frozen.rows().iter().map(|r| r[1] - r[0]).collect();
        for (u, v) in y_noise_a.iter().zip(&y_noise_f) {
            assert!((u - v).abs() < 1e-12);
        }
        let all = fcm.sample(5, &[Some(2.0), Some(1.0)], 1).unwrap();
        assert!(all.rows().iter().all(|r| r == &vec![2.0, 3.0]));
    }

    #[test]
    fn sample_means_follow_noise_means() {
        let dag = Dag::new(&["A", "B"], &[] as &[(&str, &str)]).unwrap();
        let fcm = Fcm::new(
            dag,
            vec![
                NodeModel::new(Mechanism::Empty { center: 0.0 }, NoiseModel::gaussian(3.0, 2.0).unwrap()),
                NodeModel::new(Mechanism::Empty { center: 1.0 }, NoiseModel::uniform(-1.0, 1.0).unwrap()),
            ],
        )
        .unwrap();
        let count = 20_000;
        let data = fcm.sample(count, &[None, None], 3).unwrap();
        let tol = |sigma: f64| 4.0 * sigma / (count as f64).sqrt();
        let mean = |c: &str| data.column(c).unwrap().iter().sum::<f64>() / count as f64;
        assert!((mean("A") - 3.0).abs() < tol(2.0));
        assert!((mean("B") - 1.0).abs() < tol(1.0 / 3f64.sqrt()));
    }

    #[test]
    fn json_round_trip() {
        let fcm = chain().with_offsets(&[0.0, 1.5]).unwrap();
        let json = serde_json::to_string(&fcm).unwrap();
        let back: Fcm = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fcm);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["nodes"][1]["name"], "Y");
        assert_eq!(v["nodes"][1]["mechanism"]["kind"], "linear");
        assert_eq!(v["nodes"][1]["noise"]["family"], "gaussian");
        assert_eq!(v["nodes"][1]["offset"], 1.5);
        assert!(matches!(chain().node(0).noise.family(), NoiseFamily::Gaussian { .. }));
    }

    #[test]
    fn mismatched_mechanism_is_rejected() {
        let dag = Dag::new(&["X", "Y"], &[("X", "Y")]).unwrap();
        let err = Fcm::new(
            dag,
            vec![
                NodeModel::new(Mechanism::Empty { center: 0.0 }, NoiseModel::gaussian(0.0, 1.0).unwrap()),
                NodeModel::new(
                    Mechanism::Linear { coefficients: vec![1.0, 2.0], intercept: 0.0 },
                    NoiseModel::gaussian(0.0, 1.0).unwrap(),
                ),
            ],
        );
        assert!(matches!(err, Err(RcaError::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn evaluate_inverts_recover_noise(
            x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3,
            c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, off in -5.0f64..5.0,
        ) {
            let dag = Dag::new(&["A", "B", "C"], &[("A", "B"), ("A", "C"), ("B", "C")]).unwrap();
            let fcm = Fcm::new(dag, vec![
                NodeModel::new(Mechanism::Empty { center: 0.3 }, NoiseModel::gaussian(0.0, 1.0).unwrap()),
                NodeModel::new(Mechanism::TruthNn {
                    input_weights: vec![vec![c1], vec![c2]],
                    hidden_biases: vec![0.1, -0.2],
                    output_weights: vec![2.0, -1.0],
                }, NoiseModel::uniform(-1.0, 1.0).unwrap()),
                NodeModel::new(Mechanism::Linear { coefficients: vec![c1, c2], intercept: 0.5 },
                    NoiseModel::gaussian(0.0, 2.0).unwrap()),
            ]).unwrap().with_offsets(&[0.0, off, 0.0]).unwrap();
            let noise = vec![x, y, z];
            let obs = fcm.evaluate(&noise).unwrap();
            let back = fcm.recover_noise(&obs);
            for (a, b) in noise.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
            let again = fcm.evaluate(&back).unwrap();
            for (a, b) in obs.values().iter().zip(again.values()) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}
