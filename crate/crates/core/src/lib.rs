//! Root-cause analysis of outliers in causal graphs.
//!
//! * [`scores`]: information-theoretic (IT) outlier scores and z-scores.
//! * [`convolution`]: combining independent scores into one.
//! * [`causal_model`]: DAGs, additive-noise models, conditional scores.
//! * [`attribution`]: Shapley attribution of a target's score to ancestor noise.
//! * [`synth`]: random-graph perturbation experiments with ROC/AUC evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod causal_model;
pub mod convolution;
mod error;
pub mod rng;
pub mod scores;
mod special;
pub mod synth;

pub use attribution::{shapley_attribution, AttributionConfig, AttributionReport, ShapleyMode};
pub use causal_model::{
    fit_fcm, Dag, Dataset, Fcm, Mechanism, NodeModel, NoiseModel, Observation, Regressor, ScoreMode,
};
pub use convolution::{convolve, convolve_scores, erlang_tail, ConvolutionInput};
pub use error::{RcaError, Result};
pub use scores::{fit_empirical_score, score_value, z_score, z_to_it, FeatureKind, FittedScore, ZParams};
pub use synth::{roc_auc, run_experiment, ExperimentReport, RocResult, SynthConfig};
