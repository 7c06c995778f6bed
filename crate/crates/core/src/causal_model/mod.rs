//! Causal DAGs and additive-noise functional causal models.
//!
//! Every node follows `X_j = f_j(PA_j) + offset_j + N_j` with jointly
//! independent noise terms. The model can be fitted from data, inverted at an
//! observation to recover the noise, re-evaluated from a noise vector, sampled
//! with part of the noise held fixed, and used to score how surprising a value
//! is given its parents.

mod dag;
mod dataset;
mod diagnostics;
mod fcm;
mod fit;
mod mechanism;
mod noise;

pub use dag::{topological_order, Dag, DagSpec};
pub use dataset::{format_f64, Dataset};
pub use diagnostics::{noise_independence_check, spearman, MIN_INDEPENDENCE_ROWS};
pub use fcm::{Fcm, MarginalModel, NodeModel, Observation, ScoreMode, MIN_NOISE_STD};
pub use fit::{fit_fcm, FitDiagnostics, NodeFitDiagnostics, Regressor};
pub use mechanism::Mechanism;
pub use noise::{NoiseFamily, NoiseModel};
