//! Synthetic perturbation study: random DAGs with random mechanisms, shifted
//! structural equations at random nodes, and ROC comparison of conditional
//! against unconditional outlier scores.

mod experiment;
mod generate;
mod roc;

pub use experiment::{run_experiment, ExperimentReport, LambdaSummary, TrialResult};
pub use generate::{generate_labeled, inject_perturbations, random_dag, random_mechanisms, LabeledDataset, SynthConfig};
pub use roc::{roc_auc, RocResult};
