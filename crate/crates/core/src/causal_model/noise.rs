use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};
use crate::scores::{FeatureKind, FittedScore};
use crate::special::mean_std;

/// Distribution of a node's additive noise term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Sorted residuals; sampled by bootstrap.
    Empirical { residuals: Vec<f64> },
}

/// Grid size of the quantile reference used to score uniform noise.
const UNIFORM_GRID: usize = 10_000;

/// A noise distribution plus the IT score of noise values.
///
/// Serializes as its family plus, for empirical noise, the score feature;
/// moments and the fitted score are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpec", into = "NoiseSpec")]
pub struct NoiseModel {
    family: NoiseFamily,
    mean: f64,
    std: f64,
    score: FittedScore,
}

#[derive(Serialize, Deserialize)]
struct NoiseSpec {
    #[serde(flatten)]
    family: NoiseFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score_feature: Option<FeatureKind>,
}

impl TryFrom<NoiseSpec> for NoiseModel {
    type Error = RcaError;

    fn try_from(spec: NoiseSpec) -> Result<Self> {
        match spec.family {
            NoiseFamily::Gaussian { mean, std } => NoiseModel::gaussian(mean, std),
            NoiseFamily::Uniform { lo, hi } => NoiseModel::uniform(lo, hi),
            NoiseFamily::Empirical { residuals } => match spec.score_feature {
                Some(feature) => NoiseModel::empirical(&residuals, feature),
                None => NoiseModel::empirical_two_sided(&residuals),
            },
        }
    }
}

impl From<NoiseModel> for NoiseSpec {
    fn from(m: NoiseModel) -> Self {
        let score_feature = match m.family {
            NoiseFamily::Empirical { .. } => Some(m.score.feature().clone()),
            _ => None,
        };
        NoiseSpec { family: m.family, score_feature }
    }
}

impl NoiseModel {
    /// Gaussian noise scored by the closed-form two-sided tail.
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        let score = FittedScore::gaussian(FeatureKind::AbsDeviation { center: mean }, mean, std)?;
        Ok(NoiseModel { family: NoiseFamily::Gaussian { mean, std }, mean, std, score })
    }

    /// Uniform noise on `[lo, hi]`, scored against an evenly spaced quantile grid.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(RcaError::InvalidInput(format!("uniform noise needs lo < hi, got [{lo}, {hi}]")));
        }
        let mean = 0.5 * (lo + hi);
        let grid: Vec<f64> = (0..UNIFORM_GRID)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / UNIFORM_GRID as f64)
            .collect();
        let score = FittedScore::fit(&grid, FeatureKind::AbsDeviation { center: mean })?;
        Ok(NoiseModel {
            family: NoiseFamily::Uniform { lo, hi },
            mean,
            std: (hi - lo) / 12f64.sqrt(),
            score,
        })
    }

    /// Empirical residual distribution with the given score feature.
    pub fn empirical(residuals: &[f64], feature: FeatureKind) -> Result<Self> {
        if residuals.is_empty() {
            return Err(RcaError::InvalidInput("empirical noise needs at least one residual".into()));
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let score = FittedScore::fit(&sorted, feature)?;
        let (mean, std) = mean_std(&sorted);
        Ok(NoiseModel { family: NoiseFamily::Empirical { residuals: sorted }, mean, std, score })
    }

    /// Empirical residuals scored two-sided around their mean.
    pub fn empirical_two_sided(residuals: &[f64]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(RcaError::InvalidInput("empirical noise needs at least one residual".into()));
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mean, _) = mean_std(&sorted);
        Self::empirical(&sorted, FeatureKind::AbsDeviation { center: mean })
    }

    pub fn family(&self) -> &NoiseFamily {
        &self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn score(&self) -> &FittedScore {
        &self.score
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            NoiseFamily::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            NoiseFamily::Empirical { residuals } => residuals[rng.random_range(0..residuals.len())],
        }
    }
}
