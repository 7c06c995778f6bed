use crate::error::{RcaError, Result};

use super::{Dataset, Fcm, Observation, ScoreMode};

/// Fewest rows accepted by [`noise_independence_check`].
pub const MIN_INDEPENDENCE_ROWS: usize = 30;

/// For each node, the largest absolute Spearman correlation between its
/// conditional IT scores and the values of any one parent over `data`.
///
/// A well specified additive model yields scores independent of the parents,
/// so values near 0 are expected. Roots report 0.
pub fn noise_independence_check(fcm: &Fcm, data: &Dataset) -> Result<Vec<f64>> {
    let dag = fcm.dag();
    let data = data.aligned_to(dag)?;
    if data.len() < MIN_INDEPENDENCE_ROWS {
        return Err(RcaError::InvalidInput(format!(
            "independence check needs at least {MIN_INDEPENDENCE_ROWS} rows, got {}",
            data.len()
        )));
    }
    let observations = data
        .rows()
        .iter()
        .map(|r| Observation::new(dag, r.clone()))
        .collect::<Result<Vec<_>>>()?;
    (0..dag.len())
        .map(|j| {
            if dag.is_root(j) {
                return Ok(0.0);
            }
            let scores = observations
                .iter()
                .map(|o| fcm.conditional_score(j, o, ScoreMode::It))
                .collect::<Result<Vec<_>>>()?;
            let score_ranks = ranks(&scores);
            Ok(dag
                .parents(j)
                .iter()
                .map(|&p| {
                    let parent: Vec<f64> = data.rows().iter().map(|r| r[p]).collect();
                    pearson(&score_ranks, &ranks(&parent)).abs()
                })
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties. Constant inputs give 0.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &order[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal_model::{fit_fcm, Dag, Regressor};
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::{Exp1, StandardNormal};

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, -5.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn fit_chain(xs: &[f64], ys: &[f64]) -> (Fcm, Dataset) {
        let dag = Dag::new(&["X", "Y"], &[("X", "Y")]).unwrap();
        let data = Dataset::new(
            vec!["X".into(), "Y".into()],
            xs.iter().zip(ys).map(|(x, y)| vec![*x, *y]).collect(),
        )
        .unwrap();
        let (fcm, _) = fit_fcm(&dag, &data, Regressor::Linear).unwrap();
        (fcm, data)
    }

    #[test]
    fn correctly_specified_model_passes() {
        let mut rng = stream_rng(21, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + rng.sample::<f64, _>(StandardNormal)).collect();
        let (fcm, data) = fit_chain(&xs, &ys);
        let d = noise_independence_check(&fcm, &data).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d[1] < 0.05, "{d:?}");
    }

    #[test]
    fn misspecified_quadratic_is_flagged() {
        // Skewed cause so the linear misfit is not symmetric in X.
        let mut rng = stream_rng(22, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(Exp1)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + rng.sample::<f64, _>(StandardNormal)).collect();
        let (fcm, data) = fit_chain(&xs, &ys);
        let d = noise_independence_check(&fcm, &data).unwrap();
        assert!(d[1] > 0.05, "{d:?}");
    }

    #[test]
    fn too_few_rows() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + (x * 7.0).sin()).collect();
        let (fcm, data) = fit_chain(&xs, &ys);
        assert!(matches!(noise_independence_check(&fcm, &data), Err(RcaError::InvalidInput(_))));
    }
}
