use rca_core::causal_model::{Dag, Fcm, Mechanism, NodeModel, NoiseModel, Observation, ScoreMode};
use rca_core::synth::{inject_perturbations, random_dag, random_mechanisms, run_experiment, SynthConfig};
use rca_core::Regressor;

fn ks_to_exp1(mut s: Vec<f64>) -> f64 {
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = 1.0 - (-v).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn linear_share_of_mechanisms() {
    let draws = 1000;
    let linear = (0..draws)
        .filter(|&seed| {
            let cfg = SynthConfig { num_nodes: 2, num_roots: 1, seed, ..Default::default() };
            let fcm = random_mechanisms(&random_dag(&cfg).unwrap(), &cfg).unwrap();
            matches!(fcm.node(1).mechanism, Mechanism::Linear { .. })
        })
        .count();
    let share = linear as f64 / draws as f64;
    assert!((share - 0.2).abs() < 0.04, "{share}");
}

#[test]
fn flagged_share_matches_perturb_prob() {
    let (mut flagged, mut total) = (0usize, 0usize);
    for seed in 0..2000 {
        let cfg = SynthConfig { seed, ..Default::default() };
        let fcm = random_mechanisms(&random_dag(&cfg).unwrap(), &cfg).unwrap();
        let (_, flags) = inject_perturbations(&fcm, &cfg).unwrap();
        flagged += flags.iter().filter(|&&f| f).count();
        total += flags.len();
    }
    let share = flagged as f64 / total as f64;
    assert!((share - 0.15).abs() < 0.01, "{share}");
}

#[test]
fn perturbation_shifts_the_mean_by_lambda_sigma() {
    let dag = Dag::new(&["A"], &[] as &[(&str, &str)]).unwrap();
    let fcm = Fcm::new(dag, vec![NodeModel::new(Mechanism::Empty { center: 0.0 }, NoiseModel::gaussian(0.0, 2.0).unwrap())])
        .unwrap();
    let cfg = SynthConfig { num_nodes: 2, num_roots: 1, perturb_prob: 1.0, lambda: 3.0, ..Default::default() };
    let (perturbed, flags) = inject_perturbations(&fcm, &cfg).unwrap();
    assert_eq!(flags, vec![true]);
    let mean = |f: &Fcm| {
        let d = f.sample(10_000, &[None], 17).unwrap();
        d.rows().iter().map(|r| r[0]).sum::<f64>() / d.len() as f64
    };
    let shift = mean(&perturbed) - mean(&fcm);
    assert!((shift - 6.0).abs() < 4.0 * 2.0 / 100.0, "{shift}");
}

#[test]
fn truth_model_it_scores_are_exp1() {
    let cfg = SynthConfig { seed: 31, ..Default::default() };
    let fcm = random_mechanisms(&random_dag(&cfg).unwrap(), &cfg).unwrap();
    let data = fcm.sample(5_000, &vec![None; fcm.dag().len()], 4).unwrap();
    let obs: Vec<Observation> = data.rows().iter().map(|r| Observation::new(fcm.dag(), r.clone()).unwrap()).collect();
    for j in 0..fcm.dag().len() {
        let scores: Vec<f64> = obs.iter().map(|o| fcm.conditional_score(j, o, ScoreMode::It).unwrap()).collect();
        let ks = ks_to_exp1(scores);
        assert!(ks < 0.03, "node {j}: ks {ks}");
    }
}

#[test]
fn zero_lambda_gives_chance_auc() {
    let cfg = SynthConfig { num_nodes: 10, num_roots: 2, rows: 1000, perturb_prob: 0.3, seed: 6, ..Default::default() };
    let r = run_experiment(&cfg, 10, &[0.0], Regressor::Linear).unwrap();
    let s = &r.summary[0];
    assert!((s.mean_conditional - 0.5).abs() < 0.05, "{s:?}");
    assert!((s.mean_unconditional - 0.5).abs() < 0.05, "{s:?}");
}

#[test]
fn experiment_is_independent_of_thread_count() {
    let cfg = SynthConfig { num_nodes: 6, num_roots: 2, rows: 300, perturb_prob: 0.3, seed: 77, ..Default::default() };
    let parallel = run_experiment(&cfg, 4, &[2.0], Regressor::Linear).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| run_experiment(&cfg, 4, &[2.0], Regressor::Linear).unwrap());
    assert_eq!(parallel.to_csv(), serial.to_csv());
}
