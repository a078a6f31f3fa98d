use rand::Rng as _;
use rand_distr::StandardNormal;

use super::*;
use crate::sampling::Hypercube;
use crate::synth::{self, generate_from_regimes, RegimeSpec, SynthSpec};

fn line(n: usize, slope: f64, sigma: f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let ys = xs
        .iter()
        .map(|x| slope * x + sigma * r.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(xs, 1, ys).unwrap()
}

fn two_regimes(n: usize, sigma: f64, seed: u64) -> synth::SynthData {
    let regimes = vec![
        RegimeSpec {
            region: Hypercube::new(vec![-1.0], vec![0.0]).unwrap(),
            beta: vec![2.0],
            intercept: 1.0,
        },
        RegimeSpec {
            region: Hypercube::new(vec![0.0], vec![1.0]).unwrap(),
            beta: vec![-1.0],
            intercept: -1.0,
        },
    ];
    let domain = Hypercube::new(vec![-1.0], vec![1.0]).unwrap();
    generate_from_regimes(&regimes, &domain, n, sigma, seed).unwrap()
}

#[test]
fn globally_linear_data_gives_one_model() {
    let ds = line(5000, 3.0, 0.1, 1);
    let ms = run_mmlr(&ds, &MmlrConfig::default()).unwrap();
    assert_eq!(ms.m(), 1);
    assert!(ms.stats.global_accepted);
    assert!((ms.entries[0].model.coeffs[0] - 3.0).abs() < 0.05);
    ms.check_invariants(&ds).unwrap();
}

#[test]
fn one_model_budget_is_the_global_fit() {
    let d = two_regimes(5000, 0.05, 2);
    let cfg = MmlrConfig {
        max_models: 1,
        ..MmlrConfig::default()
    };
    let ms = run_mmlr(&d.dataset, &cfg).unwrap();
    assert_eq!(ms.m(), 1);
    assert_eq!(ms.entries[0].model, linalg::ols_fit(&d.dataset, true).unwrap());
}

#[test]
fn two_regimes_are_recovered() {
    let d = two_regimes(20_000, 0.05, 3);
    let cfg = MmlrConfig {
        min_remaining: MinRemaining::Fraction(0.02),
        seed: 3,
        ..MmlrConfig::default()
    };
    let ms = run_mmlr(&d.dataset, &cfg).unwrap();
    ms.check_invariants(&d.dataset).unwrap();
    assert!((2..=4).contains(&ms.m()), "m = {}", ms.m());
    let mut by_size: Vec<&ModelEntry> = ms.entries.iter().collect();
    by_size.sort_by_key(|e| std::cmp::Reverse(e.rows.len()));
    let mut slopes = [by_size[0].model.coeffs[0], by_size[1].model.coeffs[0]];
    slopes.sort_by(f64::total_cmp);
    assert!((slopes[0] + 1.0).abs() < 0.1, "{slopes:?}");
    assert!((slopes[1] - 2.0).abs() < 0.1, "{slopes:?}");
}

#[test]
fn invariants_and_determinism_on_random_configs() {
    for seed in 0..6u64 {
        let k = 1 + (seed as usize % 3);
        let spec = SynthSpec::new(3000 + 500 * seed as usize, k, 1 + seed as usize % 4, 0.2, seed);
        let d = synth::generate(&spec).unwrap();
        let cfg = MmlrConfig {
            max_models: 3 + seed as usize,
            seed,
            ..MmlrConfig::default()
        };
        let a = run_mmlr(&d.dataset, &cfg).unwrap();
        a.check_invariants(&d.dataset).unwrap();
        assert_eq!(a, run_mmlr(&d.dataset, &cfg).unwrap());
    }
}

#[test]
fn shrinkage_per_iteration() {
    let spec = SynthSpec::new(20_000, 2, 5, 0.1, 9);
    let d = synth::generate(&spec).unwrap();
    let ms = run_mmlr(&d.dataset, &MmlrConfig::default()).unwrap();
    for e in ms.entries.iter().filter(|e| !e.residual) {
        assert!(e.rows.len() >= min_subset_size(2));
    }
}

#[test]
fn noiseless_piecewise_fit_is_exact() {
    let d = two_regimes(4000, 0.0, 4);
    let ms = run_mmlr(&d.dataset, &MmlrConfig::default()).unwrap();
    ms.check_invariants(&d.dataset).unwrap();
    let mse = training_mse(&ms, &d.dataset).unwrap();
    assert!(mse < 1e-18, "mse {mse}, m {}", ms.m());
}

#[test]
fn single_model_mse_identity() {
    let ds = line(2000, -1.0, 0.3, 5);
    let ms = run_mmlr(&ds, &MmlrConfig::default()).unwrap();
    assert_eq!(ms.m(), 1);
    let expect = ds.n() as f64 * linalg::residual_variance(&ms.entries[0].model, &ds).unwrap();
    let got = training_mse(&ms, &ds).unwrap();
    assert!((got - expect).abs() <= 1e-12 * expect);
    assert_eq!(got, ms.stats.mse);
}

fn tiny_fixture(seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let xs: Vec<f64> = (0..12).map(|i| i as f64 + r.random_range(-0.2..0.2)).collect();
    let ys = xs
        .iter()
        .map(|&x| if x < 6.0 { 2.0 * x } else { 30.0 - 3.0 * x } + r.random_range(-0.3..0.3))
        .collect();
    Dataset::new(xs, 1, ys).unwrap()
}

fn tiny_config(seed: u64) -> MmlrConfig {
    MmlrConfig {
        max_models: 3,
        min_remaining: MinRemaining::Rows(3),
        min_subset_size: Some(3),
        seed,
        ..MmlrConfig::default()
    }
}

#[test]
fn tiny_mse_matches_per_block_recomputation() {
    let ds = tiny_fixture(6);
    let ms = run_mmlr(&ds, &tiny_config(6)).unwrap();
    ms.check_invariants(&ds).unwrap();
    let mut total = 0.0;
    for e in &ms.entries {
        for &i in e.rows.iter() {
            let x = ds.row(i)[0];
            let fx = e.model.intercept + e.model.coeffs[0] * x;
            total += (ds.y(i) - fx) * (ds.y(i) - fx);
        }
    }
    let got = training_mse(&ms, &ds).unwrap();
    assert!((got - total).abs() <= 1e-12 * total.max(1.0));
}

#[test]
fn oracle_partition_is_a_lower_bound() {
    let mut compared = 0;
    for seed in 0..20 {
        let ds = tiny_fixture(seed);
        let ms = run_mmlr(&ds, &tiny_config(seed)).unwrap();
        let smallest = ms.entries.iter().map(|e| e.rows.len()).min().unwrap();
        if smallest < ds.k() + 2 {
            continue;
        }
        let (_, oracle) = synth::oracle_best_partition(&ds, ms.m(), smallest).unwrap();
        let mse = training_mse(&ms, &ds).unwrap();
        assert!(oracle <= mse + 1e-9, "seed {seed}: oracle {oracle} > mmlr {mse}");
        compared += 1;
    }
    assert!(compared >= 5);
}

#[test]
fn prediction_rules() {
    let ds = line(500, 2.0, 0.1, 7);
    let ms = run_mmlr(&ds, &MmlrConfig::default()).unwrap();
    assert_eq!(predict(&ms, &ds, &[0.25]).unwrap(), ms.entries[0].model.predict(&[0.25]));
    assert!(predict(&ms, &ds, &[0.25, 1.0]).is_err());

    let d = two_regimes(20_000, 0.05, 8);
    let ms = run_mmlr(&d.dataset, &MmlrConfig::default()).unwrap();
    let owner = ms.assignment().unwrap();
    let predictor = Predictor::new(&ms, &d.dataset).unwrap();
    for i in (0..d.dataset.n()).step_by(997) {
        let x = d.dataset.row(i);
        let expect = ms.entries[owner[i]].model.predict(x);
        assert_eq!(predict(&ms, &d.dataset, x).unwrap(), expect);
        assert_eq!(predictor.predict(x).unwrap(), expect);
    }
    // deep inside the left regime
    let left = ms.entries[predictor.entry_for(&[-0.3]).unwrap()].model.clone();
    assert!((left.coeffs[0] - 2.0).abs() < 0.1);
    let right = ms.entries[predictor.entry_for(&[0.5]).unwrap()].model.clone();
    assert!((right.coeffs[0] + 1.0).abs() < 0.1);
}

#[test]
fn kd_tree_agrees_with_brute_force() {
    let spec = SynthSpec::new(3000, 3, 3, 0.2, 10);
    let d = synth::generate(&spec).unwrap();
    let ms = run_mmlr(&d.dataset, &MmlrConfig::default()).unwrap();
    let predictor = Predictor::new(&ms, &d.dataset).unwrap();
    let mut r = rng::rng(11);
    for _ in 0..300 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..11.0)).collect();
        assert_eq!(predictor.predict(&x).unwrap(), predict(&ms, &d.dataset, &x).unwrap());
    }
}

#[test]
fn ties_go_to_lower_entry() {
    // rows 0 and 1 are equidistant from the query and owned by different entries
    let ds = Dataset::new(vec![0.0, 2.0, 5.0], 1, vec![0.0, 1.0, 2.0]).unwrap();
    let entry = |rows: Vec<usize>, intercept: f64| ModelEntry {
        model: LinearModel::constant(&ds, &rows),
        rows: RowIndexSet::new(rows.clone()),
        sampled: RowIndexSet::new(rows),
        absorb_bound: 0.0,
        certified: false,
        residual: false,
    }
    .with_intercept(intercept);
    let ms = ModelSet {
        entries: vec![entry(vec![1, 2], 10.0), entry(vec![0], 20.0)],
        n_total: 3,
        config: MmlrConfig::default(),
        stats: RunStats::default(),
    };
    assert_eq!(predict(&ms, &ds, &[1.0]).unwrap(), 10.0);
    assert_eq!(Predictor::new(&ms, &ds).unwrap().predict(&[1.0]).unwrap(), 10.0);
}

impl ModelEntry {
    fn with_intercept(mut self, b: f64) -> Self {
        self.model.intercept = b;
        self
    }
}

#[test]
fn json_round_trip_and_no_rows() {
    let d = two_regimes(3000, 0.05, 12);
    let ms = run_mmlr(&d.dataset, &MmlrConfig::default()).unwrap();
    let json = ms.to_json(true).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["stats"]["m"].as_u64().unwrap() as usize, ms.m());
    assert!(v["models"][0]["rows"].is_array());
    assert!(v["models"][0]["fit_bound"].is_number());
    let back: ModelSet = serde_json::from_str(&json).unwrap();
    assert_eq!(back.entries.len(), ms.m());
    for (a, b) in back.entries.iter().zip(&ms.entries) {
        assert_eq!(a.model, b.model);
        assert_eq!(a.rows, b.rows);
    }
    assert_eq!(back.config, ms.config);

    let slim: serde_json::Value = serde_json::from_str(&ms.to_json(false).unwrap()).unwrap();
    assert!(slim["models"][0].get("rows").is_none());
    assert!(slim["models"][0]["coeffs"].is_array());
}

#[test]
fn config_and_size_errors() {
    let ds = line(500, 1.0, 0.1, 13);
    let bad = [
        MmlrConfig { epsilon: 0.0, ..MmlrConfig::default() },
        MmlrConfig { delta: 1.0, ..MmlrConfig::default() },
        MmlrConfig { max_models: 0, ..MmlrConfig::default() },
        MmlrConfig { p_gate: 0.0, ..MmlrConfig::default() },
        MmlrConfig { sigma_override: Some(-1.0), ..MmlrConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(run_mmlr(&ds, &cfg), Err(Error::Domain(_))));
    }
    let small = line(40, 1.0, 0.1, 14);
    assert!(matches!(run_mmlr(&small, &MmlrConfig::default()), Err(Error::TooFewRows { .. })));
}

#[test]
fn min_remaining_resolution() {
    assert_eq!(MinRemaining::Default.resolve(1000, 2, 65), 130);
    assert_eq!(MinRemaining::Rows(10).resolve(1000, 2, 65), 65);
    assert_eq!(MinRemaining::Fraction(0.02).resolve(100_000, 1, 65), 2000);
}
