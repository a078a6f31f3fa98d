use proptest::prelude::*;

use mmlr::eval::{compare_methods, label_agreement};
use mmlr::mmlr::{predict, run_mmlr, training_mse, MmlrConfig, ModelSet, Predictor};
use mmlr::synth::{generate, SynthSpec};

#[test]
fn csv_round_trip_fit_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SynthSpec::new(8_000, 2, 3, 0.05, 17)).unwrap();
    let csv = dir.path().join("d.csv");
    mmlr::write_csv(&data.dataset, &csv).unwrap();
    let ds = mmlr::load_csv(&csv, None).unwrap();
    assert_eq!(ds, data.dataset);

    let ms = run_mmlr(&ds, &MmlrConfig::default()).unwrap();
    ms.check_invariants(&ds).unwrap();
    let back: ModelSet = serde_json::from_str(&ms.to_json(true).unwrap()).unwrap();
    assert_eq!(back.m(), ms.m());
    assert_eq!(training_mse(&back, &ds).unwrap(), training_mse(&ms, &ds).unwrap());

    let predictor = Predictor::new(&back, &ds).unwrap();
    for i in (0..ds.n()).step_by(401) {
        let x = ds.row(i);
        assert_eq!(predictor.predict(x).unwrap(), predict(&ms, &ds, x).unwrap());
    }
}

#[test]
fn regimes_are_found_on_generated_data() {
    let data = generate(&SynthSpec::new(40_000, 1, 3, 0.05, 2)).unwrap();
    let ms = run_mmlr(&data.dataset, &MmlrConfig::default()).unwrap();
    assert!(ms.m() >= 3);
    assert!(label_agreement(&ms, &data.labels).unwrap() > 0.8);
}

#[test]
fn single_regime_matches_linear_regression() {
    let data = generate(&SynthSpec::new(20_000, 2, 1, 0.2, 3)).unwrap();
    let r = compare_methods(&data.dataset, &MmlrConfig::default(), 0.2, 3).unwrap();
    assert_eq!(r[0].m_models, 1);
    assert!((r[0].rmse - r[1].rmse).abs() <= 0.05 * r[1].rmse);
    assert_eq!(
        compare_methods(&data.dataset, &MmlrConfig::default(), 0.2, 3).unwrap()[0].rmse,
        r[0].rmse
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_run_partitions_the_rows(
        n in 400usize..4_000,
        k in 1usize..=3,
        m in 1usize..=3,
        sigma in 0.0f64..0.5,
        max_models in 1usize..8,
        seed in 0u64..1_000,
    ) {
        let n = n.max(m * 3 * 65);
        let data = generate(&SynthSpec::new(n, k, m, sigma, seed)).unwrap();
        let cfg = MmlrConfig { max_models, seed, ..MmlrConfig::default() };
        let ms = run_mmlr(&data.dataset, &cfg).unwrap();
        prop_assert!(ms.check_invariants(&data.dataset).is_ok());
        prop_assert!(ms.m() <= max_models);
        let total: usize = ms.entries.iter().map(|e| e.rows.len()).sum();
        prop_assert_eq!(total, n);
    }
}
