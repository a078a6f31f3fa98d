//! Error metrics, the comparison against a single linear model, the scaling
//! benchmark and report writers.

use std::time::Instant;

use serde::Serialize;

use crate::dataset::{Dataset, RowIndexSet};
use crate::error::{Error, Result};
use crate::format::{self, g17};
use crate::linalg;
use crate::mmlr::{run_mmlr, MmlrConfig, ModelSet, Predictor};
use crate::rng;
use crate::sampling::sample_without_replacement;
use crate::synth::{self, SynthSpec};

pub const METHOD_MMLR: &str = "MMLR";
pub const METHOD_LR: &str = "LR";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub rmse: f64,
    pub mae: f64,
    pub wall_time_s: f64,
    pub m_models: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
}

/// Root mean squared error and mean absolute error.
pub fn rmse_mae(predictions: &[f64], truths: &[f64]) -> Result<(f64, f64)> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = predictions.len() as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, t) in predictions.iter().zip(truths) {
        let e = p - t;
        sq += e * e;
        abs += e.abs();
    }
    Ok(((sq / n).sqrt(), abs / n))
}

/// Fraction of rows whose generator label is the most common label of the
/// entry they were assigned to.
pub fn label_agreement(ms: &ModelSet, labels: &[usize]) -> Result<f64> {
    if labels.len() != ms.n_total {
        return Err(Error::LengthMismatch(labels.len(), ms.n_total));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n_labels = labels.iter().max().map_or(0, |l| l + 1);
    let mut agree = 0;
    for e in &ms.entries {
        let mut counts = vec![0usize; n_labels];
        e.rows.iter().for_each(|&i| counts[labels[i]] += 1);
        agree += counts.iter().max().copied().unwrap_or(0);
    }
    Ok(agree as f64 / labels.len() as f64)
}

/// How the comparison measures error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Fit on a seeded split and score the held-out fraction.
    Holdout(f64),
    /// Fit and score on all rows.
    Train,
}

/// Seeded split of `0..n` into (train, test); the test part has
/// `round(n * fraction)` rows.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> (RowIndexSet, RowIndexSet) {
    let n_test = (n as f64 * fraction).round() as usize;
    let mut r = rng::rng_at(seed, &[rng::SPLIT]);
    let all: Vec<usize> = (0..n).collect();
    let test = sample_without_replacement(&all, n_test, &mut r);
    let mut t = 0;
    let train = all
        .into_iter()
        .filter(|&i| {
            if t < test.len() && test[t] == i {
                t += 1;
                false
            } else {
                true
            }
        })
        .collect();
    (
        RowIndexSet::from_sorted(train).expect("ascending"),
        RowIndexSet::from_sorted(test).expect("ascending"),
    )
}

/// MMLR against one global linear model with a default 20% style holdout.
pub fn compare_methods(ds: &Dataset, cfg: &MmlrConfig, holdout_fraction: f64, seed: u64) -> Result<Vec<EvalReport>> {
    compare_methods_with(ds, cfg, EvalMode::Holdout(holdout_fraction), seed, "dataset")
}

pub fn compare_methods_with(
    ds: &Dataset,
    cfg: &MmlrConfig,
    mode: EvalMode,
    seed: u64,
    name: &str,
) -> Result<Vec<EvalReport>> {
    let (train, test) = match mode {
        EvalMode::Holdout(f) => {
            if !(f > 0.0 && f <= 0.5) {
                return Err(Error::domain(format!("holdout fraction must lie in (0, 0.5], got {f}")));
            }
            let (train, test) = split_rows(ds.n(), f, seed);
            if test.is_empty() {
                return Err(Error::TooFewRows {
                    needed: (1.0 / f).ceil() as usize,
                    found: ds.n(),
                });
            }
            (ds.subset_view(&train)?, ds.subset_view(&test)?)
        }
        EvalMode::Train => (ds.clone(), ds.clone()),
    };
    let truths = test.response();

    let start = Instant::now();
    let ms = run_mmlr(&train, cfg)?;
    let mmlr_fit = start.elapsed().as_secs_f64();
    let predictor = Predictor::new(&ms, &train)?;
    let mmlr_pred = predictor.predict_all(&test)?;
    let (rmse, mae) = rmse_mae(&mmlr_pred, truths)?;

    let start = Instant::now();
    let lr = linalg::ols_fit(&train, true)?;
    let lr_fit = start.elapsed().as_secs_f64();
    let lr_pred: Vec<f64> = (0..test.n()).map(|i| lr.predict(test.row(i))).collect();
    let (lr_rmse, lr_mae) = rmse_mae(&lr_pred, truths)?;

    let report = |method: &str, rmse, mae, wall_time_s, m_models| EvalReport {
        method: method.into(),
        dataset: name.into(),
        rmse,
        mae,
        wall_time_s,
        m_models,
        seed,
        n_train: train.n(),
        n_eval: test.n(),
    };
    Ok(vec![
        report(METHOD_MMLR, rmse, mae, mmlr_fit, ms.m()),
        report(METHOD_LR, lr_rmse, lr_mae, lr_fit, 1),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Median over the repetitions.
    pub wall_time_s: f64,
    pub m_models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Time ratio between consecutive sizes.
    pub ratios: Vec<f64>,
    /// Slope of log time against log n; absent for a single size.
    pub slope: Option<f64>,
}

/// Times [`run_mmlr`] on datasets of each size drawn with the regimes of
/// `spec_base`. Generation is not timed.
pub fn scaling_benchmark(spec_base: &SynthSpec, sizes: &[usize], cfg: &MmlrConfig, reps: usize) -> Result<ScalingReport> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("sizes must be strictly ascending"));
    }
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let spec = SynthSpec { n, ..spec_base.clone() };
        let data = synth::generate(&spec)?;
        let mut times = Vec::with_capacity(reps);
        let mut m_models = 0;
        for _ in 0..reps {
            let start = Instant::now();
            let ms = run_mmlr(&data.dataset, cfg)?;
            times.push(start.elapsed().as_secs_f64());
            m_models = ms.m();
        }
        times.sort_by(f64::total_cmp);
        rows.push(ScalingRow {
            n,
            wall_time_s: times[times.len() / 2],
            m_models,
        });
    }
    let ratios = rows.windows(2).map(|w| w[1].wall_time_s / w[0].wall_time_s).collect();
    let slope = if rows.len() >= 2 {
        let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.wall_time_s.max(1e-12).ln()).collect();
        Some(slope_of(&lx, &ly))
    } else {
        None
    };
    Ok(ScalingReport { rows, ratios, slope })
}

fn slope_of(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One CSV row per report.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,dataset,rmse,mae,m_models,seed,n_train,n_eval,wall_time_s\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.dataset,
            g17(r.rmse),
            g17(r.mae),
            r.m_models,
            r.seed,
            r.n_train,
            r.n_eval,
            g17(r.wall_time_s)
        ));
    }
    out
}

/// JSON with a `stable` section that is byte-identical across runs with the
/// same inputs, and a separate `timing` section.
pub fn reports_json(reports: &[EvalReport]) -> Result<String> {
    #[derive(Serialize)]
    struct Stable<'a> {
        method: &'a str,
        dataset: &'a str,
        rmse: f64,
        mae: f64,
        m_models: usize,
        seed: u64,
        n_train: usize,
        n_eval: usize,
    }
    #[derive(Serialize)]
    struct Timing<'a> {
        method: &'a str,
        dataset: &'a str,
        wall_time_s: f64,
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        stable: Vec<Stable<'a>>,
        timing: Vec<Timing<'a>>,
    }
    format::to_json(&Doc {
        stable: reports
            .iter()
            .map(|r| Stable {
                method: &r.method,
                dataset: &r.dataset,
                rmse: r.rmse,
                mae: r.mae,
                m_models: r.m_models,
                seed: r.seed,
                n_train: r.n_train,
                n_eval: r.n_eval,
            })
            .collect(),
        timing: reports
            .iter()
            .map(|r| Timing {
                method: &r.method,
                dataset: &r.dataset,
                wall_time_s: r.wall_time_s,
            })
            .collect(),
    })
}

/// Plot data for an error-by-method chart: `method,dataset,metric,value`.
pub fn comparison_plot_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,dataset,metric,value\n");
    for r in reports {
        for (metric, v) in [("rmse", r.rmse), ("mae", r.mae), ("time_s", r.wall_time_s)] {
            out.push_str(&format!("{},{},{metric},{}\n", r.method, r.dataset, g17(v)));
        }
    }
    out
}

/// Plot data for a time-by-size chart: `method,n,time_s`.
pub fn scaling_plot_csv(report: &ScalingReport) -> String {
    let mut out = String::from("method,n,time_s\n");
    for r in &report.rows {
        out.push_str(&format!("{METHOD_MMLR},{},{}\n", r.n, g17(r.wall_time_s)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn metric_hand_values() {
        assert_eq!(rmse_mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        let (rmse, mae) = rmse_mae(&[3.0, -4.0], &[0.0, 0.0]).unwrap();
        assert!((rmse - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae, 3.5);
        assert!(matches!(rmse_mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(rmse_mae(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn metrics_match_naive_loop() {
        let mut r = rng::rng(1);
        let p: Vec<f64> = (0..500).map(|_| r.random_range(-5.0..5.0)).collect();
        let t: Vec<f64> = (0..500).map(|_| r.random_range(-5.0..5.0)).collect();
        let (rmse, mae) = rmse_mae(&p, &t).unwrap();
        let mut sq = 0.0;
        let mut ab = 0.0;
        for i in 0..500 {
            sq += (p[i] - t[i]) * (p[i] - t[i]);
            ab += (p[i] - t[i]).abs();
        }
        assert!((rmse - (sq / 500.0).sqrt()).abs() <= 1e-12 * rmse);
        assert!((mae - ab / 500.0).abs() <= 1e-12 * mae);
        assert!((rmse * rmse * 500.0 - sq).abs() <= 1e-9 * sq);
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (train, test) = split_rows(1000, 0.2, 3);
        assert_eq!(test.len(), 200);
        assert_eq!(train.len(), 800);
        assert!(test.iter().all(|&i| !train.contains(i)));
        assert_eq!(split_rows(1000, 0.2, 3), (train.clone(), test.clone()));
        assert_ne!(split_rows(1000, 0.2, 4).1, test);
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = [3.0f64, 6.0, 12.0].iter().map(|v| v.ln()).collect();
        assert!((slope_of(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holdout_fraction_domain() {
        let spec = SynthSpec::new(500, 1, 1, 0.1, 1);
        let d = synth::generate(&spec).unwrap();
        let cfg = MmlrConfig::default();
        assert!(compare_methods(&d.dataset, &cfg, 0.0, 1).is_err());
        assert!(compare_methods(&d.dataset, &cfg, 0.6, 1).is_err());
    }

    #[test]
    fn single_regime_matches_lr_and_is_deterministic() {
        let spec = SynthSpec::new(5000, 2, 1, 0.2, 2);
        let d = synth::generate(&spec).unwrap();
        let cfg = MmlrConfig::default();
        let a = compare_methods(&d.dataset, &cfg, 0.2, 5).unwrap();
        assert_eq!(a[0].m_models, 1);
        assert!((a[0].rmse / a[1].rmse - 1.0).abs() <= 0.05);
        let b = compare_methods(&d.dataset, &cfg, 0.2, 5).unwrap();
        assert_eq!(reports_json(&a).unwrap().split("\"timing\"").next(), reports_json(&b).unwrap().split("\"timing\"").next());
    }

    #[test]
    fn writers_have_headers() {
        let r = EvalReport {
            method: "LR".into(),
            dataset: "d".into(),
            rmse: 0.5,
            mae: 0.25,
            wall_time_s: 0.1,
            m_models: 1,
            seed: 3,
            n_train: 8,
            n_eval: 2,
        };
        let csv = reports_csv(std::slice::from_ref(&r));
        assert_eq!(csv.lines().nth(1).unwrap(), "LR,d,0.5,0.25,1,3,8,2,0.10000000000000001");
        assert_eq!(comparison_plot_csv(&[r]).lines().count(), 4);
    }
}
