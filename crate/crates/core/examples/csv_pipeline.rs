//! CSV in, model set JSON out, then predictions for new points.
//!
//! Pass a CSV path to use your own data (last column is the response);
//! otherwise a synthetic file is written first.

use std::path::PathBuf;

use mmlr::mmlr::{run_mmlr, training_mse, MmlrConfig, Predictor};
use mmlr::synth::{generate, SynthSpec};

fn main() -> mmlr::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("mmlr_pipeline.csv");
            mmlr::write_csv(&generate(&SynthSpec::new(30_000, 2, 4, 0.1, 1))?.dataset, &p)?;
            p
        }
    };
    let ds = mmlr::load_csv(&path, None)?;
    println!("{}: {} rows, features {:?}", path.display(), ds.n(), ds.feature_names());

    let ms = run_mmlr(&ds, &MmlrConfig::default())?;
    ms.check_invariants(&ds)?;
    // a noise estimate far above the real noise means the neighborhoods were
    // wider than the regimes; pass the known value via sigma_override then
    println!(
        "m = {}, noise sd estimate {:.4}, training SSE = {:.4}",
        ms.m(),
        ms.stats.sigma_sq_hat.sqrt(),
        training_mse(&ms, &ds)?
    );

    let out = path.with_extension("models.json");
    std::fs::write(&out, ms.to_json(false)?).map_err(|e| mmlr::Error::Io { path: out.clone(), source: e })?;
    println!("model set written to {}", out.display());

    let predictor = Predictor::new(&ms, &ds)?;
    let lo = ds.col_min();
    let hi = ds.col_max();
    for t in [0.1, 0.5, 0.9] {
        let x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l + t * (h - l)).collect();
        println!(
            "x = {:?}: model {} predicts {:.4}",
            x,
            predictor.entry_for(&x)?,
            predictor.predict(&x)?
        );
    }
    Ok(())
}
