//! Draw a piecewise linear dataset, write it with its ground truth, and check
//! that refitting each regime's rows recovers the true coefficients.

use mmlr::synth::{generate, SynthSpec};

fn main() -> mmlr::Result<()> {
    let spec = SynthSpec::new(5_000, 2, 3, 0.0, 21);
    let data = generate(&spec)?;

    let dir = std::env::temp_dir();
    let csv = dir.join("mmlr_synthetic.csv");
    let truth = dir.join("mmlr_synthetic_truth.json");
    mmlr::write_csv(&data.dataset, &csv)?;
    data.write_truth(&truth)?;
    println!("wrote {} and {}", csv.display(), truth.display());

    for (r, regime) in data.truth.iter().enumerate() {
        let rows = data.rows_of(r);
        let fit = mmlr::ols_fit_rows(&data.dataset, rows.as_slice(), true)?;
        println!(
            "regime {r}: x0 in [{:.2}, {:.2}], {} rows, true beta {:?}, refit {:?}",
            regime.region.lo[0],
            regime.region.hi[0],
            rows.len(),
            regime.beta.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>(),
            fit.coeffs.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>(),
        );
    }
    Ok(())
}
