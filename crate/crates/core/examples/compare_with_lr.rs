//! MMLR against a single linear model on a five-regime plane, scored on a
//! 20% holdout and in-sample.

use mmlr::eval::{compare_methods_with, reports_csv, EvalMode};
use mmlr::mmlr::{MinRemaining, MmlrConfig};
use mmlr::synth::{generate, SynthSpec};

fn main() -> mmlr::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spec = SynthSpec::new(200_000, 2, 5, 0.1, seed);
    let data = generate(&spec)?;
    for r in &data.truth {
        println!(
            "regime x1 in [{:.2}, {:.2}): y = {:+.2} {:+.2} x1 {:+.2} x2",
            r.region.lo[0], r.region.hi[0], r.intercept, r.beta[0], r.beta[1]
        );
    }

    let cfg = MmlrConfig {
        epsilon: 0.1,
        delta: 0.05,
        max_models: 20,
        min_remaining: MinRemaining::Fraction(0.02),
        seed,
        ..MmlrConfig::default()
    };
    let mut reports = compare_methods_with(&data.dataset, &cfg, EvalMode::Holdout(0.2), seed, "holdout")?;
    reports.extend(compare_methods_with(&data.dataset, &cfg, EvalMode::Train, seed, "train")?);
    print!("{}", reports_csv(&reports));
    Ok(())
}
