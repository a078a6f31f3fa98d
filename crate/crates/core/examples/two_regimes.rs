//! Two linear regimes on one axis: `y = 1 + 2x` left of zero and `y = -1 - x`
//! right of it. MMLR should find both lines and separate their rows.

use std::time::Instant;

use mmlr::mmlr::{run_mmlr, MinRemaining, MmlrConfig};
use mmlr::sampling::Hypercube;
use mmlr::synth::{generate_from_regimes, RegimeSpec};

fn main() -> mmlr::Result<()> {
    let regimes = vec![
        RegimeSpec {
            region: Hypercube::new(vec![-1.0], vec![0.0])?,
            beta: vec![2.0],
            intercept: 1.0,
        },
        RegimeSpec {
            region: Hypercube::new(vec![0.0], vec![1.0])?,
            beta: vec![-1.0],
            intercept: -1.0,
        },
    ];
    let domain = Hypercube::new(vec![-1.0], vec![1.0])?;
    let data = generate_from_regimes(&regimes, &domain, 100_000, 0.05, 42)?;

    let cfg = MmlrConfig {
        epsilon: 0.1,
        delta: 0.05,
        max_models: 10,
        min_remaining: MinRemaining::Fraction(0.02),
        seed: std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7),
        ..MmlrConfig::default()
    };
    let start = Instant::now();
    let ms = run_mmlr(&data.dataset, &cfg)?;
    let secs = start.elapsed().as_secs_f64();

    println!(
        "m = {}  sigma_hat = {:.4}  n_s = {}  L = {:.3}  ({secs:.2} s)",
        ms.m(),
        ms.stats.sigma_sq_hat.sqrt(),
        ms.stats.n_s,
        ms.stats.edge_length
    );
    for (i, e) in ms.entries.iter().enumerate() {
        let left = e.rows.iter().filter(|&&r| data.labels[r] == 0).count();
        println!(
            "model {i}: y = {:+.4} {:+.4} x  rows {:>6} ({} from the left regime)  certified {}",
            e.model.intercept,
            e.model.coeffs[0],
            e.rows.len(),
            left,
            e.certified
        );
    }
    let agreement = mmlr::eval::label_agreement(&ms, &data.labels)?;
    println!("rows grouped with their regime: {:.2}%", 100.0 * agreement);
    Ok(())
}
