//! On a dozen rows every partition can be enumerated. The best one bounds
//! from below what any partition into the same number of blocks can reach.

use rand::Rng as _;

use mmlr::mmlr::{run_mmlr, training_mse, MinRemaining, MmlrConfig};
use mmlr::synth::oracle_best_partition;
use mmlr::Dataset;

fn main() -> mmlr::Result<()> {
    let mut r = mmlr::rng::rng(4);
    let xs: Vec<f64> = (0..12).map(|i| i as f64 + r.random_range(-0.2..0.2)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < 6.0 { 2.0 * x } else { 30.0 - 3.0 * x } + r.random_range(-0.3..0.3))
        .collect();
    let ds = Dataset::new(xs, 1, ys)?;

    let cfg = MmlrConfig {
        max_models: 3,
        min_remaining: MinRemaining::Rows(3),
        min_subset_size: Some(3),
        seed: 4,
        ..MmlrConfig::default()
    };
    let ms = run_mmlr(&ds, &cfg)?;
    let mse = training_mse(&ms, &ds)?;
    let smallest = ms.entries.iter().map(|e| e.rows.len()).min().unwrap_or(0);
    println!("MMLR: m = {}, SSE = {mse:.5}, smallest block {smallest}", ms.m());
    for e in &ms.entries {
        println!("  rows {:?}", e.rows.as_slice());
    }

    let (labels, best) = oracle_best_partition(&ds, ms.m(), smallest.max(ds.k() + 2))?;
    println!("oracle over {} blocks: SSE = {best:.5}, labels {labels:?}", ms.m());
    Ok(())
}
