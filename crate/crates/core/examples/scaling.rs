//! Wall time of MMLR on growing datasets that share the same five regimes.
//! A log-log slope near 1 means linear time in the number of rows.

use mmlr::eval::{scaling_benchmark, scaling_plot_csv};
use mmlr::mmlr::{MinRemaining, MmlrConfig};
use mmlr::synth::SynthSpec;

fn main() -> mmlr::Result<()> {
    let spec = SynthSpec::new(0, 2, 5, 0.1, 11);
    let cfg = MmlrConfig {
        max_models: 20,
        min_remaining: MinRemaining::Fraction(0.02),
        seed: 11,
        ..MmlrConfig::default()
    };
    let sizes = [100_000, 200_000, 400_000];
    let report = scaling_benchmark(&spec, &sizes, &cfg, 3)?;
    for r in &report.rows {
        println!("n = {:>7}  {:.4} s  m = {}", r.n, r.wall_time_s, r.m_models);
    }
    for (w, ratio) in sizes.windows(2).zip(&report.ratios) {
        println!("{} -> {}: x{ratio:.2}", w[0], w[1]);
    }
    if let Some(s) = report.slope {
        println!("log-log slope {s:.3}");
    }
    print!("{}", scaling_plot_csv(&report));
    Ok(())
}
