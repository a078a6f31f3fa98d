//! Monte Carlo comparison of the two sample estimators: one fit on all sampled
//! rows against the average of per-group fits.

use mmlr::sampling::validate::{coverage_trials, lemma32_trials, CoverageSetup};

fn main() -> mmlr::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let setup = CoverageSetup::default();
    let r = coverage_trials(&setup, trials, 1)?;
    println!(
        "k = {}, sigma = {}, epsilon = {}, delta = {}: n_s = {} in {} groups of {}",
        setup.k, setup.sigma, setup.epsilon, setup.delta, r.plan.n_s, r.plan.t_groups, r.plan.p_group
    );
    println!("{:<16} {:>12} {:>14}", "estimator", "P(err >= e)", "var(max err)");
    println!("{:<16} {:>12.4} {:>14.3e}", "direct sample", r.direct_failure_rate, r.direct_error_variance);
    println!("{:<16} {:>12.4} {:>14.3e}", "grouped average", r.grouped_failure_rate, r.grouped_error_variance);

    let l = lemma32_trials(100, 1.0, 10_000, 2)?;
    println!(
        "\nuniform design, n = {}, L = {}: P(x'x >= nL^2/24) = {:.4} (bound {:.4})",
        l.n, l.edge, l.empirical, l.bound
    );
    Ok(())
}
