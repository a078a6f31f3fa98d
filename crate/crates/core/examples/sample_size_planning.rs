//! How many rows a local model needs, and how wide its seed cube must be, for
//! a few accuracy targets.

use mmlr::sampling::{plan_edge_length, plan_sample_size, plan_sample_size_strict, sample_size_for_edge};

fn main() -> mmlr::Result<()> {
    let sigma = 1.0;
    println!(
        "{:>7} {:>6} {:>3} {:>4} {:>6} {:>9} {:>14}",
        "epsilon", "delta", "k", "t", "n_s", "edge L", "rows for L"
    );
    for &(epsilon, delta, k) in &[(0.2, 0.05, 2), (0.1, 0.05, 2), (0.05, 0.05, 2), (0.1, 0.01, 5), (0.02, 0.05, 1)] {
        let plan = plan_sample_size(epsilon, delta, sigma, k)?;
        let edge = plan_edge_length(epsilon, delta, sigma, plan.n_s)?;
        // inverting the edge bound gives back n_s, up to rounding
        let back = sample_size_for_edge(epsilon, delta, sigma, edge)?;
        println!(
            "{epsilon:>7} {delta:>6} {k:>3} {:>4} {:>6} {edge:>9.3} {back:>14}",
            plan.t_groups, plan.n_s
        );
    }

    let strict = plan_sample_size_strict(0.1, 2, 1.0)?;
    println!(
        "\nshortcut plan for delta = {}: t = {}, n_s = {}",
        strict.delta, strict.t_groups, strict.n_s
    );
    Ok(())
}
