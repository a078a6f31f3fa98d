//! Monte Carlo checks of the estimator guarantees: coefficient coverage of
//! the direct and grouped estimators, their error variances, the strict
//! sample-size shortcut, and the `x'x` concentration bound behind the edge
//! length.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{fit_direct_sample, fit_grouped_average, plan_sample_size, plan_sample_size_strict, SampleSizePlan};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::LinearModel;
use crate::rng;

/// Known-truth linear model sampled on `[-half_width, half_width]^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSetup {
    pub k: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub half_width: f64,
    /// Rows per simulated dataset; estimators sample from it.
    pub pool_size: usize,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl Default for CoverageSetup {
    fn default() -> Self {
        CoverageSetup {
            k: 2,
            sigma: 1.0,
            epsilon: 0.2,
            delta: 0.05,
            half_width: 20.0,
            pool_size: 2000,
            beta: vec![1.5, -0.7],
            intercept: 2.0,
        }
    }
}

impl CoverageSetup {
    /// One dataset of `n` rows drawn from the setup's model.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Dataset> {
        if self.beta.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: self.beta.len(),
            });
        }
        let mut r = rng::rng(seed);
        let mut feats = Vec::with_capacity(n * self.k);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let mut y = self.intercept;
            for b in &self.beta {
                let x = r.random_range(-self.half_width..=self.half_width);
                y += b * x;
                feats.push(x);
            }
            ys.push(y + self.sigma * r.sample::<f64, _>(StandardNormal));
        }
        Dataset::new(feats, self.k, ys)
    }
}

/// `max_j |beta_hat_j - beta_j|` over the slope coefficients.
pub fn max_coeff_error(model: &LinearModel, beta: &[f64]) -> f64 {
    model
        .coeffs
        .iter()
        .zip(beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub plan: SampleSizePlan,
    pub direct_failure_rate: f64,
    pub grouped_failure_rate: f64,
    /// Variance over trials of the max coefficient error.
    pub direct_error_variance: f64,
    pub grouped_error_variance: f64,
}

/// Paired simulation: each trial draws one dataset and fits both estimators
/// with the plan from [`plan_sample_size`].
pub fn coverage_trials(setup: &CoverageSetup, trials: usize, seed: u64) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    let plan = plan_sample_size(setup.epsilon, setup.delta, setup.sigma, setup.k)?;
    let pool = setup.pool_size.max(plan.n_s);
    let mut direct = Vec::with_capacity(trials);
    let mut grouped = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let ds = setup.draw(pool, rng::derive(seed, &[rng::TRIAL, t, 0]))?;
        let fit_seed = rng::derive(seed, &[rng::TRIAL, t, 1]);
        direct.push(max_coeff_error(&fit_direct_sample(&ds, &plan, fit_seed)?, &setup.beta));
        grouped.push(max_coeff_error(&fit_grouped_average(&ds, &plan, fit_seed)?, &setup.beta));
    }
    Ok(CoverageReport {
        trials,
        direct_failure_rate: failure_rate(&direct, setup.epsilon),
        grouped_failure_rate: failure_rate(&grouped, setup.epsilon),
        direct_error_variance: variance(&direct),
        grouped_error_variance: variance(&grouped),
        plan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictReport {
    pub trials: usize,
    pub plan: SampleSizePlan,
    pub failure_rate: f64,
}

/// Coverage of the direct estimator with the `delta = 1e-6` shortcut plan
/// (`nu = 1`). Every trial fits all `n_s` rows of a fresh dataset.
pub fn strict_coverage_trials(setup: &CoverageSetup, trials: usize, seed: u64) -> Result<StrictReport> {
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    let plan = plan_sample_size_strict(setup.epsilon, setup.k, 1.0)?;
    let mut errors = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let ds = setup.draw(plan.n_s, rng::derive(seed, &[rng::TRIAL, t, 2]))?;
        let m = fit_direct_sample(&ds, &plan, rng::derive(seed, &[rng::TRIAL, t, 3]))?;
        errors.push(max_coeff_error(&m, &setup.beta));
    }
    Ok(StrictReport {
        trials,
        failure_rate: failure_rate(&errors, setup.epsilon),
        plan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma32Report {
    pub trials: usize,
    pub n: usize,
    pub edge: f64,
    /// Fraction of trials with `x'x >= n L^2 / 24`.
    pub empirical: f64,
    /// Chebyshev lower bound `1 - 16 / (5n)`.
    pub bound: f64,
}

/// Draws `x ~ U[-L/2, L/2]^n` and counts how often `x'x >= n L^2 / 24`.
pub fn lemma32_trials(n: usize, edge: f64, trials: usize, seed: u64) -> Result<Lemma32Report> {
    if n == 0 || trials == 0 {
        return Err(Error::domain("n and trials must be positive"));
    }
    if !(edge > 0.0 && edge.is_finite()) {
        return Err(Error::domain(format!("edge must be positive, got {edge}")));
    }
    let mut r = rng::rng_at(seed, &[rng::TRIAL]);
    let threshold = n as f64 * edge * edge / 24.0;
    let half = edge / 2.0;
    let hits = (0..trials)
        .filter(|_| {
            let xx: f64 = (0..n).map(|_| r.random_range(-half..=half).powi(2)).sum();
            xx >= threshold
        })
        .count();
    Ok(Lemma32Report {
        trials,
        n,
        edge,
        empirical: hits as f64 / trials as f64,
        bound: 1.0 - 16.0 / (5.0 * n as f64),
    })
}

fn failure_rate(errors: &[f64], epsilon: f64) -> f64 {
    errors.iter().filter(|&&e| e >= epsilon).count() as f64 / errors.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}
