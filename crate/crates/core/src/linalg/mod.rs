//! Least-squares fitting through the normal equations, residual variance,
//! the regression F-test, and the local noise-variance estimator.

mod special;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use special::{f_upper_tail, normal_cdf, normal_quantile, regularized_beta};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Pivot threshold of the unit-diagonal normal matrix.
const PIVOT_TOL: f64 = 1e-12;

/// A fitted linear model `f(x) = intercept + coeffs . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coeffs: Vec<f64>,
    /// Residual variance `r'r / n` on the fitting rows.
    pub sigma_f_sq: f64,
    /// Regression F-test p-value on the fitting rows.
    pub p_f: f64,
    /// Absorption threshold, always `3 * sqrt(sigma_f_sq)`.
    pub fit_bound: f64,
    pub n_fit: usize,
}

impl LinearModel {
    fn from_parts(intercept: f64, coeffs: Vec<f64>, sigma_f_sq: f64, p_f: f64, n_fit: usize) -> Self {
        let sigma_f_sq = sigma_f_sq.max(0.0);
        LinearModel {
            intercept,
            coeffs,
            sigma_f_sq,
            p_f,
            fit_bound: 3.0 * sigma_f_sq.sqrt(),
            n_fit,
        }
    }

    /// Intercept-only model through the mean of `rows`.
    ///
    /// Used when a set of rows is too small or too degenerate for a full fit.
    pub fn constant(ds: &Dataset, rows: &[usize]) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = rows.iter().map(|&i| ds.y(i)).sum::<f64>() / n;
        let sse = rows.iter().map(|&i| (ds.y(i) - mean).powi(2)).sum::<f64>();
        LinearModel::from_parts(mean, vec![0.0; ds.k()], sse / n, 1.0, rows.len())
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Ordinary least squares on every row of `ds`.
pub fn ols_fit(ds: &Dataset, with_intercept: bool) -> Result<LinearModel> {
    fit_rows(ds, None, with_intercept)
}

/// Ordinary least squares on the listed rows only, without copying them.
pub fn ols_fit_rows(ds: &Dataset, rows: &[usize], with_intercept: bool) -> Result<LinearModel> {
    fit_rows(ds, Some(rows), with_intercept)
}

fn fit_rows(ds: &Dataset, rows: Option<&[usize]>, with_intercept: bool) -> Result<LinearModel> {
    let k = ds.k();
    let n = rows.map_or(ds.n(), <[usize]>::len);
    if n < k + 2 {
        return Err(Error::TooFewRows {
            needed: k + 2,
            found: n,
        });
    }
    let for_each_row = |f: &mut dyn FnMut(&[f64], f64)| match rows {
        Some(rows) => rows.iter().for_each(|&i| f(ds.row(i), ds.y(i))),
        None => (0..ds.n()).for_each(|i| f(ds.row(i), ds.y(i))),
    };

    // centering makes the intercept drop out of the normal matrix
    let mut x_mean = vec![0.0; k];
    let mut y_mean = 0.0;
    if with_intercept {
        for_each_row(&mut |x, y| {
            x_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
            y_mean += y;
        });
        x_mean.iter_mut().for_each(|m| *m /= n as f64);
        y_mean /= n as f64;
    }

    let mut gram = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut sst = 0.0;
    let mut xc = vec![0.0; k];
    for_each_row(&mut |x, y| {
        for j in 0..k {
            xc[j] = x[j] - x_mean[j];
        }
        let yc = y - y_mean;
        for a in 0..k {
            let va = xc[a];
            xty[a] += va * yc;
            for b in a..k {
                gram[a * k + b] += va * xc[b];
            }
        }
        sst += yc * yc;
    });
    for a in 0..k {
        for b in 0..a {
            gram[a * k + b] = gram[b * k + a];
        }
    }

    let coeffs = solve_spd(&gram, &xty, k)?;
    let intercept = if with_intercept {
        y_mean - coeffs.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>()
    } else {
        0.0
    };

    let mut sse = 0.0;
    for_each_row(&mut |x, y| {
        let r = y - intercept - coeffs.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        sse += r * r;
    });

    let (df1, df2) = if with_intercept {
        (k as f64, (n - k - 1) as f64)
    } else {
        (k as f64, (n - k) as f64)
    };
    let p_f = f_test_from_sums(sse, sst, df1, df2);
    Ok(LinearModel::from_parts(intercept, coeffs, sse / n as f64, p_f, n))
}

/// Diagonal of `(X_c' X_c)^-1` for the centred design of `rows`: the slope
/// variances of an OLS fit are these factors times the noise variance.
pub fn slope_variance_factors(ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let k = ds.k();
    let n = rows.len();
    if n < k + 2 {
        return Err(Error::TooFewRows {
            needed: k + 2,
            found: n,
        });
    }
    let mut mean = vec![0.0; k];
    for &i in rows {
        mean.iter_mut().zip(ds.row(i)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut gram = vec![0.0; k * k];
    for &i in rows {
        let x = ds.row(i);
        for a in 0..k {
            let va = x[a] - mean[a];
            for b in a..k {
                gram[a * k + b] += va * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[a * k + b] = gram[b * k + a];
        }
    }
    (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            solve_spd(&gram, &e, k).map(|col| col[j])
        })
        .collect()
}

/// Solve `A x = b` for symmetric positive definite `A`.
///
/// `A` is first scaled to unit diagonal; a Cholesky pivot below [`PIVOT_TOL`]
/// reports the design as singular. One step of iterative refinement follows.
fn solve_spd(a: &[f64], b: &[f64], k: usize) -> Result<Vec<f64>> {
    let diag: Vec<f64> = (0..k).map(|j| a[j * k + j]).collect();
    let scale_ref = diag.iter().cloned().fold(0.0, f64::max);
    for &d in &diag {
        if !(d > scale_ref * f64::EPSILON) || !d.is_finite() {
            return Err(Error::SingularDesign {
                pivot: d,
                threshold: scale_ref * f64::EPSILON,
            });
        }
    }
    let s: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let scaled: Vec<f64> = (0..k * k).map(|idx| a[idx] * s[idx / k] * s[idx % k]).collect();

    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = scaled[i * k + j];
            for p in 0..j {
                sum -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(sum > PIVOT_TOL) {
                    return Err(Error::SingularDesign {
                        pivot: sum,
                        threshold: PIVOT_TOL,
                    });
                }
                l[i * k + i] = sum.sqrt();
            } else {
                l[i * k + j] = sum / l[j * k + j];
            }
        }
    }
    let chol_solve = |rhs: &[f64]| -> Vec<f64> {
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut sum = rhs[i];
            for p in 0..i {
                sum -= l[i * k + p] * z[p];
            }
            z[i] = sum / l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut sum = z[i];
            for p in i + 1..k {
                sum -= l[p * k + i] * z[p];
            }
            z[i] = sum / l[i * k + i];
        }
        z
    };

    let sb: Vec<f64> = b.iter().zip(&s).map(|(v, si)| v * si).collect();
    let mut x = chol_solve(&sb);
    let resid: Vec<f64> = (0..k)
        .map(|i| sb[i] - (0..k).map(|j| scaled[i * k + j] * x[j]).sum::<f64>())
        .collect();
    let corr = chol_solve(&resid);
    x.iter_mut().zip(&corr).for_each(|(xi, c)| *xi += c);
    Ok(x.iter().zip(&s).map(|(xi, si)| xi * si).collect())
}

fn f_test_from_sums(sse: f64, sst: f64, df1: f64, df2: f64) -> f64 {
    if !(sst > 0.0) {
        // constant response: nothing to certify
        return 1.0;
    }
    let ssr = (sst - sse).max(0.0);
    if !(sse > 0.0) {
        return 0.0;
    }
    let f = (ssr / df1) / (sse / df2);
    f_upper_tail(f, df1, df2)
}

fn check_dim(model: &LinearModel, ds: &Dataset) -> Result<()> {
    if model.k() != ds.k() {
        return Err(Error::DimensionMismatch {
            expected: ds.k(),
            found: model.k(),
        });
    }
    Ok(())
}

/// `(1/n) * sum (y - f(x))^2` over `ds`.
pub fn residual_variance(model: &LinearModel, ds: &Dataset) -> Result<f64> {
    check_dim(model, ds)?;
    Ok(sum_sq_residuals(model, ds, (0..ds.n()).collect::<Vec<_>>().as_slice()) / ds.n() as f64)
}

pub(crate) fn sum_sq_residuals(model: &LinearModel, ds: &Dataset, rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| (ds.y(i) - model.predict(ds.row(i))).powi(2))
        .sum()
}

/// Regression F-test p-value of `model` evaluated on `ds`.
///
/// `F = (SSR/k) / (SSE/(n-k-1))` with `SSR = SST - SSE`, compared against
/// `F(k, n-k-1)`. A constant response yields `1`.
pub fn f_test_pvalue(model: &LinearModel, ds: &Dataset) -> Result<f64> {
    check_dim(model, ds)?;
    let (n, k) = (ds.n(), ds.k());
    if n <= k + 1 {
        return Err(Error::TooFewRows {
            needed: k + 2,
            found: n,
        });
    }
    let mean = ds.response_mean();
    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..n {
        let y = ds.y(i);
        sse += (y - model.predict(ds.row(i))).powi(2);
        sst += (y - mean).powi(2);
    }
    Ok(f_test_from_sums(sse, sst, k as f64, (n - k - 1) as f64))
}

/// Number of local neighborhoods used by [`estimate_noise_variance`].
pub const NOISE_NEIGHBORHOODS: usize = 5;

/// Estimate the noise variance from local fits.
///
/// Draws [`NOISE_NEIGHBORHOODS`] seed rows uniformly from `rows`, fits OLS to
/// the `size` nearest rows of each (Euclidean distance in feature space) and
/// returns the median of the unbiased residual variances `SSE / (size-k-1)`.
/// Falls back to the global fit when no neighborhood can be fitted.
pub fn estimate_noise_variance(ds: &Dataset, rows: &[usize], size: usize, seed: u64) -> Result<f64> {
    estimate_noise_variance_with(ds, rows, size, NOISE_NEIGHBORHOODS, seed)
}

/// [`estimate_noise_variance`] over `hoods` neighborhoods.
///
/// A neighborhood that straddles a regime boundary reports a variance far
/// above the noise; the median is only right while most of them do not.
pub fn estimate_noise_variance_with(
    ds: &Dataset,
    rows: &[usize],
    size: usize,
    hoods: usize,
    seed: u64,
) -> Result<f64> {
    if hoods == 0 {
        return Err(Error::domain("at least one neighborhood is needed"));
    }
    let k = ds.k();
    let size = size.max(k + 2);
    if rows.len() < k + 2 {
        return Err(Error::TooFewRows {
            needed: k + 2,
            found: rows.len(),
        });
    }
    if rows.len() <= size {
        let m = ols_fit_rows(ds, rows, true)?;
        return Ok(m.sigma_f_sq * rows.len() as f64 / (rows.len() - k - 1) as f64);
    }

    let mut rng = rng::rng_at(seed, &[rng::SIGMA_ESTIMATE]);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    let mut estimates = Vec::with_capacity(hoods);
    for _ in 0..hoods {
        let centre = ds.row(rows[rng.random_range(0..rows.len())]).to_vec();
        dist.clear();
        dist.extend(rows.iter().map(|&i| {
            let d: f64 = ds.row(i).iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum();
            (d, i)
        }));
        dist.select_nth_unstable_by(size - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        let mut hood: Vec<usize> = dist[..size].iter().map(|&(_, i)| i).collect();
        hood.sort_unstable();
        if let Ok(m) = ols_fit_rows(ds, &hood, true) {
            estimates.push(m.sigma_f_sq * size as f64 / (size - k - 1) as f64);
        }
    }
    if estimates.is_empty() {
        let m = ols_fit_rows(ds, rows, true)?;
        return Ok(m.sigma_f_sq * rows.len() as f64 / (rows.len() - k - 1) as f64);
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).expect("finite variances"));
    Ok(estimates[estimates.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn line_ds() -> Dataset {
        Dataset::new(vec![1.0, 2.0, 3.0], 1, vec![2.0, 4.0, 6.0]).unwrap()
    }

    #[test]
    fn exact_line() {
        let m = ols_fit(&line_ds(), true).unwrap();
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.coeffs[0] - 2.0).abs() < 1e-12);
        assert!(m.sigma_f_sq < 1e-24);
        assert_eq!(m.fit_bound, 3.0 * m.sigma_f_sq.sqrt());
        assert_eq!(m.n_fit, 3);
        assert_eq!(residual_variance(&m, &line_ds()).unwrap(), m.sigma_f_sq);
    }

    #[test]
    fn too_few_rows_and_singular() {
        let ds = Dataset::new(vec![1.0, 2.0], 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(ols_fit(&ds, true), Err(Error::TooFewRows { .. })));
        let ds = Dataset::new(vec![1.0; 5], 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(matches!(ols_fit(&ds, true), Err(Error::SingularDesign { .. })));
        // second column is twice the first
        let feats: Vec<f64> = (0..10).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
        let ds = Dataset::new(feats, 2, (0..10).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(ols_fit(&ds, true), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn residual_variance_hand_values() {
        let ds = Dataset::new(vec![0.0, 1.0], 1, vec![1.0, -1.0]).unwrap();
        let zero = LinearModel::from_parts(0.0, vec![0.0], 0.0, 1.0, 0);
        assert_eq!(residual_variance(&zero, &ds).unwrap(), 1.0);
        let wrong = LinearModel::from_parts(0.0, vec![0.0, 0.0], 0.0, 1.0, 0);
        assert!(matches!(residual_variance(&wrong, &ds), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn residual_variance_matches_two_pass_loop() {
        let mut r = rng::rng(11);
        let feats: Vec<f64> = (0..300).map(|_| r.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..100).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let ds = Dataset::new(feats, 3, ys).unwrap();
        let m = ols_fit(&ds, true).unwrap();
        let mut acc = 0.0;
        for i in 0..ds.n() {
            let mut pred = m.intercept;
            for j in 0..3 {
                pred += m.coeffs[j] * ds.row(i)[j];
            }
            acc += (ds.y(i) - pred) * (ds.y(i) - pred);
        }
        let naive = acc / ds.n() as f64;
        let got = residual_variance(&m, &ds).unwrap();
        assert!((got - naive).abs() <= 1e-12 * naive);
        assert!((m.sigma_f_sq - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn residuals_are_orthogonal_to_design() {
        let mut r = rng::rng(5);
        let n = 200;
        let feats: Vec<f64> = (0..2 * n).map(|_| r.random_range(100.0..110.0)).collect();
        let ys: Vec<f64> = (0..n)
            .map(|i| 3.0 + 0.5 * feats[2 * i] - 2.0 * feats[2 * i + 1] + r.sample::<f64, _>(StandardNormal))
            .collect();
        let ds = Dataset::new(feats, 2, ys).unwrap();
        let m = ols_fit(&ds, true).unwrap();
        let mut grad = [0.0; 3];
        let (mut xnorm, mut ynorm) = (0.0f64, 0.0f64);
        for i in 0..n {
            let r = ds.y(i) - m.predict(ds.row(i));
            grad[0] += r;
            grad[1] += r * ds.row(i)[0];
            grad[2] += r * ds.row(i)[1];
            xnorm += 1.0 + ds.row(i).iter().map(|v| v * v).sum::<f64>();
            ynorm += ds.y(i) * ds.y(i);
        }
        let scale = xnorm.sqrt() * ynorm.sqrt();
        for g in grad {
            assert!(g.abs() <= 1e-8 * scale, "gradient {g} vs scale {scale}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut r = rng::rng(8);
        let feats: Vec<f64> = (0..150).map(|_| r.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..50).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let ds = Dataset::new(feats.clone(), 3, ys).unwrap();
        let m = ols_fit(&ds, true).unwrap();
        let fitted: Vec<f64> = (0..50).map(|i| m.predict(ds.row(i))).collect();
        let again = ols_fit(&Dataset::new(feats, 3, fitted).unwrap(), true).unwrap();
        assert!((again.intercept - m.intercept).abs() < 1e-9);
        for (a, b) in again.coeffs.iter().zip(&m.coeffs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn no_intercept_fit_passes_through_origin() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 1, vec![3.0, 6.0, 9.0, 12.5]).unwrap();
        let m = ols_fit(&ds, false).unwrap();
        assert_eq!(m.intercept, 0.0);
        let expected = (3.0 + 12.0 + 27.0 + 50.0) / 30.0;
        assert!((m.coeffs[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn variance_factors_one_dim() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let ds = Dataset::new(xs, 1, vec![0.0; 4]).unwrap();
        let f = slope_variance_factors(&ds, &[0, 1, 2, 3]).unwrap();
        // sum (x - 2.5)^2 = 5
        assert!((f[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn f_test_limits() {
        // near-exact fit
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x + 1e-9 * (x * 7.0).sin()).collect();
        let ds = Dataset::new(xs.clone(), 1, ys).unwrap();
        let m = ols_fit(&ds, true).unwrap();
        assert!(m.p_f < 1e-12);
        assert!(f_test_pvalue(&m, &ds).unwrap() < 1e-12);
        // constant response
        let ds = Dataset::new(xs, 1, vec![4.0; 30]).unwrap();
        let m = ols_fit(&ds, true).unwrap();
        assert_eq!(m.p_f, 1.0);
        assert_eq!(f_test_pvalue(&m, &ds).unwrap(), 1.0);
        // n <= k + 1
        let tiny = Dataset::new(vec![1.0, 2.0], 1, vec![1.0, 3.0]).unwrap();
        assert!(f_test_pvalue(&m, &tiny).is_err());
    }

    #[test]
    fn f_test_monotone_in_fit_quality() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let noise: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 4.0).collect();
        let mut prev = 0.0;
        for slope in [2.0, 1.0, 0.5, 0.2, 0.1, 0.05] {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| slope * x + e).collect();
            let ds = Dataset::new(xs.clone(), 1, ys).unwrap();
            let p = ols_fit(&ds, true).unwrap().p_f;
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn noise_estimate_is_local() {
        // two steps far apart: a global fit sees huge residuals, local fits do not
        let mut r = rng::rng(2);
        let n = 4000;
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if x < 0.0 { 5.0 + x } else { -5.0 - 2.0 * x } + 0.1 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let ds = Dataset::new(xs, 1, ys).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let est = estimate_noise_variance(&ds, &rows, 65, 1).unwrap();
        assert!(est > 0.005 && est < 0.02, "{est}");
        let global = ols_fit(&ds, true).unwrap().sigma_f_sq;
        assert!(global > 1.0);
        assert_eq!(est, estimate_noise_variance(&ds, &rows, 65, 1).unwrap());
    }
}
