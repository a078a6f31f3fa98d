//! Sample-size and hypercube planning, the grouped-average and direct-sample
//! estimators, and hypercube subset selection.

pub mod validate;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RowIndexSet};
use crate::error::{Error, Result};
use crate::linalg::{self, normal_quantile, LinearModel};
use crate::rng;

/// Smallest subset size: `max{65, 3k}`.
pub fn min_subset_size(k: usize) -> usize {
    65.max(3 * k)
}

/// Constant of the `delta = 1e-6` sample-size shortcut, `5.33^2`.
pub const STRICT_PLAN_CONSTANT: f64 = 28.4089;

/// Output of the sample-size planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    /// Group size, `k + 2`.
    pub p_group: usize,
    pub t_groups: usize,
    /// Total sample size, never below the subset floor.
    pub n_s: usize,
    /// Working bound on the largest coefficient standard deviation.
    pub nu: f64,
}

fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
    }
    Ok(())
}

/// Plan with `nu = 1` and the default subset floor.
pub fn plan_sample_size(epsilon: f64, delta: f64, sigma: f64, k: usize) -> Result<SampleSizePlan> {
    plan_sample_size_with(epsilon, delta, sigma, k, 1.0, min_subset_size(k))
}

/// `t = ceil((nu * sigma * z / epsilon)^(2/3))` with `z = Phi^-1((2-delta)/2)`,
/// `p = k + 2` and `n_s = max(p * t, floor)`.
pub fn plan_sample_size_with(
    epsilon: f64,
    delta: f64,
    sigma: f64,
    k: usize,
    nu: f64,
    floor: usize,
) -> Result<SampleSizePlan> {
    check_eps_delta(epsilon, delta)?;
    check_sigma(sigma)?;
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    let z = normal_quantile((2.0 - delta) / 2.0)?;
    let t_real = (nu * sigma * z / epsilon).powf(2.0 / 3.0);
    let t_groups = (t_real.ceil() as usize).max(1);
    let p_group = k + 2;
    Ok(SampleSizePlan {
        epsilon,
        delta,
        sigma,
        p_group,
        t_groups,
        n_s: (p_group * t_groups).max(floor),
        nu,
    })
}

/// The `delta = 1e-6` shortcut: `t = ceil(28.4089 nu^2 / epsilon^2)`, so that
/// `epsilon sqrt(t) / nu >= 5.33` and `Phi(5.33) >= 0.9999995`.
pub fn plan_sample_size_strict(epsilon: f64, k: usize, nu: f64) -> Result<SampleSizePlan> {
    check_eps_delta(epsilon, 0.5)?;
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let p_group = k + 2;
    let t_groups = (STRICT_PLAN_CONSTANT * nu * nu / (epsilon * epsilon)).ceil() as usize;
    Ok(SampleSizePlan {
        epsilon,
        delta: 1e-6,
        sigma: nu,
        p_group,
        t_groups,
        n_s: p_group * t_groups,
        nu,
    })
}

/// Hypercube edge `L = 4 sqrt(3) sigma / (epsilon sqrt(n_s delta))`.
pub fn plan_edge_length(epsilon: f64, delta: f64, sigma: f64, n_s: usize) -> Result<f64> {
    check_eps_delta(epsilon, delta)?;
    check_sigma(sigma)?;
    if n_s == 0 {
        return Err(Error::domain("n_s must be positive"));
    }
    Ok(4.0 * 3f64.sqrt() * sigma / (epsilon * (n_s as f64 * delta).sqrt()))
}

/// Sample size that keeps the edge bound satisfied for a given edge `L`;
/// the same inequality solved for `n`: `n = 48 sigma^2 / (epsilon^2 delta L^2)`.
pub fn sample_size_for_edge(epsilon: f64, delta: f64, sigma: f64, edge: f64) -> Result<usize> {
    check_eps_delta(epsilon, delta)?;
    check_sigma(sigma)?;
    if !(edge > 0.0) {
        return Err(Error::domain(format!("edge must be positive, got {edge}")));
    }
    let n = 48.0 * sigma * sigma / (epsilon * epsilon * delta * edge * edge);
    // round-trip through plan_edge_length must not gain a row from rounding
    Ok((n * (1.0 - 1e-12)).ceil().min(usize::MAX as f64 / 2.0) as usize)
}

/// Axis-aligned box with closed per-dimension intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypercube {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Hypercube {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch(lo.len(), hi.len()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::domain("hypercube needs lo <= hi in every dimension"));
        }
        Ok(Hypercube { lo, hi })
    }

    /// Cube of edge `edge` centred at `centre`.
    pub fn centred(centre: &[f64], edge: f64) -> Self {
        Hypercube {
            lo: centre.iter().map(|c| c - edge / 2.0).collect(),
            hi: centre.iter().map(|c| c + edge / 2.0).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    fn clip_to(&mut self, lo: &[f64], hi: &[f64]) {
        for j in 0..self.k() {
            self.lo[j] = self.lo[j].max(lo[j]);
            self.hi[j] = self.hi[j].min(hi[j]);
        }
    }
}

/// Uniform sample of `m` distinct entries by a partial Fisher-Yates shuffle.
/// The result is sorted.
pub fn sample_without_replacement(items: &[usize], m: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut pool = items.to_vec();
    let m = m.min(pool.len());
    for i in 0..m {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool.sort_unstable();
    pool
}

const MAX_GROUP_REDRAWS: usize = 10;

/// Grouped-average estimator: `t` disjoint groups of `p` rows, one OLS fit per
/// group, coefficients averaged. Residual variance and p-value of the returned
/// model are measured on the union of the groups.
pub fn fit_grouped_average(ds: &Dataset, plan: &SampleSizePlan, rng_seed: u64) -> Result<LinearModel> {
    fit_grouped_average_detailed(ds, plan, rng_seed).map(|(m, _)| m)
}

/// As [`fit_grouped_average`], also returning the groups that were fitted.
pub fn fit_grouped_average_detailed(
    ds: &Dataset,
    plan: &SampleSizePlan,
    rng_seed: u64,
) -> Result<(LinearModel, Vec<RowIndexSet>)> {
    let (k, p, t) = (ds.k(), plan.p_group, plan.t_groups);
    if p < k + 2 {
        return Err(Error::domain(format!("group size {p} below k + 2 = {}", k + 2)));
    }
    let needed = plan.n_s.max(p * t);
    if ds.n() < needed {
        return Err(Error::TooFewRows {
            needed,
            found: ds.n(),
        });
    }
    let mut rng = rng::rng_at(rng_seed, &[rng::GROUPS]);
    // one shuffle provides the t groups and a reserve for redraws
    let reserve = (p * MAX_GROUP_REDRAWS).min(ds.n() - p * t);
    let all: Vec<usize> = (0..ds.n()).collect();
    let mut order = all;
    for i in 0..p * t + reserve {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let mut spare = order[p * t..p * t + reserve].chunks_exact(p);

    let mut intercept = 0.0;
    let mut coeffs = vec![0.0; k];
    let mut groups = Vec::with_capacity(t);
    let mut redraws = 0;
    for g in 0..t {
        let mut group = order[g * p..(g + 1) * p].to_vec();
        let fit = loop {
            group.sort_unstable();
            match linalg::ols_fit_rows(ds, &group, true) {
                Ok(m) => break m,
                Err(Error::SingularDesign { .. }) if redraws < MAX_GROUP_REDRAWS => {
                    redraws += 1;
                    match spare.next() {
                        Some(next) => group = next.to_vec(),
                        None => return Err(Error::RedrawExhausted(redraws)),
                    }
                }
                Err(Error::SingularDesign { .. }) => return Err(Error::RedrawExhausted(redraws)),
                Err(e) => return Err(e),
            }
        };
        intercept += fit.intercept;
        coeffs.iter_mut().zip(&fit.coeffs).for_each(|(c, b)| *c += b);
        groups.push(RowIndexSet::new(group));
    }
    intercept /= t as f64;
    coeffs.iter_mut().for_each(|c| *c /= t as f64);

    let union: Vec<usize> = {
        let mut u: Vec<usize> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        u.sort_unstable();
        u
    };
    let model = model_on_rows(ds, &union, intercept, coeffs);
    Ok((model, groups))
}

// fills residual variance and F-test of externally supplied coefficients
fn model_on_rows(ds: &Dataset, rows: &[usize], intercept: f64, coeffs: Vec<f64>) -> LinearModel {
    let n = rows.len();
    let k = ds.k();
    let mean = rows.iter().map(|&i| ds.y(i)).sum::<f64>() / n as f64;
    let (mut sse, mut sst) = (0.0, 0.0);
    for &i in rows {
        let pred = intercept + coeffs.iter().zip(ds.row(i)).map(|(b, v)| b * v).sum::<f64>();
        sse += (ds.y(i) - pred).powi(2);
        sst += (ds.y(i) - mean).powi(2);
    }
    let p_f = if sst <= 0.0 {
        1.0
    } else if sse <= 0.0 {
        0.0
    } else {
        let df2 = (n - k - 1) as f64;
        let f = ((sst - sse).max(0.0) / k as f64) / (sse / df2);
        linalg::f_upper_tail(f, k as f64, df2)
    };
    let sigma_f_sq = sse / n as f64;
    LinearModel {
        intercept,
        coeffs,
        sigma_f_sq,
        p_f,
        fit_bound: 3.0 * sigma_f_sq.sqrt(),
        n_fit: n,
    }
}

/// Direct estimator: OLS on `n_s` rows drawn without replacement.
pub fn fit_direct_sample(ds: &Dataset, plan: &SampleSizePlan, rng_seed: u64) -> Result<LinearModel> {
    fit_direct_sample_detailed(ds, plan, rng_seed).map(|(m, _)| m)
}

pub fn fit_direct_sample_detailed(
    ds: &Dataset,
    plan: &SampleSizePlan,
    rng_seed: u64,
) -> Result<(LinearModel, RowIndexSet)> {
    if ds.n() < plan.n_s {
        return Err(Error::TooFewRows {
            needed: plan.n_s,
            found: ds.n(),
        });
    }
    let mut rng = rng::rng_at(rng_seed, &[rng::GROUPS]);
    let all: Vec<usize> = (0..ds.n()).collect();
    let rows = sample_without_replacement(&all, plan.n_s, &mut rng);
    let model = linalg::ols_fit_rows(ds, &rows, true)?;
    Ok((model, RowIndexSet::from_sorted(rows).expect("sorted sample")))
}

/// Parameters of one hypercube selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRequest {
    /// Target sample size; larger subsets are sampled down to it.
    pub n_s: usize,
    /// Initial edge length per dimension.
    pub edges: Vec<f64>,
    /// Growth stops once the cube holds this many live rows.
    pub min_size: usize,
    /// Require the seed to sit `edge/2` inside the live data range.
    pub interior_seed: bool,
}

/// Hypercube subset selection with an interior seed.
///
/// Picks a live row `d` with `min x_j + L/2 <= d_j <= max x_j - L/2` in every
/// dimension, takes the live rows inside the cube of edge `L` centred at `d`
/// and grows the cube until it holds `max{65, 3k}` rows or spans the data
/// range. Subsets larger than `n_s` are sampled down to `n_s` rows.
pub fn select_subset(
    ds: &Dataset,
    live_rows: &RowIndexSet,
    n_s: usize,
    edge: f64,
    rng_seed: u64,
) -> Result<(RowIndexSet, Hypercube)> {
    if !(edge > 0.0 && edge.is_finite()) {
        return Err(Error::domain(format!("edge must be positive, got {edge}")));
    }
    let req = SubsetRequest {
        n_s,
        edges: vec![edge; ds.k()],
        min_size: min_subset_size(ds.k()),
        interior_seed: true,
    };
    select_subset_with(ds, live_rows.as_slice(), &req, rng_seed)
}

/// General form of [`select_subset`]. With `interior_seed = false` any live
/// row may seed the cube, which is then clipped to the live data range.
pub fn select_subset_with(
    ds: &Dataset,
    live: &[usize],
    req: &SubsetRequest,
    rng_seed: u64,
) -> Result<(RowIndexSet, Hypercube)> {
    if live.is_empty() {
        return Err(Error::EmptyLive);
    }
    let range = live_range(ds, live);
    select_in_range(ds, live, &range, req, rng_seed)
}

/// [`select_subset_with`] with the live data range supplied by the caller.
pub(crate) fn select_in_range(
    ds: &Dataset,
    live: &[usize],
    (range_lo, range_hi): &(Vec<f64>, Vec<f64>),
    req: &SubsetRequest,
    rng_seed: u64,
) -> Result<(RowIndexSet, Hypercube)> {
    let k = ds.k();
    if live.is_empty() {
        return Err(Error::EmptyLive);
    }
    if req.edges.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: req.edges.len(),
        });
    }
    if req.edges.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::domain("edges must be finite and non-negative"));
    }
    let mut rng = rng::rng_at(rng_seed, &[rng::SUBSET]);

    let seed_row = if req.interior_seed {
        let is_interior = |i: usize| {
            ds.row(i).iter().enumerate().all(|(j, &v)| {
                let half = req.edges[j] / 2.0;
                range_lo[j] + half <= v && v <= range_hi[j] - half
            })
        };
        let count = live.iter().filter(|&&i| is_interior(i)).count();
        if count == 0 {
            return Err(Error::NoInteriorSeed);
        }
        let pick = rng.random_range(0..count);
        *live
            .iter()
            .filter(|&&i| is_interior(i))
            .nth(pick)
            .expect("pick < count")
    } else {
        live[rng.random_range(0..live.len())]
    };

    let centre = ds.row(seed_row);
    let mut cube = Hypercube {
        lo: centre.iter().zip(&req.edges).map(|(c, e)| c - e / 2.0).collect(),
        hi: centre.iter().zip(&req.edges).map(|(c, e)| c + e / 2.0).collect(),
    };
    cube.clip_to(range_lo, range_hi);
    let mut inside = rows_inside(ds, live, &cube);

    while inside.len() < req.min_size {
        let open: Vec<usize> = (0..k)
            .filter(|&j| cube.lo[j] > range_lo[j] || cube.hi[j] < range_hi[j])
            .collect();
        if open.is_empty() {
            break;
        }
        let j = open[rng.random_range(0..open.len())];
        let factor = if inside.is_empty() {
            2.0
        } else {
            req.min_size as f64 / inside.len() as f64
        };
        let extent = cube.hi[j] - cube.lo[j];
        let extent = if extent > 0.0 {
            extent
        } else {
            (range_hi[j] - range_lo[j]) / 64.0
        };
        let grow = extent * (factor - 1.0);
        if cube.hi[j] + grow <= range_hi[j] {
            cube.hi[j] += grow;
        } else if cube.lo[j] - grow >= range_lo[j] {
            cube.lo[j] -= grow;
        } else {
            // neither side has room: take all of the upper side, the rest from below
            let rest = grow - (range_hi[j] - cube.hi[j]);
            cube.hi[j] = range_hi[j];
            cube.lo[j] = (cube.lo[j] - rest).max(range_lo[j]);
        }
        inside = rows_inside(ds, live, &cube);
    }

    let rows = if inside.len() > req.n_s {
        sample_without_replacement(&inside, req.n_s, &mut rng)
    } else {
        inside
    };
    Ok((RowIndexSet::from_sorted(rows).expect("scan order is sorted"), cube))
}

/// Per-dimension minimum and maximum over `rows`.
pub(crate) fn live_range(ds: &Dataset, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let k = ds.k();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for &i in rows {
        for (j, &v) in ds.row(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}

fn rows_inside(ds: &Dataset, live: &[usize], cube: &Hypercube) -> Vec<usize> {
    live.iter().copied().filter(|&i| cube.contains(ds.row(i))).collect()
}
