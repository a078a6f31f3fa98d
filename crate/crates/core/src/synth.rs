//! Synthetic piecewise-linear data and brute-force oracles.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RowIndexSet};
use crate::error::{Error, Result};
use crate::format;
use crate::linalg;
use crate::rng;
use crate::sampling::{min_subset_size, Hypercube};

/// One linear regime on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub region: Hypercube,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl RegimeSpec {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.intercept + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub k: usize,
    pub m_regimes: usize,
    pub sigma: f64,
    pub domain: Hypercube,
    pub seed: u64,
    #[serde(default = "default_coef_range")]
    pub coef_range: (f64, f64),
    #[serde(default = "default_intercept_range")]
    pub intercept_range: (f64, f64),
}

fn default_coef_range() -> (f64, f64) {
    (-5.0, 5.0)
}

fn default_intercept_range() -> (f64, f64) {
    (-10.0, 10.0)
}

impl SynthSpec {
    /// Spec on the domain `[0, 10]^k` with the default draw ranges.
    pub fn new(n: usize, k: usize, m_regimes: usize, sigma: f64, seed: u64) -> Self {
        SynthSpec {
            n,
            k,
            m_regimes,
            sigma,
            domain: Hypercube {
                lo: vec![0.0; k],
                hi: vec![10.0; k],
            },
            seed,
            coef_range: default_coef_range(),
            intercept_range: default_intercept_range(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.m_regimes == 0 {
            return bad("at least one regime is needed".into());
        }
        let needed = self.m_regimes * min_subset_size(self.k);
        if self.n < needed {
            return bad(format!(
                "n = {} is below m * max{{65, 3k}} = {needed}",
                self.n
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.domain.k() != self.k || self.domain.hi.len() != self.k {
            return bad(format!("domain has {} dimensions, k = {}", self.domain.k(), self.k));
        }
        if self.domain.lo.iter().zip(&self.domain.hi).any(|(l, h)| !(l < h && (h - l).is_finite())) {
            return bad("domain needs lo < hi in every dimension".into());
        }
        for (name, (a, b)) in [("coef_range", self.coef_range), ("intercept_range", self.intercept_range)] {
            if !(a <= b && a.is_finite() && b.is_finite()) {
                return bad(format!("{name} must be a finite interval"));
            }
        }
        Ok(())
    }
}

/// Generated rows with their regime labels and the true regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub dataset: Dataset,
    pub labels: Vec<usize>,
    pub truth: Vec<RegimeSpec>,
}

impl SynthData {
    /// Rows carrying label `r`.
    pub fn rows_of(&self, r: usize) -> RowIndexSet {
        RowIndexSet::from_sorted(
            self.labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == r)
                .map(|(i, _)| i)
                .collect(),
        )
        .expect("enumeration order")
    }

    /// Truth sidecar: regimes and per-row labels.
    pub fn truth_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Truth<'a> {
            regimes: &'a [RegimeSpec],
            labels: &'a [usize],
        }
        format::to_json(&Truth {
            regimes: &self.truth,
            labels: &self.labels,
        })
    }

    pub fn write_truth(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.truth_json()?).map_err(|e| Error::io(path, e))
    }
}

/// The regimes of `spec`: the first axis cut into `m` intervals, each at
/// least `1/(3m)` of the domain width, with coefficients and intercepts drawn
/// uniformly from the spec's ranges. Depends only on the seed, `k`, `m`, the
/// domain and the ranges, so specs differing only in `n` share regimes.
pub fn draw_regimes(spec: &SynthSpec) -> Result<Vec<RegimeSpec>> {
    spec.validate()?;
    let m = spec.m_regimes;
    let mut r = rng::rng_at(spec.seed, &[rng::REGIMES]);
    let (lo, hi) = (spec.domain.lo[0], spec.domain.hi[0]);
    let width = hi - lo;
    let min_w = width / (3.0 * m as f64);
    let u: Vec<f64> = (0..m).map(|_| r.random_range(0.0..1.0)).collect();
    let total: f64 = u.iter().sum();
    let mut cuts = Vec::with_capacity(m + 1);
    cuts.push(lo);
    let mut acc = lo;
    for w in &u[..m - 1] {
        acc += min_w + (width - m as f64 * min_w) * w / total;
        cuts.push(acc);
    }
    cuts.push(hi);

    let draw = |r: &mut rng::Rng, (a, b): (f64, f64)| if a < b { r.random_range(a..=b) } else { a };
    Ok((0..m)
        .map(|i| {
            let mut region = spec.domain.clone();
            region.lo[0] = cuts[i];
            region.hi[0] = cuts[i + 1];
            let beta = (0..spec.k).map(|_| draw(&mut r, spec.coef_range)).collect();
            let intercept = draw(&mut r, spec.intercept_range);
            RegimeSpec { region, beta, intercept }
        })
        .collect())
}

/// Uniform rows over the domain, `y = b0 + b.x + N(0, sigma^2)` with the
/// regime of the first axis.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    let regimes = draw_regimes(spec)?;
    let cuts: Vec<f64> = regimes[1..].iter().map(|r| r.region.lo[0]).collect();
    sample_rows(&regimes, &spec.domain, spec.n, spec.sigma, spec.seed, |x| {
        Some(cuts.partition_point(|&c| c <= x[0]))
    })
}

/// Rows drawn uniformly over `domain` and labelled with the first regime
/// whose region contains them.
pub fn generate_from_regimes(
    regimes: &[RegimeSpec],
    domain: &Hypercube,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<SynthData> {
    if regimes.is_empty() {
        return Err(Error::InfeasibleSpec("no regimes given".into()));
    }
    if let Some(r) = regimes.iter().find(|r| r.beta.len() != domain.k() || r.region.k() != domain.k()) {
        return Err(Error::DimensionMismatch {
            expected: domain.k(),
            found: r.beta.len(),
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InfeasibleSpec(format!("sigma must be non-negative, got {sigma}")));
    }
    sample_rows(regimes, domain, n, sigma, seed, |x| regimes.iter().position(|r| r.region.contains(x)))
}

fn sample_rows(
    regimes: &[RegimeSpec],
    domain: &Hypercube,
    n: usize,
    sigma: f64,
    seed: u64,
    label_of: impl Fn(&[f64]) -> Option<usize>,
) -> Result<SynthData> {
    let k = domain.k();
    let mut rx = rng::rng_at(seed, &[rng::FEATURES]);
    let mut rn = rng::rng_at(seed, &[rng::NOISE]);
    let mut features = Vec::with_capacity(n * k);
    let mut response = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![0.0; k];
    for _ in 0..n {
        for (j, v) in x.iter_mut().enumerate() {
            *v = rx.random_range(domain.lo[j]..domain.hi[j]);
        }
        let l = label_of(&x).ok_or_else(|| Error::InfeasibleSpec(format!("point {x:?} lies in no regime")))?;
        let noise: f64 = rn.sample(StandardNormal);
        response.push(regimes[l].value(&x) + sigma * noise);
        features.extend_from_slice(&x);
        labels.push(l);
    }
    Ok(SynthData {
        dataset: Dataset::new(features, k, response)?,
        labels,
        truth: regimes.to_vec(),
    })
}

/// Largest instance the exhaustive partition search accepts.
pub const ORACLE_MAX_ROWS: usize = 14;
pub const ORACLE_MAX_BLOCKS: usize = 3;

/// Exhaustive search for the partition into at most `m` blocks of at least
/// `min_size` rows with the smallest total OLS squared error. Returns one
/// block label per row (first row in block 0) and the error.
pub fn oracle_best_partition(ds: &Dataset, m: usize, min_size: usize) -> Result<(Vec<usize>, f64)> {
    let (n, k) = (ds.n(), ds.k());
    if n > ORACLE_MAX_ROWS {
        return Err(Error::InfeasibleSpec(format!("at most {ORACLE_MAX_ROWS} rows, got {n}")));
    }
    if m == 0 || m > ORACLE_MAX_BLOCKS {
        return Err(Error::InfeasibleSpec(format!("block count must be 1..={ORACLE_MAX_BLOCKS}, got {m}")));
    }
    if min_size < k + 2 {
        return Err(Error::InfeasibleSpec(format!("min_size {min_size} is below k + 2 = {}", k + 2)));
    }
    if n < min_size {
        return Err(Error::InfeasibleSpec(format!("{n} rows cannot fill a block of {min_size}")));
    }

    let mut cache: HashMap<u32, Option<f64>> = HashMap::new();
    let mut block_sse = |mask: u32| -> Option<f64> {
        *cache.entry(mask).or_insert_with(|| {
            let rows: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            linalg::ols_fit_rows(ds, &rows, true)
                .ok()
                .map(|f| linalg::sum_sq_residuals(&f, ds, &rows))
        })
    };

    let mut labels = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    // restricted growth strings: labels[i] <= max(labels[..i]) + 1
    fn recurse(
        i: usize,
        used: usize,
        labels: &mut Vec<usize>,
        m: usize,
        min_size: usize,
        eval: &mut dyn FnMut(&[usize]) -> Option<f64>,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let n = labels.len();
        if i == n {
            if let Some(sse) = eval(labels) {
                if best.as_ref().is_none_or(|(_, b)| sse < *b) {
                    *best = Some((labels.clone(), sse));
                }
            }
            return;
        }
        for l in 0..(used + 1).min(m) {
            labels[i] = l;
            recurse(i + 1, used.max(l + 1), labels, m, min_size, eval, best);
        }
    }
    let mut eval = |labels: &[usize]| -> Option<f64> {
        let blocks = labels.iter().max().map_or(0, |l| l + 1);
        let mut masks = [0u32; ORACLE_MAX_BLOCKS];
        for (i, &l) in labels.iter().enumerate() {
            masks[l] |= 1 << i;
        }
        let mut total = 0.0;
        for &mask in &masks[..blocks] {
            if (mask.count_ones() as usize) < min_size {
                return None;
            }
            total += block_sse(mask)?;
        }
        Some(total)
    };
    labels[0] = 0;
    recurse(1, 1, &mut labels, m, min_size, &mut eval, &mut best);
    best.ok_or_else(|| Error::InfeasibleSpec("no partition satisfies the constraints".into()))
}

// Neumaier compensated sum
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Closed-form simple regression `y = slope * x + intercept`.
pub fn oracle_ols_1d(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    if sxx <= 0.0 {
        return Err(Error::domain("x values have zero variance"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
