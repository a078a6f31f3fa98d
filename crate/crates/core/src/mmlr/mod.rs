//! The multiple-model driver.
//!
//! A global fit is tried first. When it does not describe the data, the
//! driver repeatedly selects a hypercube subset of the live rows, fits a
//! local model, absorbs every live row within the model's fitting bound and
//! removes the group. Whatever is left when the budget or the row threshold
//! runs out is fitted as one final residual model.

mod predict;

pub use predict::{predict, training_mse, Predictor};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RowIndexSet};
use crate::error::{Error, Result};
use crate::format;
use crate::linalg::{self, LinearModel};
use crate::rng;
use crate::sampling::{self, min_subset_size, SubsetRequest};

/// Failed candidates between two halvings of the edge length.
const SHRINK_AFTER: usize = 5;
/// Largest number of halvings of the planned edge length.
const MAX_SHRINKS: u32 = 8;
/// Extra halvings tried when no live row lies far enough inside the range.
const INTERIOR_RETRIES: u32 = 3;
/// Absolute slack on variance comparisons, relative to the response variance.
const VARIANCE_SLACK: f64 = 1e-18;

/// Row threshold below which the driver stops creating local models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MinRemaining {
    /// `max(2 * max{65, 3k}, k + 2)`.
    #[default]
    Default,
    Rows(usize),
    /// Fraction of the dataset size.
    Fraction(f64),
}

impl MinRemaining {
    /// Row count for a dataset of `n` rows and `k` features. Never below the
    /// minimum subset size `floor`.
    pub fn resolve(&self, n: usize, k: usize, floor: usize) -> usize {
        let raw = match *self {
            MinRemaining::Default => (2 * floor).max(k + 2),
            MinRemaining::Rows(r) => r,
            MinRemaining::Fraction(f) => (f * n as f64).ceil() as usize,
        };
        raw.max(floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmlrConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Largest number of models, `M0`.
    pub max_models: usize,
    /// Remaining-row threshold `N0`.
    #[serde(default)]
    pub min_remaining: MinRemaining,
    /// F-test threshold a local model must beat.
    pub p_gate: f64,
    pub seed: u64,
    /// Candidate subsets tried per model before settling for the best one.
    pub max_resample: usize,
    /// Known noise standard deviation; skips the local estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<f64>,
    /// Bound on the largest coefficient standard deviation.
    pub nu: f64,
    /// Local neighborhoods whose median residual variance estimates the noise.
    #[serde(default = "default_hoods")]
    pub noise_neighborhoods: usize,
    /// A model is only accepted when its residual variance is at most this
    /// multiple of the estimated noise variance. `None` disables the check.
    #[serde(default)]
    pub lof_ratio: Option<f64>,
    /// A model is only accepted when `z * sigma_hat * sqrt(e_jj) <= epsilon`
    /// for every slope, with `e_jj` taken from its own fitting rows.
    #[serde(default = "enabled")]
    pub precision_check: bool,
    /// Overrides the minimum subset size `max{65, 3k}`. Meant for tests on
    /// tiny inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_subset_size: Option<usize>,
}

impl Default for MmlrConfig {
    fn default() -> Self {
        MmlrConfig {
            epsilon: 0.1,
            delta: 0.05,
            max_models: 10,
            min_remaining: MinRemaining::Default,
            p_gate: 0.05,
            seed: 0,
            max_resample: 50,
            sigma_override: None,
            nu: 1.0,
            noise_neighborhoods: linalg::NOISE_NEIGHBORHOODS,
            lof_ratio: Some(2.0),
            precision_check: true,
            min_subset_size: None,
        }
    }
}

impl MmlrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.max_models == 0 {
            return Err(Error::domain("max_models must be at least 1"));
        }
        if !(self.p_gate > 0.0 && self.p_gate < 1.0) {
            return Err(Error::domain(format!("p_gate must lie in (0, 1), got {}", self.p_gate)));
        }
        if self.max_resample == 0 {
            return Err(Error::domain("max_resample must be at least 1"));
        }
        if let Some(s) = self.sigma_override {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::domain(format!("sigma must be non-negative, got {s}")));
            }
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::domain(format!("nu must be positive, got {}", self.nu)));
        }
        if self.noise_neighborhoods == 0 {
            return Err(Error::domain("noise_neighborhoods must be at least 1"));
        }
        if let Some(r) = self.lof_ratio {
            if !(r >= 1.0) {
                return Err(Error::domain(format!("lof_ratio must be at least 1, got {r}")));
            }
        }
        if let MinRemaining::Fraction(f) = self.min_remaining {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::domain(format!("min_remaining fraction must lie in [0, 1), got {f}")));
            }
        }
        if self.min_subset_size == Some(0) {
            return Err(Error::domain("min_subset_size must be positive"));
        }
        Ok(())
    }

    fn subset_floor(&self, k: usize) -> usize {
        self.min_subset_size.unwrap_or_else(|| min_subset_size(k))
    }
}

/// One model and the rows it owns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    #[serde(flatten)]
    pub model: LinearModel,
    #[serde(default)]
    pub rows: RowIndexSet,
    /// Rows of the subset the model was fitted on; the others were absorbed
    /// by the examine sweep.
    #[serde(skip)]
    pub sampled: RowIndexSet,
    /// Bound the examine sweep applied. Equals `fit_bound` except for
    /// noiseless fits, where a rounding floor applies.
    #[serde(skip)]
    pub absorb_bound: f64,
    /// The fitting subset passed both the F-test and the noise check.
    pub certified: bool,
    /// Final entry fitted on the leftover rows.
    pub residual: bool,
}

/// Quantities computed along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Training `MSE(M)`: summed squared residuals of each model on its rows.
    pub mse: f64,
    pub m: usize,
    pub sigma_sq_hat: f64,
    pub n_s: usize,
    pub edge_length: f64,
    pub global_accepted: bool,
    /// Models committed without a certified subset.
    pub uncertified: usize,
    pub resamples: usize,
}

/// Output of [`run_mmlr`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    #[serde(rename = "models")]
    pub entries: Vec<ModelEntry>,
    pub n_total: usize,
    pub config: MmlrConfig,
    pub stats: RunStats,
}

impl ModelSet {
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    /// Entry index owning each row.
    pub fn assignment(&self) -> Result<Vec<usize>> {
        let mut owner = vec![usize::MAX; self.n_total];
        for (e, entry) in self.entries.iter().enumerate() {
            for &i in entry.rows.iter() {
                if i >= self.n_total {
                    return Err(Error::CoverageViolation(format!("row {i} out of range")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::CoverageViolation(format!(
                        "row {i} belongs to entries {} and {e}",
                        owner[i]
                    )));
                }
                owner[i] = e;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::CoverageViolation(format!("row {i} has no model")));
        }
        Ok(owner)
    }

    /// Checks disjointness, coverage, the model budget and that every
    /// absorbed row lies within its model's bound.
    pub fn check_invariants(&self, ds: &Dataset) -> Result<()> {
        if ds.n() != self.n_total {
            return Err(Error::CoverageViolation(format!(
                "model set covers {} rows, dataset has {}",
                self.n_total,
                ds.n()
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyModelSet);
        }
        if self.m() > self.config.max_models {
            return Err(Error::CoverageViolation(format!(
                "{} models exceed the budget of {}",
                self.m(),
                self.config.max_models
            )));
        }
        self.assignment()?;
        for (e, entry) in self.entries.iter().enumerate() {
            if entry.residual {
                continue;
            }
            for &i in entry.rows.iter() {
                if entry.sampled.contains(i) {
                    continue;
                }
                let r = (entry.model.predict(ds.row(i)) - ds.y(i)).abs();
                if !(r <= entry.absorb_bound) {
                    return Err(Error::CoverageViolation(format!(
                        "row {i} absorbed by entry {e} with residual {r} above bound {}",
                        entry.absorb_bound
                    )));
                }
            }
        }
        Ok(())
    }

    /// Compact JSON, optionally without the row lists.
    pub fn to_json(&self, with_rows: bool) -> Result<String> {
        if with_rows {
            return format::to_json(self);
        }
        let mut slim = self.clone();
        slim.entries.iter_mut().for_each(|e| e.rows = RowIndexSet::default());
        let mut v = serde_json::to_value(&slim)?;
        for m in v["models"].as_array_mut().expect("models array") {
            m.as_object_mut().expect("model object").remove("rows");
        }
        format::to_json(&v)
    }
}

fn enabled() -> bool {
    true
}

fn default_hoods() -> usize {
    linalg::NOISE_NEIGHBORHOODS
}

struct Candidate {
    model: LinearModel,
    rows: RowIndexSet,
    noise_ok: bool,
    precise: bool,
}

impl Candidate {
    fn rank(&self) -> (bool, bool, f64) {
        (self.noise_ok, self.precise, -self.model.p_f)
    }

    fn passes(&self, p_gate: f64) -> bool {
        self.noise_ok && self.precise && self.model.p_f < p_gate
    }
}

struct Run<'a> {
    ds: &'a Dataset,
    cfg: &'a MmlrConfig,
    sigma_sq: f64,
    slack: f64,
    floor: usize,
    /// `Phi^-1(1 - delta/2)`
    z: f64,
}

impl Run<'_> {
    fn noise_ok(&self, m: &LinearModel) -> bool {
        match self.cfg.lof_ratio {
            Some(r) => m.sigma_f_sq <= r * self.sigma_sq + self.slack,
            None => true,
        }
    }

    fn precise(&self, rows: &[usize]) -> bool {
        if !self.cfg.precision_check {
            return true;
        }
        match linalg::slope_variance_factors(self.ds, rows) {
            Ok(f) => f.iter().all(|e| self.z * (self.sigma_sq * e).sqrt() <= self.cfg.epsilon),
            Err(_) => false,
        }
    }

    fn candidate(&self, model: LinearModel, rows: RowIndexSet) -> Candidate {
        Candidate {
            noise_ok: self.noise_ok(&model),
            precise: self.precise(rows.as_slice()),
            model,
            rows,
        }
    }
}

/// Fit a multiple-model regression to `ds`.
pub fn run_mmlr(ds: &Dataset, cfg: &MmlrConfig) -> Result<ModelSet> {
    cfg.validate()?;
    let (n, k) = (ds.n(), ds.k());
    let floor = cfg.subset_floor(k);
    let needed = floor.max(k + 2);
    if n < needed {
        return Err(Error::TooFewRows { needed, found: n });
    }
    let all = ds.all_rows();
    let global = linalg::ols_fit(ds, true)?;

    let single = |stats: RunStats| -> ModelSet {
        let entry = ModelEntry {
            absorb_bound: global.fit_bound,
            model: global.clone(),
            rows: all.clone(),
            sampled: all.clone(),
            certified: stats.global_accepted,
            residual: false,
        };
        finish(ds, cfg, vec![entry], stats)
    };

    if cfg.max_models == 1 {
        return Ok(single(RunStats::default()));
    }

    let sigma_sq = match cfg.sigma_override {
        Some(s) => s * s,
        None => linalg::estimate_noise_variance_with(
            ds,
            all.as_slice(),
            floor,
            cfg.noise_neighborhoods,
            rng::derive(cfg.seed, &[rng::SIGMA_ESTIMATE]),
        )?,
    };
    let response_var = ds.response().iter().map(|y| (y - ds.response_mean()).powi(2)).sum::<f64>() / n as f64;
    let run = Run {
        ds,
        cfg,
        sigma_sq,
        slack: VARIANCE_SLACK * response_var.max(f64::MIN_POSITIVE),
        floor,
        z: linalg::normal_quantile(1.0 - cfg.delta / 2.0)?,
    };
    let sigma = sigma_sq.sqrt();
    let plan = sampling::plan_sample_size_with(cfg.epsilon, cfg.delta, sigma, k, cfg.nu, floor)?;
    let planned_edge = sampling::plan_edge_length(cfg.epsilon, cfg.delta, sigma, plan.n_s)?;
    let mut stats = RunStats {
        sigma_sq_hat: sigma_sq,
        n_s: plan.n_s,
        edge_length: planned_edge,
        ..RunStats::default()
    };

    let global_cand = run.candidate(global.clone(), all.clone());
    if global_cand.passes(cfg.p_gate) {
        stats.global_accepted = true;
        return Ok(single(stats));
    }

    let min_remaining = cfg.min_remaining.resolve(n, k, floor);
    let absorb_floor = 1e-9 * response_var.sqrt();
    let mut live: Vec<usize> = all.into_vec();
    let mut entries: Vec<ModelEntry> = Vec::new();

    while live.len() > min_remaining && entries.len() + 1 < cfg.max_models {
        let iter = entries.len() as u64;
        let Some((cand, attempts)) = find_candidate(&run, &live, plan.n_s, planned_edge, iter)? else {
            break;
        };
        stats.resamples += attempts - 1;
        let certified = cand.passes(cfg.p_gate);
        if !certified {
            stats.uncertified += 1;
        }

        let bound = if cand.model.fit_bound > absorb_floor {
            cand.model.fit_bound
        } else {
            absorb_floor
        };
        let mut rows = Vec::new();
        let mut rest = Vec::with_capacity(live.len());
        let sampled = cand.rows.as_slice();
        let mut s = 0;
        for &i in &live {
            while s < sampled.len() && sampled[s] < i {
                s += 1;
            }
            let in_sample = s < sampled.len() && sampled[s] == i;
            if in_sample || (cand.model.predict(ds.row(i)) - ds.y(i)).abs() <= bound {
                rows.push(i);
            } else {
                rest.push(i);
            }
        }
        live = rest;
        entries.push(ModelEntry {
            model: cand.model,
            rows: RowIndexSet::from_sorted(rows).expect("sweep keeps order"),
            sampled: cand.rows,
            absorb_bound: bound,
            certified,
            residual: false,
        });
    }

    if !live.is_empty() {
        let model = if live.len() >= k + 2 {
            linalg::ols_fit_rows(ds, &live, true).unwrap_or_else(|_| LinearModel::constant(ds, &live))
        } else {
            LinearModel::constant(ds, &live)
        };
        let rows = RowIndexSet::from_sorted(live).expect("live rows stay sorted");
        entries.push(ModelEntry {
            absorb_bound: model.fit_bound,
            certified: false,
            residual: true,
            sampled: rows.clone(),
            rows,
            model,
        });
    }
    Ok(finish(ds, cfg, entries, stats))
}

fn finish(ds: &Dataset, cfg: &MmlrConfig, entries: Vec<ModelEntry>, mut stats: RunStats) -> ModelSet {
    stats.m = entries.len();
    stats.mse = entries
        .iter()
        .map(|e| linalg::sum_sq_residuals(&e.model, ds, e.rows.as_slice()))
        .sum();
    ModelSet {
        entries,
        n_total: ds.n(),
        config: cfg.clone(),
        stats,
    }
}

// Up to `max_resample` candidate subsets. The edge is halved after every
// `SHRINK_AFTER` failures and the sample size raised so that `n L^2` stays at
// its planned value. Returns the first passing candidate, or the best one.
fn find_candidate(
    run: &Run,
    live: &[usize],
    n_s: usize,
    planned_edge: f64,
    iter: u64,
) -> Result<Option<(Candidate, usize)>> {
    let (ds, cfg) = (run.ds, run.cfg);
    let range = sampling::live_range(ds, live);
    let widest = range.0.iter().zip(&range.1).map(|(l, h)| h - l).fold(0.0, f64::max);
    if widest <= 0.0 {
        // every live row sits at the same point
        return Ok(None);
    }
    let base = if planned_edge > 0.0 { planned_edge.min(widest) } else { widest };
    let sigma = run.sigma_sq.sqrt();

    let mut best: Option<Candidate> = None;
    for attempt in 0..cfg.max_resample {
        let halvings = ((attempt / SHRINK_AFTER) as u32).min(MAX_SHRINKS);
        let edge = base / 2f64.powi(halvings as i32);
        let n_req = n_s.max(sampling::sample_size_for_edge(cfg.epsilon, cfg.delta, sigma, edge)?);
        let seed = rng::derive(cfg.seed, &[rng::SUBSET, iter, attempt as u64]);

        let mut req = SubsetRequest {
            n_s: n_req,
            edges: edges_for(&range, edge),
            min_size: run.floor,
            interior_seed: true,
        };
        let mut picked = None;
        for retry in 0..=INTERIOR_RETRIES {
            match sampling::select_in_range(ds, live, &range, &req, rng::derive(seed, &[retry as u64])) {
                Ok(found) => {
                    picked = Some(found);
                    break;
                }
                Err(Error::NoInteriorSeed) => {
                    req.edges.iter_mut().for_each(|e| *e /= 2.0);
                }
                Err(e) => return Err(e),
            }
        }
        let (rows, _cube) = match picked {
            Some(found) => found,
            None => {
                req.edges = edges_for(&range, edge);
                req.interior_seed = false;
                sampling::select_in_range(ds, live, &range, &req, rng::derive(seed, &[u64::MAX]))?
            }
        };
        if rows.len() < ds.k() + 2 {
            continue;
        }
        let model = match linalg::ols_fit_rows(ds, rows.as_slice(), true) {
            Ok(m) => m,
            Err(Error::SingularDesign { .. }) => continue,
            Err(e) => return Err(e),
        };
        let cand = run.candidate(model, rows);
        if cand.passes(cfg.p_gate) {
            return Ok(Some((cand, attempt + 1)));
        }
        if best.as_ref().is_none_or(|b| cand.rank() > b.rank()) {
            best = Some(cand);
        }
    }
    Ok(best.map(|b| (b, cfg.max_resample)))
}

fn edges_for((lo, hi): &(Vec<f64>, Vec<f64>), edge: f64) -> Vec<f64> {
    lo.iter().zip(hi).map(|(l, h)| edge.min(h - l)).collect()
}

#[cfg(test)]
mod tests;
