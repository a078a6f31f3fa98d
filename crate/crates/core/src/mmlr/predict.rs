//! Out-of-sample prediction: a query takes the model of its nearest training
//! row, ties going to the lower entry index.

use super::ModelSet;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

fn check_query(ms: &ModelSet, ds: &Dataset, x: &[f64]) -> Result<()> {
    if ms.entries.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if x.len() != ds.k() {
        return Err(Error::DimensionMismatch {
            expected: ds.k(),
            found: x.len(),
        });
    }
    Ok(())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum()
}

/// Prediction at `x` for a model set trained on `ds`. Scans every training
/// row; use [`Predictor`] for many queries.
pub fn predict(ms: &ModelSet, ds: &Dataset, x: &[f64]) -> Result<f64> {
    check_query(ms, ds, x)?;
    if ms.m() == 1 {
        return Ok(ms.entries[0].model.predict(x));
    }
    let owner = ms.assignment()?;
    let mut best = (f64::INFINITY, usize::MAX);
    for (i, &e) in owner.iter().enumerate() {
        let cand = (dist_sq(ds.row(i), x), e);
        if cand < best {
            best = cand;
        }
    }
    Ok(ms.entries[best.1].model.predict(x))
}

/// Summed squared residuals of every model on its own rows.
pub fn training_mse(ms: &ModelSet, ds: &Dataset) -> Result<f64> {
    if ds.n() != ms.n_total {
        return Err(Error::CoverageViolation(format!(
            "model set covers {} rows, dataset has {}",
            ms.n_total,
            ds.n()
        )));
    }
    ms.assignment()?;
    Ok(ms
        .entries
        .iter()
        .map(|e| linalg::sum_sq_residuals(&e.model, ds, e.rows.as_slice()))
        .sum())
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Nearest-training-row lookup over a k-d tree.
pub struct Predictor<'a> {
    ms: &'a ModelSet,
    k: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
    root: Node,
}

impl<'a> Predictor<'a> {
    pub fn new(ms: &'a ModelSet, ds: &Dataset) -> Result<Self> {
        if ms.entries.is_empty() {
            return Err(Error::EmptyModelSet);
        }
        let owner = ms.assignment()?;
        let k = ds.k();
        let mut order: Vec<usize> = (0..ds.n()).collect();
        let root = build(ds, &mut order, 0);
        let mut points = Vec::with_capacity(ds.n() * k);
        let mut labels = Vec::with_capacity(ds.n());
        for &i in &order {
            points.extend_from_slice(ds.row(i));
            labels.push(owner[i]);
        }
        Ok(Predictor {
            ms,
            k,
            points,
            labels,
            root,
        })
    }

    /// Entry index whose training row is nearest to `x`.
    pub fn entry_for(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: x.len(),
            });
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(&self.root, x, &mut best);
        Ok(best.1)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let e = self.entry_for(x)?;
        Ok(self.ms.entries[e].model.predict(x))
    }

    /// Predictions for every row of `queries`.
    pub fn predict_all(&self, queries: &Dataset) -> Result<Vec<f64>> {
        (0..queries.n()).map(|i| self.predict(queries.row(i))).collect()
    }

    fn search(&self, node: &Node, x: &[f64], best: &mut (f64, usize)) {
        match node {
            Node::Leaf { start, end } => {
                for p in *start..*end {
                    let cand = (dist_sq(&self.points[p * self.k..(p + 1) * self.k], x), self.labels[p]);
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = x[*dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, best);
                // equal distances must still be visited for the tie rule
                if diff * diff <= best.0 {
                    self.search(far, x, best);
                }
            }
        }
    }
}

fn build(ds: &Dataset, idx: &mut [usize], offset: usize) -> Node {
    if idx.len() <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + idx.len(),
        };
    }
    let k = ds.k();
    let mut dim = 0;
    let mut spread = -1.0;
    for j in 0..k {
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| (l.min(ds.row(i)[j]), h.max(ds.row(i)[j])));
        if hi - lo > spread {
            spread = hi - lo;
            dim = j;
        }
    }
    if spread <= 0.0 {
        return Node::Leaf {
            start: offset,
            end: offset + idx.len(),
        };
    }
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| ds.row(a)[dim].total_cmp(&ds.row(b)[dim]));
    let value = ds.row(idx[mid])[dim];
    let (l, r) = idx.split_at_mut(mid);
    Node::Split {
        dim,
        value,
        left: Box::new(build(ds, l, offset)),
        right: Box::new(build(ds, r, offset + mid)),
    }
}
