//! In-memory numeric dataset, CSV ingestion and column statistics.
//!
//! Features are stored row-major so that a sweep over rows (one dot product
//! per row) walks memory sequentially.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;

/// An `n x k` feature table with a response vector and cached column statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    k: usize,
    features: Vec<f64>,
    response: Vec<f64>,
    col_min: Vec<f64>,
    col_max: Vec<f64>,
    col_mean: Vec<f64>,
    response_mean: f64,
    feature_names: Vec<String>,
    response_name: String,
}

impl Dataset {
    /// Build a dataset from row-major features.
    pub fn new(features: Vec<f64>, k: usize, response: Vec<f64>) -> Result<Self> {
        let names = (1..=k).map(|j| format!("x{j}")).collect();
        Self::with_names(features, k, response, names, "y".to_string())
    }

    pub fn with_names(
        features: Vec<f64>,
        k: usize,
        response: Vec<f64>,
        feature_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDataset("at least one feature column required".into()));
        }
        let n = response.len();
        if n == 0 {
            return Err(Error::InvalidDataset("at least one row required".into()));
        }
        if features.len() != n * k {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not form {n} rows of {k} columns",
                features.len()
            )));
        }
        if feature_names.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: feature_names.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / k,
                pos % k
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response at row {i}")));
        }

        let mut col_min = vec![f64::INFINITY; k];
        let mut col_max = vec![f64::NEG_INFINITY; k];
        let mut col_sum = vec![0.0; k];
        for row in features.chunks_exact(k) {
            for (j, &v) in row.iter().enumerate() {
                col_min[j] = col_min[j].min(v);
                col_max[j] = col_max[j].max(v);
                col_sum[j] += v;
            }
        }
        let col_mean = col_sum.into_iter().map(|s| s / n as f64).collect();
        let response_mean = response.iter().sum::<f64>() / n as f64;

        Ok(Dataset {
            n,
            k,
            features,
            response,
            col_min,
            col_max,
            col_mean,
            response_mean,
            feature_names,
            response_name,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.response[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn col_min(&self) -> &[f64] {
        &self.col_min
    }

    pub fn col_max(&self) -> &[f64] {
        &self.col_max
    }

    pub fn col_mean(&self) -> &[f64] {
        &self.col_mean
    }

    pub fn response_mean(&self) -> f64 {
        self.response_mean
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn all_rows(&self) -> RowIndexSet {
        RowIndexSet((0..self.n).collect())
    }

    /// Subtract column means (and the response mean).
    ///
    /// Returns the centered dataset and the subtracted offsets, features first
    /// and the response mean last.
    pub fn center(&self) -> (Dataset, Vec<f64>) {
        let k = self.k;
        let features = self
            .features
            .chunks_exact(k)
            .flat_map(|row| row.iter().zip(&self.col_mean).map(|(v, m)| v - m))
            .collect();
        let response = self.response.iter().map(|v| v - self.response_mean).collect();
        let mut offsets = self.col_mean.clone();
        offsets.push(self.response_mean);
        let centered = Dataset::with_names(
            features,
            k,
            response,
            self.feature_names.clone(),
            self.response_name.clone(),
        )
        .expect("centering preserves validity");
        (centered, offsets)
    }

    /// Copy the given rows into a new dataset with fresh statistics.
    pub fn subset_view(&self, rows: &RowIndexSet) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&last) = rows.as_slice().last() {
            if last >= self.n {
                return Err(Error::InvalidDataset(format!(
                    "row index {last} out of range for {} rows",
                    self.n
                )));
            }
        }
        let mut features = Vec::with_capacity(rows.len() * self.k);
        let mut response = Vec::with_capacity(rows.len());
        for &i in rows.iter() {
            features.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        Dataset::with_names(
            features,
            self.k,
            response,
            self.feature_names.clone(),
            self.response_name.clone(),
        )
    }
}

/// Sorted, duplicate-free row indices into a parent [`Dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct RowIndexSet(Vec<usize>);

impl From<Vec<usize>> for RowIndexSet {
    fn from(indices: Vec<usize>) -> Self {
        RowIndexSet::new(indices)
    }
}

impl From<RowIndexSet> for Vec<usize> {
    fn from(set: RowIndexSet) -> Self {
        set.0
    }
}

impl RowIndexSet {
    /// Sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        RowIndexSet(indices)
    }

    /// Wrap indices that are already strictly increasing.
    pub fn from_sorted(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset("row indices must be strictly increasing".into()));
        }
        Ok(RowIndexSet(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn is_valid_for(&self, ds: &Dataset) -> bool {
        self.0.last().is_none_or(|&i| i < ds.n())
    }
}

impl<'a> IntoIterator for &'a RowIndexSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Load a headed, comma-separated numeric file.
///
/// `response_column` names the response; `None` takes the last column.
/// Every other column becomes a feature, in file order.
pub fn load_csv(path: impl AsRef<Path>, response_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::InvalidDataset(
            "need at least one feature column and a response column".into(),
        ));
    }
    let response_idx = match response_column {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?,
        None => header.len() - 1,
    };
    let k = header.len() - 1;

    let mut features = Vec::new();
    let mut response = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = r + 2;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    column: header[c].clone(),
                    value: cell.to_string(),
                })?;
            if c == response_idx {
                response.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if response.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: response.len(),
        });
    }
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::with_names(features, k, response, feature_names, header[response_idx].clone())
}

/// Write the dataset as CSV: features in order, response last, 17 significant digits.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv_to(ds, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_csv_to<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    let mut header = ds.feature_names.join(",");
    header.push(',');
    header.push_str(&ds.response_name);
    writeln!(out, "{header}")?;
    let mut line = String::new();
    for i in 0..ds.n {
        line.clear();
        for &v in ds.row(i) {
            line.push_str(&g17(v));
            line.push(',');
        }
        line.push_str(&g17(ds.response[i]));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_simple_file() {
        let f = tmp_csv("x,y\n1,2\n2,4\n3,6\n");
        let ds = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!((ds.n(), ds.k()), (3, 1));
        assert_eq!(ds.col_mean(), &[2.0]);
        assert_eq!(ds.response_mean(), 4.0);
        assert_eq!(ds.col_min(), &[1.0]);
        assert_eq!(ds.col_max(), &[3.0]);
    }

    #[test]
    fn response_column_can_be_first() {
        let f = tmp_csv("y,a,b\n1,2,3\n4,5,6\n");
        let ds = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(ds.row(1), &[5.0, 6.0]);
        assert_eq!(ds.response(), &[1.0, 4.0]);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
        let last = load_csv(f.path(), None).unwrap();
        assert_eq!(last.response(), &[3.0, 6.0]);
    }

    #[test]
    fn scientific_notation_parses() {
        let f = tmp_csv("x,y\n1e-3,2.5E2\n-4,0\n");
        let ds = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.row(0), &[1e-3]);
        assert_eq!(ds.y(0), 250.0);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let f = tmp_csv("x,y\n1,2\nabc,4\n");
        match load_csv(f.path(), Some("y")) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_values_and_nan_rejected() {
        let f = tmp_csv("x,y\n1,\n2,3\n");
        assert!(matches!(load_csv(f.path(), None), Err(Error::Parse { .. })));
        let f = tmp_csv("x,y\n1,NaN\n2,3\n");
        assert!(matches!(load_csv(f.path(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn too_few_rows_and_missing_column() {
        let f = tmp_csv("x,y\n1,2\n");
        assert!(matches!(load_csv(f.path(), None), Err(Error::TooFewRows { .. })));
        let f = tmp_csv("x,y\n1,2\n3,4\n");
        assert!(matches!(load_csv(f.path(), Some("z")), Err(Error::MissingColumn(_))));
        assert!(matches!(load_csv("/nonexistent/file.csv", None), Err(Error::Io { .. })));
    }

    #[test]
    fn center_subtracts_means() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0], 1, vec![1.0, 1.0, 4.0]).unwrap();
        let (c, offsets) = ds.center();
        assert_eq!(c.features(), &[-1.0, 0.0, 1.0]);
        assert_eq!(offsets, vec![2.0, 2.0]);
        let (cc, off2) = c.center();
        assert_eq!(cc, c);
        assert!(off2.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn subset_view_identity_singleton_and_errors() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, vec![5.0, 6.0]).unwrap();
        assert_eq!(ds.subset_view(&ds.all_rows()).unwrap(), ds);
        let one = ds.subset_view(&RowIndexSet::new(vec![1])).unwrap();
        assert_eq!(one.n(), 1);
        assert_eq!(one.row(0), &[3.0, 4.0]);
        assert_eq!(one.col_mean(), &[3.0, 4.0]);
        assert!(matches!(ds.subset_view(&RowIndexSet::default()), Err(Error::EmptySubset)));
        assert!(ds.subset_view(&RowIndexSet::new(vec![2])).is_err());
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(Dataset::new(vec![1.0], 0, vec![1.0]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2, vec![1.0, 2.0]).is_err());
        assert!(Dataset::new(vec![f64::NAN], 1, vec![1.0]).is_err());
        assert!(Dataset::new(vec![1.0], 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn row_index_set_sorts() {
        let s = RowIndexSet::new(vec![5, 1, 3, 1]);
        assert_eq!(s.as_slice(), &[1, 3, 5]);
        assert!(s.contains(3) && !s.contains(2));
        assert!(RowIndexSet::from_sorted(vec![1, 1]).is_err());
    }
}
