//! Datasets: CSV ingestion, seeded synthetic generators, the thirds split,
//! standardization, the RBF bandwidth heuristic, metrics and grid search.

use std::collections::BTreeSet;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{sq_dist, Scalar};

/// Feature rows and labels, optionally partitioned into column views.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub feature_names: Option<Vec<String>>,
    /// Column ranges of `x` forming separate views.
    pub views: Option<Vec<Range<usize>>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Array2<T>, y: Array1<T>) -> Result<Self> {
        check_dim(x.nrows(), y.len())?;
        if x.iter().chain(y.iter()).any(|v| v.is_nan()) {
            return Err(Error::Data("dataset contains NaN".into()));
        }
        Ok(Self { x, y, feature_names: None, views: None })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            feature_names: self.feature_names.clone(),
            views: self.views.clone(),
        }
    }

    /// Columns of view `j`, or all columns when no views are defined.
    pub fn view(&self, j: usize) -> ArrayView2<'_, T> {
        match &self.views {
            Some(v) => self.x.slice(s![.., v[j].clone()]),
            None => self.x.view(),
        }
    }

    pub fn num_views(&self) -> usize {
        self.views.as_ref().map_or(1, Vec::len)
    }

    /// Distinct label values in ascending order.
    pub fn label_values(&self) -> Vec<T> {
        let mut v: Vec<T> = self.y.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("labels are not NaN"));
        v.dedup();
        v
    }
}

/// Which CSV column holds the label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Reads a comma-separated numeric table from `path`.
///
/// A two-valued label column that is not already `{−1, +1}` is mapped to
/// `−1` (smaller value) and `+1` (larger value).
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, label, has_header)
}

/// True when the first record of the file has a cell that does not parse
/// as a number.
pub fn sniff_header(path: impl AsRef<Path>) -> Result<bool> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path.as_ref()).map_err(csv_err)?;
    match rdr.records().next() {
        Some(rec) => Ok(rec.map_err(csv_err)?.iter().any(|c| c.trim().parse::<f64>().is_err())),
        None => Ok(false),
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, label: &LabelColumn, has_header: bool) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_reader(reader);
    let header: Option<Vec<String>> = if has_header {
        Some(rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let line_offset = usize::from(has_header);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut row = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Parse { row: r + line_offset, col: c, msg: "missing value".into() });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + line_offset,
                col: c,
                msg: format!("not a number: {cell:?}"),
            })?;
            if v.is_nan() {
                return Err(Error::Parse { row: r + line_offset, col: c, msg: "NaN value".into() });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    row: r + line_offset,
                    col: row.len(),
                    msg: format!("expected {} columns", first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV file has no data rows".into()));
    }
    let ncols = rows[0].len();
    let label_idx = match label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Data(format!("label column {name:?} not found in header")))?,
    };
    if label_idx >= ncols {
        return Err(Error::Data(format!("label column {label_idx} out of range for {ncols} columns")));
    }
    if ncols < 2 {
        return Err(Error::Data("CSV needs at least one feature column besides the label".into()));
    }
    let n = rows.len();
    let d = ncols - 1;
    let mut x = Array2::<T>::zeros((n, d));
    let mut y = Array1::<T>::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut j = 0;
        for (c, &v) in row.iter().enumerate() {
            if c == label_idx {
                y[i] = T::lit(v);
            } else {
                x[[i, j]] = T::lit(v);
                j += 1;
            }
        }
    }
    let mut ds = Dataset::new(x, y)?;
    let labels = ds.label_values();
    if labels.len() == 2 && !(labels[0] == -T::one() && labels[1] == T::one()) {
        let hi = labels[1];
        ds.y.mapv_inplace(|v| if v == hi { T::one() } else { -T::one() });
    }
    ds.feature_names = header.map(|h| h.into_iter().enumerate().filter(|(c, _)| *c != label_idx).map(|(_, s)| s).collect());
    Ok(ds)
}

/// Writes features followed by a `label` column, with a header row.
pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    let names: Vec<String> = match &ds.feature_names {
        Some(n) => n.clone(),
        None => (0..ds.d()).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(names.iter().map(String::as_str).chain(std::iter::once("label"))).map_err(csv_err)?;
    for (row, y) in ds.x.rows().into_iter().zip(ds.y.iter()) {
        let rec: Vec<String> = row.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}")).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shuffled index partition into thirds of sizes `⌈n/3⌉`, `⌈(n−⌈n/3⌉)/2⌉`
/// and the remainder.
pub fn thirds_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 rows to split in thirds, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let a = n.div_ceil(3);
    let b = (n - a).div_ceil(2);
    let test = idx.split_off(a + b);
    let val = idx.split_off(a);
    Ok((idx, val, test))
}

pub fn split_thirds<T: Scalar>(ds: &Dataset<T>, seed: u64) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    let (a, b, c) = thirds_indices(ds.n(), seed)?;
    Ok((ds.subset(&a), ds.subset(&b), ds.subset(&c)))
}

/// Mean Euclidean distance over all unordered pairs of distinct rows.
pub fn sigma_heuristic<T: Scalar>(x: ArrayView2<T>) -> Result<T> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Data("bandwidth heuristic needs at least two rows".into()));
    }
    let x = x.as_standard_layout();
    let rows: Vec<&[T]> = x.rows().into_iter().map(|r| r.to_slice().expect("standard layout")).collect();
    let mut total = T::zero();
    for i in 0..n {
        let mut row_sum = T::zero();
        for j in (i + 1)..n {
            row_sum += sq_dist(rows[i], rows[j]).sqrt();
        }
        total += row_sum;
    }
    let pairs = T::from_usize_lossy(n * (n - 1) / 2);
    let sigma = total / pairs;
    if !(sigma > T::zero()) {
        return Err(Error::Data("all rows are identical; bandwidth would be zero".into()));
    }
    Ok(sigma)
}

/// Per-feature affine map fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Column means and population standard deviations.
    pub fn fit(x: ArrayView2<T>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Data("cannot standardize an empty matrix".into()));
        }
        let nn = T::from_usize_lossy(n);
        let mean: Vec<T> = x.columns().into_iter().map(|c| c.iter().copied().sum::<T>() / nn).collect();
        let std = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, &m)| (c.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nn).sqrt())
            .collect();
        Ok(Self { mean, std })
    }

    /// `(x − mean) / std`, with zero-variance features mapped to 0.
    pub fn transform(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        check_dim(self.mean.len(), x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            if s > T::zero() {
                col.mapv_inplace(|v| (v - m) / s);
            } else {
                col.fill(T::zero());
            }
        }
        Ok(out)
    }
}

/// Standardized training set, the other sets and the fitted map.
pub type Standardized<T> = (Dataset<T>, Vec<Dataset<T>>, Standardizer<T>);

/// Standardizes `train` with its own statistics and applies the same map to
/// every dataset in `others`.
pub fn standardize<T: Scalar>(train: &Dataset<T>, others: &[&Dataset<T>]) -> Result<Standardized<T>> {
    let st = Standardizer::fit(train.x.view())?;
    let apply = |d: &Dataset<T>| -> Result<Dataset<T>> { Ok(Dataset { x: st.transform(d.x.view())?, ..d.clone() }) };
    let t = apply(train)?;
    let o = others.iter().map(|d| apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((t, o, st))
}

pub fn accuracy<T: Scalar>(y_true: ArrayView1<T>, y_pred: ArrayView1<T>) -> Result<f64> {
    check_dim(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::Input("accuracy of an empty set".into()));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

pub fn mse<T: Scalar>(y_true: ArrayView1<T>, y_pred: ArrayView1<T>) -> Result<f64> {
    check_dim(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::Input("mse of an empty set".into()));
    }
    let s: f64 = y_true.iter().zip(y_pred).map(|(&a, &b)| (a - b).to_f64_lossless().powi(2)).sum();
    Ok(s / y_true.len() as f64)
}

fn normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Gaussian blobs, samples assigned to centers round-robin. Two centers give
/// labels `+1` (first) and `−1` (second); more give class indices.
pub fn gen_blobs<T: Scalar>(n: usize, centers: &[Vec<T>], std: T, seed: u64) -> Result<Dataset<T>> {
    if centers.len() < 2 {
        return Err(Error::Input("need at least two blob centers".into()));
    }
    let d = centers[0].len();
    if d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(Error::Input("blob centers must share a positive dimension".into()));
    }
    if !(std >= T::zero()) || n == 0 {
        return Err(Error::Input("blobs need n >= 1 and std >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = centers.len();
    let mut x = Array2::<T>::zeros((n, d));
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let c = i % k;
        for j in 0..d {
            x[[i, j]] = centers[c][j] + std * normal::<T>(&mut rng);
        }
        y[i] = match k {
            2 if c == 0 => T::one(),
            2 => -T::one(),
            _ => T::from_usize_lossy(c),
        };
    }
    Dataset::new(x, y)
}

/// Synthetic classification data where only a few columns carry signal.
#[derive(Clone, Debug)]
pub struct SparseNoiseData<T> {
    pub dataset: Dataset<T>,
    /// `true` for signal columns.
    pub signal_mask: Vec<bool>,
}

/// Exponent vectors of every monomial in `vars` variables with total degree
/// between 1 and `degree`.
fn monomials(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(vars: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == vars {
            if cur.iter().sum::<u32>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(vars, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(vars, degree, &mut Vec::with_capacity(vars), &mut out);
    out
}

/// `d_signal` standard-normal signal features hidden among `d_noise`
/// standard-normal noise features at seeded positions. The label is the
/// sign of a random polynomial `Σ_α w_α s^α` over all monomials of the
/// signal features up to the given degree (`w_α ~ N(0, 1)`), centered at
/// its median so the classes are balanced.
pub fn gen_sparse_noise<T: Scalar>(
    n: usize,
    d_signal: usize,
    d_noise: usize,
    degree: u32,
    seed: u64,
) -> Result<SparseNoiseData<T>> {
    if n < 2 || d_signal == 0 {
        return Err(Error::Input("sparse-noise data needs n >= 2 and d_signal >= 1".into()));
    }
    if !matches!(degree, 1 | 2 | 5) {
        return Err(Error::Input(format!("relation degree must be 1, 2 or 5, got {degree}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = d_signal + d_noise;
    let mut cols: Vec<usize> = (0..d).collect();
    cols.shuffle(&mut rng);
    let signal_cols: Vec<usize> = {
        let mut s = cols[..d_signal].to_vec();
        s.sort_unstable();
        s
    };
    let terms = monomials(d_signal, degree);
    let w: Vec<f64> = (0..terms.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = Array2::<T>::zeros((n, d));
    let mut score = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..d {
            x[[i, j]] = normal(&mut rng);
        }
        let s: Vec<f64> = signal_cols.iter().map(|&c| x[[i, c]].to_f64_lossless()).collect();
        score[i] = terms
            .iter()
            .zip(&w)
            .map(|(e, wk)| wk * e.iter().zip(&s).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
            .sum();
    }
    let mut sorted = score.clone();
    sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let y = score.iter().map(|&p| if p >= median { T::one() } else { -T::one() }).collect();
    let mut mask = vec![false; d];
    for &c in &signal_cols {
        mask[c] = true;
    }
    Ok(SparseNoiseData { dataset: Dataset::new(x, y)?, signal_mask: mask })
}

/// Two-view binary data: view 0 holds two Gaussian blobs at `±separation`
/// along every axis (`d_informative` columns), view 1 is pure standard-normal
/// noise (`d_noise` columns) independent of the label.
pub fn gen_multiview<T: Scalar>(n: usize, d_informative: usize, d_noise: usize, separation: T, seed: u64) -> Result<Dataset<T>> {
    if n < 2 || d_informative == 0 || d_noise == 0 {
        return Err(Error::Input("multiview data needs n >= 2 and non-empty views".into()));
    }
    let pos = vec![separation; d_informative];
    let neg = vec![-separation; d_informative];
    let blobs = gen_blobs(n, &[pos, neg], T::one(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise = Array2::from_shape_fn((n, d_noise), |_| normal::<T>(&mut rng));
    let x = ndarray::concatenate![Axis(1), blobs.x, noise];
    let mut ds = Dataset::new(x, blobs.y)?;
    ds.views = Some(vec![0..d_informative, d_informative..d_informative + d_noise]);
    Ok(ds)
}

/// Smooth nonlinear regression target `Σ_j w_j sin(x_j) + noise` over
/// standard-normal inputs.
pub fn gen_regression<T: Scalar>(n: usize, d: usize, noise: T, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || d == 0 {
        return Err(Error::Input("regression data needs n, d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<T> = (0..d).map(|_| normal(&mut rng)).collect();
    let x = Array2::from_shape_fn((n, d), |_| normal::<T>(&mut rng));
    let y = x
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&w).map(|(&v, &wj)| wj * v.sin()).sum::<T>() + noise * normal::<T>(&mut rng))
        .collect();
    Dataset::new(x, y)
}

/// `points` values evenly spaced in log10 between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points).map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64)).collect()
        }
    }
}

/// Weight-penalty grid: 6 points from 1e-5 to 1.
pub fn lambda_grid() -> Vec<f64> {
    log_grid(1e-5, 1.0, 6)
}

/// l1 radius grid for basis vectors: 9 points from 0.1 to 1000.
pub fn radius_grid() -> Vec<f64> {
    log_grid(1e-1, 1e3, 9)
}

/// Whether larger or smaller validation scores win.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Evaluates every candidate (in parallel) and returns the index of the
/// best score together with all scores. Ties go to the earliest candidate,
/// so callers order candidates by preference (e.g. ascending λ, then
/// ascending radius). Candidates whose evaluation fails are skipped.
pub fn grid_search<C, F>(candidates: &[C], direction: Direction, eval: F) -> Result<(usize, Vec<Option<f64>>)>
where
    C: Sync,
    F: Fn(&C) -> Result<f64> + Sync,
{
    let scores: Vec<Option<f64>> = candidates.par_iter().map(|c| eval(c).ok().filter(|s| s.is_finite())).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            let better = match best {
                None => true,
                Some((_, b)) => match direction {
                    Direction::Maximize => s > b,
                    Direction::Minimize => s < b,
                },
            };
            if better {
                best = Some((i, s));
            }
        }
    }
    let (idx, _) = best.ok_or_else(|| Error::Numerical("every grid candidate failed".into()))?;
    Ok((idx, scores))
}

/// Sorted distinct values, for label bookkeeping in tests and reports.
pub fn distinct_usize(v: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    v.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parses_small_csv() {
        let ds: Dataset<f64> = read_csv("1,2,+1\n3,4,-1\n".as_bytes(), &LabelColumn::Index(2), false).unwrap();
        assert_eq!(ds.x, array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(ds.y, array![1.0, -1.0]);
        assert!(ds.feature_names.is_none());
    }

    #[test]
    fn header_and_label_by_name() {
        let text = "a,label,b\n1,0,2\n3,1,4\n5,1,6\n";
        let ds: Dataset<f64> = read_csv(text.as_bytes(), &LabelColumn::Name("label".into()), true).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.feature_names, Some(vec!["a".to_string(), "b".to_string()]));
        // 0/1 labels are mapped onto -1/+1
        assert_eq!(ds.y, array![-1.0, 1.0, 1.0]);
        assert_eq!(ds.x.row(2).to_vec(), vec![5.0, 6.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(read_csv::<f64, _>("".as_bytes(), &LabelColumn::Index(0), false).is_err());
        let e = read_csv::<f64, _>("1,2\n3,x\n".as_bytes(), &LabelColumn::Index(1), false).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 1, col: 1, .. }), "{e:?}");
        let e = read_csv::<f64, _>("1,2\n3,\n".as_bytes(), &LabelColumn::Index(1), false).unwrap_err();
        assert!(matches!(e, Error::Parse { row: 1, col: 1, .. }));
        assert!(read_csv::<f64, _>("1,2\n".as_bytes(), &LabelColumn::Index(5), false).is_err());
        assert!(read_csv::<f64, _>("a,b\n1,2\n".as_bytes(), &LabelColumn::Name("zz".into()), true).is_err());
    }

    #[test]
    fn multi_valued_labels_kept() {
        let ds: Dataset<f64> = read_csv("1,0\n2,1\n3,2\n".as_bytes(), &LabelColumn::Index(1), false).unwrap();
        assert_eq!(ds.y, array![0.0, 1.0, 2.0]);
    }

    #[test]
    fn thirds_sizes() {
        let (a, b, c) = thirds_indices(9, 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (3, 3, 3));
        let (a, b, c) = thirds_indices(10, 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (4, 3, 3));
        assert!(thirds_indices(2, 0).is_err());
    }

    #[test]
    fn thirds_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..100 {
            let n = rng.gen_range(3..500);
            let (a, b, c) = thirds_indices(n, seed).unwrap();
            let all: BTreeSet<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            assert_eq!(all.len(), n);
            assert_eq!(a.len() + b.len() + c.len(), n);
            assert_eq!(*all.iter().next_back().unwrap(), n - 1);
        }
    }

    #[test]
    fn sigma_examples() {
        let x: Array2<f64> = array![[0.0], [1.0], [2.0]];
        assert!((sigma_heuristic(x.view()).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let x: Array2<f64> = array![[0.0], [0.0], [3.0]];
        assert_eq!(sigma_heuristic(x.view()).unwrap(), 2.0);
        assert!(sigma_heuristic(array![[1.0, 2.0], [1.0, 2.0]].view()).is_err());
        assert!(sigma_heuristic(array![[1.0]].view()).is_err());
    }

    #[test]
    fn sigma_translation_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Array2<f64> = Array2::from_shape_fn((20, 3), |_| rng.gen_range(-1.0..1.0));
        let s = sigma_heuristic(x.view()).unwrap();
        let shifted = &x + 7.0;
        assert!((sigma_heuristic(shifted.view()).unwrap() - s).abs() < 1e-12);
        let scaled = &x * 4.0;
        assert!((sigma_heuristic(scaled.view()).unwrap() - 4.0 * s).abs() < 1e-12);
    }

    #[test]
    fn metrics() {
        let a = array![1.0, -1.0];
        assert_eq!(accuracy(a.view(), a.view()).unwrap(), 1.0);
        assert_eq!(mse(a.view(), a.view()).unwrap(), 0.0);
        assert_eq!(accuracy(a.view(), array![1.0, 1.0].view()).unwrap(), 0.5);
        assert_eq!(mse(array![0.0, 0.0].view(), array![1.0, -1.0].view()).unwrap(), 1.0);
        assert!(accuracy(a.view(), array![1.0].view()).is_err());
        assert!(mse(a.view(), array![1.0].view()).is_err());
    }

    #[test]
    fn standardize_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((40, 3), |(_, j)| rng.gen_range(-1.0..1.0) * (j as f64 + 1.0) + 5.0);
        let mut x = x;
        x.column_mut(2).fill(3.0);
        let ds = Dataset::new(x, Array1::zeros(40)).unwrap();
        let (t, _, st) = standardize(&ds, &[]).unwrap();
        for j in 0..2 {
            let c = t.x.column(j);
            let m = c.sum() / 40.0;
            let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 40.0;
            assert!(m.abs() < 1e-10 && (v.sqrt() - 1.0).abs() < 1e-10);
        }
        assert!(t.x.column(2).iter().all(|v| *v == 0.0));
        // unit statistics leave data unchanged
        let again = Standardizer::fit(t.x.view()).unwrap().transform(t.x.slice(s![.., 0..2]).view());
        assert!(again.is_err());
        let st2 = Standardizer::fit(t.x.slice(s![.., 0..2])).unwrap();
        let back = st2.transform(t.x.slice(s![.., 0..2])).unwrap();
        assert!((&back - &t.x.slice(s![.., 0..2])).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(st.mean.len(), 3);
    }

    #[test]
    fn blobs_nearest_centroid_perfect() {
        let ds = gen_blobs(100, &[vec![10.0, 0.0], vec![-10.0, 0.0]], 0.1, 3).unwrap();
        let pred = ds.x.column(0).mapv(|v| if v > 0.0 { 1.0 } else { -1.0 });
        assert_eq!(accuracy(ds.y.view(), pred.view()).unwrap(), 1.0);
        // deterministic
        assert_eq!(ds, gen_blobs(100, &[vec![10.0, 0.0], vec![-10.0, 0.0]], 0.1, 3).unwrap());
    }

    #[test]
    fn sparse_noise_bookkeeping() {
        let d = gen_sparse_noise::<f64>(50, 2, 18, 2, 4).unwrap();
        assert_eq!(d.dataset.d(), 20);
        assert_eq!(d.signal_mask.iter().filter(|m| **m).count(), 2);
        let e = gen_sparse_noise::<f64>(50, 2, 18, 2, 4).unwrap();
        assert_eq!(d.dataset, e.dataset);
        assert!(gen_sparse_noise::<f64>(50, 2, 18, 3, 4).is_err());
    }

    #[test]
    fn linear_relation_is_linearly_separable() {
        // least squares on the signal columns + intercept, thresholded at 0
        let data = gen_sparse_noise::<f64>(300, 3, 27, 1, 12).unwrap();
        let cols: Vec<usize> = (0..30).filter(|&j| data.signal_mask[j]).collect();
        let mut a = data.dataset.x.select(Axis(1), &cols);
        a.push_column(Array1::ones(300).view()).unwrap();
        let fit = crate::sparseops::lasso_cd(a.view(), data.dataset.y.view(), 0.0, 1e-12, 10_000).unwrap();
        let pred = crate::linalg::matvec(a.view(), fit.coef.view()).unwrap().mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        assert!(accuracy(data.dataset.y.view(), pred.view()).unwrap() >= 0.95);
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(3, 1).len(), 3);
        assert_eq!(monomials(3, 2).len(), 9);
        assert_eq!(monomials(3, 5).len(), 55);
        assert!(monomials(2, 2).iter().all(|e| (1..=2).contains(&e.iter().sum::<u32>())));
    }

    #[test]
    fn multiview_layout() {
        let ds = gen_multiview::<f64>(30, 2, 5, 2.0, 1).unwrap();
        assert_eq!(ds.d(), 7);
        assert_eq!(ds.num_views(), 2);
        assert_eq!(ds.view(1).ncols(), 5);
    }

    #[test]
    fn grids() {
        let g = lambda_grid();
        assert_eq!(g.len(), 6);
        assert!((g[0] - 1e-5).abs() < 1e-20 && (g[5] - 1.0).abs() < 1e-12);
        let r = radius_grid();
        assert_eq!(r.len(), 9);
        assert!((r[4] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn grid_search_tie_goes_first() {
        let c = [1, 2, 3, 4];
        let (i, _) = grid_search(&c, Direction::Maximize, |&v| Ok(if v >= 2 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(i, 1);
        let (i, s) = grid_search(&c, Direction::Minimize, |&v| {
            if v == 1 { Err(Error::Numerical("x".into())) } else { Ok(v as f64) }
        })
        .unwrap();
        assert_eq!(i, 1);
        assert!(s[0].is_none());
    }
}
