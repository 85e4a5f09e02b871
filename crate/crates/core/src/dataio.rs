//! Dataset ingestion, dual semantic label construction, affinity-graph and
//! indicator-matrix construction, and a synthetic clustered benchmark.
//!
//! File formats:
//! - features: CSV (one sample per row, `d` real columns, no header) or a
//!   binary layout with a 16-byte header (magic `DSAHFEAT`, little-endian
//!   u32 `n`, u32 `d`) followed by `n*d` little-endian f64 values;
//! - labels: CSV, one row per sample; a single integer for single-label
//!   data or semicolon-separated integers for multi-label data.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const FEATURES_MAGIC: &[u8; 8] = b"DSAHFEAT";

/// Training data: an n x d feature matrix with one label set per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<Vec<usize>>,
    k: usize,
}

impl Dataset {
    /// Validates that every sample carries at least one label, every label
    /// id is below `k`, and the label records match the feature rows.
    /// Label sets are stored sorted and deduplicated.
    pub fn new(features: Matrix, labels: Vec<Vec<usize>>, k: usize) -> Result<Dataset> {
        if features.rows() != labels.len() {
            return Err(Error::RowCountMismatch {
                features: features.rows(),
                labels: labels.len(),
            });
        }
        let mut labels = labels;
        for (i, set) in labels.iter_mut().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!("sample {i} has no labels")));
            }
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&l| l >= k) {
                return Err(Error::LabelOutOfRange {
                    sample: i,
                    label: bad,
                    k,
                });
            }
        }
        Ok(Dataset {
            features,
            labels,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn labels_of(&self, i: usize) -> &[usize] {
        &self.labels[i]
    }

    pub fn share_label(&self, i: usize, j: usize) -> bool {
        share_any(&self.labels[i], &self.labels[j])
    }

    pub fn batch_features(&self, indices: &[usize]) -> Result<Matrix> {
        self.features.select_rows(indices)
    }
}

/// True when two sorted label sets intersect.
pub fn share_any(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Paired label matrices: `y` marks class membership at scale sqrt(beta1),
/// `r` marks class absence at scale sqrt(beta2). For single-label data the
/// two are complementary indicators.
#[derive(Debug, Clone)]
pub struct DualLabels {
    pub y: Matrix,
    pub r: Matrix,
    pub beta1: f64,
    pub beta2: f64,
}

pub fn build_dual_labels(dataset: &Dataset, beta1: f64, beta2: f64) -> Result<DualLabels> {
    if beta1 < 0.0 || beta2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "dual label scales must be nonnegative, got beta1 = {beta1}, beta2 = {beta2}"
        )));
    }
    let (n, k) = (dataset.n(), dataset.k());
    let sb1 = beta1.sqrt();
    let sb2 = beta2.sqrt();
    let mut y = Matrix::zeros(n, k);
    let mut r = Matrix::zeros(n, k);
    for i in 0..n {
        let present = dataset.labels_of(i);
        let mut next = 0;
        for j in 0..k {
            if next < present.len() && present[next] == j {
                y.set(i, j, sb1);
                next += 1;
            } else {
                r.set(i, j, sb2);
            }
        }
    }
    Ok(DualLabels { y, r, beta1, beta2 })
}

/// Per-batch affinity graph and class indicator.
///
/// `w` is the m x m batch similarity matrix (1 where two batch samples share
/// a label, 0 otherwise; the diagonal is 1), `degrees` its row sums. `s` is
/// the n x m indicator with entry `1/|kappa(i)|` where training sample `i`
/// shares a label with batch sample `j`; `kappa_sizes[i]` counts the
/// training samples sharing a label with `i`, over the whole training set
/// and including `i` itself. `s_col_mass` caches the column sums of `s`.
#[derive(Debug, Clone)]
pub struct BatchGraph {
    pub batch_indices: Vec<usize>,
    pub w: Matrix,
    pub degrees: Vec<f64>,
    pub s: Matrix,
    pub s_col_mass: Vec<f64>,
    pub kappa_sizes: Vec<usize>,
}

pub fn build_batch_graph(dataset: &Dataset, batch_indices: &[usize]) -> Result<BatchGraph> {
    if batch_indices.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = dataset.n();
    let m = batch_indices.len();
    let mut seen = vec![false; n];
    for &i in batch_indices {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "batch index {i} out of range ({n} samples)"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!("duplicate batch index {i}")));
        }
        seen[i] = true;
    }

    let mut w = Matrix::zeros(m, m);
    for a in 0..m {
        w.set(a, a, 1.0);
        for b in a + 1..m {
            if dataset.share_label(batch_indices[a], batch_indices[b]) {
                w.set(a, b, 1.0);
                w.set(b, a, 1.0);
            }
        }
    }
    let degrees: Vec<f64> = (0..m).map(|a| w.row(a).iter().sum()).collect();

    let mut kappa_sizes = vec![0usize; n];
    for i in 0..n {
        kappa_sizes[i] = (0..n).filter(|&j| dataset.share_label(i, j)).count();
    }

    let mut s = Matrix::zeros(n, m);
    for i in 0..n {
        let weight = 1.0 / kappa_sizes[i] as f64;
        for (b, &j) in batch_indices.iter().enumerate() {
            if dataset.share_label(i, j) {
                s.set(i, b, weight);
            }
        }
    }
    let s_col_mass = s.col_sums();

    Ok(BatchGraph {
        batch_indices: batch_indices.to_vec(),
        w,
        degrees,
        s,
        s_col_mass,
        kappa_sizes,
    })
}

/// Shuffles `[0, n)` and slices it into ceil(n/m) disjoint batches whose
/// union covers every sample; the last batch may be smaller than `m`.
pub fn sample_epoch_batches(n: usize, m: usize, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "batch size {m} exceeds sample count {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    Ok(perm.chunks(m).map(|c| c.to_vec()).collect())
}

fn parse_features_csv(path: &str, text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::MalformedRow {
                    path: path.to_string(),
                    line: lineno + 1,
                    detail: format!("bad number {:?}: {e}", tok.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedRow {
                path: path.to_string(),
                line: lineno + 1,
                detail: "non-finite feature value".into(),
            });
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::MalformedRow {
                    path: path.to_string(),
                    line: lineno + 1,
                    detail: format!("{} columns, expected {}", row.len(), w),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::BadFormat {
            path: path.to_string(),
            detail: "no feature rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}

fn parse_features_binary(path: &str, bytes: &[u8]) -> Result<Matrix> {
    let bad = |detail: &str| Error::BadFormat {
        path: path.to_string(),
        detail: detail.to_string(),
    };
    if bytes.len() < 16 || &bytes[..8] != FEATURES_MAGIC {
        return Err(bad("missing DSAHFEAT header"));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + n * d * 8;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "expected {expected} bytes for {n}x{d}, got {}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for chunk in bytes[16..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Matrix::from_vec(n, d, data)
}

/// Reads a features file, detecting the binary layout by its magic bytes
/// and falling back to CSV otherwise.
pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() >= 8 && &bytes[..8] == FEATURES_MAGIC {
        parse_features_binary(&shown, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::BadFormat {
            path: shown.clone(),
            detail: "not valid UTF-8 CSV".into(),
        })?;
        parse_features_csv(&shown, &text)
    }
}

/// Reads a labels file: one row per sample, semicolon-separated label ids.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let set: Vec<usize> = line
            .split(';')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::MalformedRow {
                        path: shown.clone(),
                        line: lineno + 1,
                        detail: format!("bad label {:?}: {e}", tok.trim()),
                    })
            })
            .collect::<Result<_>>()?;
        out.push(set);
    }
    Ok(out)
}

/// Loads a dataset from a features file and a labels file. The class count
/// is inferred as the largest label id plus one.
pub fn load_dataset(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let features = read_features(features_path)?;
    let labels = read_labels(labels_path)?;
    let k = labels
        .iter()
        .flat_map(|set| set.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    Dataset::new(features, labels, k)
}

pub fn write_features_csv(path: impl AsRef<Path>, features: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_features_binary(path: impl AsRef<Path>, features: &Matrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + features.rows() * features.cols() * 8);
    bytes.extend_from_slice(FEATURES_MAGIC);
    bytes.extend_from_slice(&(features.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(features.cols() as u32).to_le_bytes());
    for v in features.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[Vec<usize>]) -> Result<()> {
    let mut out = String::new();
    for set in labels {
        let row: Vec<String> = set.iter().map(|l| l.to_string()).collect();
        out.push_str(&row.join(";"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generates `k` Gaussian clusters with unit-norm random centers and
/// isotropic noise of scale `spread`; labels are the cluster ids, samples
/// ordered class by class.
pub fn make_synthetic_clusters(
    k: usize,
    per_class: usize,
    d: usize,
    spread: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if k == 0 || per_class == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "cluster counts and dimension must be positive".into(),
        ));
    }
    if spread < 0.0 || !spread.is_finite() {
        return Err(Error::InvalidArgument(format!("bad spread {spread}")));
    }
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let mut c: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        c.iter_mut().for_each(|v| *v /= norm);
        centers.push(c);
    }
    let n = k * per_class;
    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for class in 0..k {
        for s in 0..per_class {
            let i = class * per_class + s;
            for j in 0..d {
                features.set(i, j, centers[class][j] + spread * rng.normal());
            }
            labels.push(vec![class]);
        }
    }
    Dataset::new(features, labels, k)
}

/// Splits a dataset into (train, query) parts, sampling `query_fraction`
/// of each class into the query set.
pub fn stratified_split(
    dataset: &Dataset,
    query_fraction: f64,
    rng: &mut SeededRng,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&query_fraction) {
        return Err(Error::InvalidArgument(format!(
            "query fraction must be in [0, 1), got {query_fraction}"
        )));
    }
    let mut is_query = vec![false; dataset.n()];
    for class in 0..dataset.k() {
        // multi-label samples are assigned by their smallest label so each
        // sample is considered exactly once
        let mut members: Vec<usize> = (0..dataset.n())
            .filter(|&i| dataset.labels_of(i)[0] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        rng.shuffle(&mut members);
        let q = ((members.len() as f64) * query_fraction).floor() as usize;
        for &i in &members[..q] {
            is_query[i] = true;
        }
    }
    let train_idx: Vec<usize> = (0..dataset.n()).filter(|&i| !is_query[i]).collect();
    let query_idx: Vec<usize> = (0..dataset.n()).filter(|&i| is_query[i]).collect();
    if train_idx.is_empty() || query_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "stratified split produced an empty part".into(),
        ));
    }
    let take = |idx: &[usize]| -> Result<Dataset> {
        Dataset::new(
            dataset.features.select_rows(idx)?,
            idx.iter().map(|&i| dataset.labels[i].clone()).collect(),
            dataset.k,
        )
    };
    Ok((take(&train_idx)?, take(&query_idx)?))
}
