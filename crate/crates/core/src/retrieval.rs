//! Hamming-space retrieval and its metric suite: Hamming ranking, hash
//! lookup at radius 2, mean average precision (optionally over a top-k
//! prefix), precision/recall/F-measure, and averaged precision-recall
//! curves.
//!
//! Ground truth follows label sets: a database item is relevant to a query
//! when their label sets intersect. A query whose radius-2 retrieval set is
//! empty contributes 0 precision, and a query with no relevant items
//! contributes 0 to every averaged metric; queries are always counted.
//!
//! Codes travel in two formats: text (one sample per line, `c`
//! space-separated entries in {-1, +1}) and packed binary (magic
//! `DSAHCODE`, little-endian u32 `n` and u32 `c`, then ceil(c/8) bytes per
//! sample, bit = 1 meaning +1, most significant bit first).

use crate::dataio::{share_any, Dataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::trainer::TrainState;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const CODES_MAGIC: &[u8; 8] = b"DSAHCODE";

/// Hash-lookup radius used for the precision/recall/F-measure metrics.
pub const LOOKUP_RADIUS: u32 = 2;

/// Bit-packed binary codes with per-sample label sets.
#[derive(Debug, Clone)]
pub struct CodeDatabase {
    n: usize,
    code_len: usize,
    width: usize,
    codes: Vec<u8>,
    labels: Vec<Vec<usize>>,
}

fn pack_row(row: &[f64], out: &mut [u8]) {
    for b in out.iter_mut() {
        *b = 0;
    }
    for (j, &v) in row.iter().enumerate() {
        if v > 0.0 {
            out[j / 8] |= 1 << (7 - (j % 8));
        }
    }
}

impl CodeDatabase {
    /// Packs an n x c matrix over {-1, +1}. Labels must align with the rows.
    pub fn from_sign_matrix(codes: &Matrix, labels: Vec<Vec<usize>>) -> Result<CodeDatabase> {
        if codes.rows() != labels.len() {
            return Err(Error::RowCountMismatch {
                features: codes.rows(),
                labels: labels.len(),
            });
        }
        if let Some(v) = codes.as_slice().iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(format!(
                "code entries must be -1 or +1, got {v}"
            )));
        }
        let (n, c) = (codes.rows(), codes.cols());
        let width = c.div_ceil(8);
        let mut packed = vec![0u8; n * width];
        for i in 0..n {
            pack_row(codes.row(i), &mut packed[i * width..(i + 1) * width]);
        }
        Ok(CodeDatabase {
            n,
            code_len: c,
            width,
            codes: packed,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.width..(i + 1) * self.width]
    }

    pub fn labels_of(&self, i: usize) -> &[usize] {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Unpacks back to the source sign matrix.
    pub fn unpack(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.code_len);
        for i in 0..self.n {
            let row = self.code(i);
            for j in 0..self.code_len {
                let bit = row[j / 8] >> (7 - (j % 8)) & 1;
                m.set(i, j, if bit == 1 { 1.0 } else { -1.0 });
            }
        }
        m
    }
}

/// Number of differing bits between two equal-width packed codes.
pub fn hamming_distance(a: &[u8], b: &[u8]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::dim(
            "hamming_distance",
            format!("{} vs {} bytes", a.len(), b.len()),
        ));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| (x ^ y).count_ones()).sum())
}

/// Database indices sorted by ascending Hamming distance to the query;
/// ties resolve toward the smaller index.
pub fn rank_by_hamming(db: &CodeDatabase, query_code: &[u8]) -> Result<Vec<usize>> {
    if db.n == 0 {
        return Err(Error::InvalidArgument("empty code database".into()));
    }
    let dists = distances_to(db, query_code)?;
    let mut order: Vec<usize> = (0..db.n).collect();
    order.sort_by_key(|&i| (dists[i], i));
    Ok(order)
}

fn distances_to(db: &CodeDatabase, query_code: &[u8]) -> Result<Vec<u32>> {
    (0..db.n)
        .map(|i| hamming_distance(db.code(i), query_code))
        .collect()
}

/// Mean, over the relevant positions within the (optionally truncated)
/// ranking, of the precision at each relevant position. 0 when no relevant
/// item appears in range.
pub fn average_precision(ranked_relevance: &[bool], top_k: Option<usize>) -> f64 {
    let limit = top_k.map_or(ranked_relevance.len(), |k| k.min(ranked_relevance.len()));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &rel) in ranked_relevance[..limit].iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Retrieval quality over a query set.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub map: f64,
    pub precision_r2: f64,
    pub recall_r2: f64,
    pub f_measure_r2: f64,
    /// Averaged (recall, precision) at every rank threshold 1..=n.
    pub pr_curve: Vec<(f64, f64)>,
}

/// Hamming-ranking and radius-2 hash-lookup metrics of `queries` against
/// `db`. `top_k` truncates the ranking used for mean average precision.
pub fn evaluate(
    db: &CodeDatabase,
    queries: &CodeDatabase,
    top_k: Option<usize>,
) -> Result<MetricsReport> {
    if db.code_len != queries.code_len {
        return Err(Error::dim(
            "evaluate",
            format!(
                "db codes {} bits, query codes {} bits",
                db.code_len, queries.code_len
            ),
        ));
    }
    if queries.n == 0 {
        return Err(Error::InvalidArgument("empty query set".into()));
    }
    if db.n == 0 {
        return Err(Error::InvalidArgument("empty code database".into()));
    }

    let n = db.n;
    let mut map_sum = 0.0;
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut curve_prec_at_rank = vec![0.0f64; n]; // summed precision at each rank threshold
    let mut curve_rec_at_rank = vec![0.0f64; n];

    for qi in 0..queries.n {
        let dists = distances_to(db, queries.code(qi))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (dists[i], i));

        let relevant: Vec<bool> = (0..n)
            .map(|i| share_any(db.labels_of(i), queries.labels_of(qi)))
            .collect();
        let total_relevant = relevant.iter().filter(|&&r| r).count();

        let ranked_relevance: Vec<bool> = order.iter().map(|&i| relevant[i]).collect();
        map_sum += average_precision(&ranked_relevance, top_k);

        let mut retrieved = 0usize;
        let mut retrieved_relevant = 0usize;
        for i in 0..n {
            if dists[i] <= LOOKUP_RADIUS {
                retrieved += 1;
                if relevant[i] {
                    retrieved_relevant += 1;
                }
            }
        }
        if retrieved > 0 {
            prec_sum += retrieved_relevant as f64 / retrieved as f64;
        }
        if total_relevant > 0 {
            rec_sum += retrieved_relevant as f64 / total_relevant as f64;
        }

        let mut hits = 0usize;
        for (t, &rel) in ranked_relevance.iter().enumerate() {
            if rel {
                hits += 1;
            }
            curve_prec_at_rank[t] += hits as f64 / (t + 1) as f64;
            if total_relevant > 0 {
                curve_rec_at_rank[t] += hits as f64 / total_relevant as f64;
            }
        }
    }

    let qn = queries.n as f64;
    let precision_r2 = prec_sum / qn;
    let recall_r2 = rec_sum / qn;
    let f_measure_r2 = if precision_r2 + recall_r2 > 0.0 {
        2.0 * precision_r2 * recall_r2 / (precision_r2 + recall_r2)
    } else {
        0.0
    };
    let pr_curve = (0..n)
        .map(|t| (curve_rec_at_rank[t] / qn, curve_prec_at_rank[t] / qn))
        .collect();

    Ok(MetricsReport {
        map: map_sum / qn,
        precision_r2,
        recall_r2,
        f_measure_r2,
        pr_curve,
    })
}

/// Asymmetric protocol: the database keeps the directly learned training
/// codes, queries are encoded through the network and signed.
pub fn evaluate_asymmetric(
    state: &TrainState,
    train_data: &Dataset,
    queries: &Dataset,
    top_k: Option<usize>,
) -> Result<MetricsReport> {
    let db = CodeDatabase::from_sign_matrix(&state.h, train_data.labels().to_vec())?;
    let query_codes = state.theta1().encode_binary(queries.features())?;
    let q = CodeDatabase::from_sign_matrix(&query_codes, queries.labels().to_vec())?;
    evaluate(&db, &q, top_k)
}

/// Symmetric protocol: both database and query codes come from the network
/// followed by the sign function.
pub fn evaluate_symmetric(
    state: &TrainState,
    train_data: &Dataset,
    queries: &Dataset,
    top_k: Option<usize>,
) -> Result<MetricsReport> {
    let db_codes = state.theta1().encode_binary(train_data.features())?;
    let db = CodeDatabase::from_sign_matrix(&db_codes, train_data.labels().to_vec())?;
    let query_codes = state.theta1().encode_binary(queries.features())?;
    let q = CodeDatabase::from_sign_matrix(&query_codes, queries.labels().to_vec())?;
    evaluate(&db, &q, top_k)
}

/// Writes codes as text: one sample per line, space-separated -1/1 entries.
pub fn write_codes_text(path: impl AsRef<Path>, codes: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..codes.rows() {
        let row: Vec<&str> = codes
            .row(i)
            .iter()
            .map(|&v| if v > 0.0 { "1" } else { "-1" })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_codes_text(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| match tok {
                "1" | "+1" => Ok(1.0),
                "-1" => Ok(-1.0),
                other => Err(Error::MalformedRow {
                    path: shown.clone(),
                    line: lineno + 1,
                    detail: format!("code entry {other:?} is not -1 or 1"),
                }),
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::BadFormat {
            path: shown,
            detail: "no code rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}

/// Writes codes in the packed binary layout.
pub fn write_codes_packed(path: impl AsRef<Path>, codes: &Matrix) -> Result<()> {
    let (n, c) = (codes.rows(), codes.cols());
    let width = c.div_ceil(8);
    let mut bytes = Vec::with_capacity(16 + n * width);
    bytes.extend_from_slice(CODES_MAGIC);
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&(c as u32).to_le_bytes());
    let mut row_buf = vec![0u8; width];
    for i in 0..n {
        pack_row(codes.row(i), &mut row_buf);
        bytes.extend_from_slice(&row_buf);
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_codes_packed(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bad = |detail: String| Error::BadFormat {
        path: shown.clone(),
        detail,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != CODES_MAGIC {
        return Err(bad("missing DSAHCODE header".into()));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let width = c.div_ceil(8);
    if bytes.len() != 16 + n * width {
        return Err(bad(format!(
            "expected {} code bytes for {}x{}, got {}",
            n * width,
            n,
            c,
            bytes.len() - 16
        )));
    }
    let mut m = Matrix::zeros(n, c);
    for i in 0..n {
        let row = &bytes[16 + i * width..16 + (i + 1) * width];
        for j in 0..c {
            let bit = row[j / 8] >> (7 - (j % 8)) & 1;
            m.set(i, j, if bit == 1 { 1.0 } else { -1.0 });
        }
    }
    Ok(m)
}

/// Reads codes in either format, detecting the packed layout by its magic.
pub fn read_codes(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut head = [0u8; 8];
    let got = fs::File::open(path)?.read(&mut head)?;
    if got == 8 && &head == CODES_MAGIC {
        read_codes_packed(path)
    } else {
        read_codes_text(path)
    }
}

/// Writes `metric,value` rows for the scalar metrics.
pub fn write_metrics_csv(path: impl AsRef<Path>, report: &MetricsReport) -> Result<()> {
    let out = format!(
        "metric,value\nmap,{}\nprecision_r2,{}\nrecall_r2,{}\nf_measure_r2,{}\n",
        report.map, report.precision_r2, report.recall_r2, report.f_measure_r2
    );
    fs::write(path, out)?;
    Ok(())
}

/// Writes the averaged precision-recall curve as `recall,precision` rows.
pub fn write_pr_curve_csv(path: impl AsRef<Path>, report: &MetricsReport) -> Result<()> {
    let mut out = String::from("recall,precision\n");
    for (r, p) in &report.pr_curve {
        out.push_str(&format!("{r},{p}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
