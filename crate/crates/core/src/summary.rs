//! Factorized path-count summaries of a partially labeled graph.
//!
//! For each path length `ℓ` the summary is the `k × k` matrix
//! `M(ℓ) = Eᵀ W_NB(ℓ) E` counting non-backtracking paths between labeled
//! nodes of each class pair, plus its normalized form `P̂(ℓ)`. Every `n × n`
//! path matrix is applied to `E` from the right through the recurrence
//!
//! ```text
//! N(1) = W E
//! N(2) = W N(1) - D E
//! N(ℓ) = W N(ℓ-1) - (D - I) N(ℓ-2)
//! ```
//!
//! so only two `n × k` intermediates are alive at any time and the cost is
//! `O(m k ℓmax)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelSet, SparseGraph};

/// Node cap for [`nb_walk_counts_dense`].
pub const DENSE_CAP: usize = 2000;

/// How a raw count matrix is turned into statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `diag(M 1)⁻¹ M`.
    #[default]
    Row,
    /// `diag(M 1)^{-1/2} M diag(M 1)^{-1/2}`.
    Symmetric,
    /// `k M / (1ᵀ M 1)`.
    Scaled,
}

impl Variant {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Variant::Row),
            2 => Ok(Variant::Symmetric),
            3 => Ok(Variant::Scaled),
            _ => Err(Error::Invalid(format!("normalization variant must be 1, 2 or 3, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Variant::Row => 1,
            Variant::Symmetric => 2,
            Variant::Scaled => 3,
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let i = u8::deserialize(d)?;
        Variant::from_index(i).map_err(serde::de::Error::custom)
    }
}

/// Per-length class statistics; independent of the graph size.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSummaries {
    pub k: usize,
    pub lmax: usize,
    pub variant: Variant,
    /// Whether the counts exclude backtracking paths.
    pub non_backtracking: bool,
    /// `M(ℓ)` for `ℓ = 1..=lmax`.
    pub raw: Vec<DMatrix<f64>>,
    /// `P̂(ℓ)` for `ℓ = 1..=lmax`.
    pub normalized: Vec<DMatrix<f64>>,
    /// Classes whose raw row sum was zero, per length.
    pub zero_rows: Vec<Vec<usize>>,
}

impl GraphSummaries {
    /// Builds summaries from given normalized statistics, with empty raw
    /// counts and no masked rows. Useful for fitting externally supplied
    /// statistics.
    pub fn from_statistics(normalized: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = normalized.first().map_or(0, |m| m.nrows());
        if k < 2 || normalized.iter().any(|m| m.nrows() != k || m.ncols() != k) {
            return Err(Error::Dimension("statistics must be non-empty k×k matrices with k >= 2".into()));
        }
        let lmax = normalized.len();
        Ok(Self {
            k,
            lmax,
            variant: Variant::Row,
            non_backtracking: true,
            raw: vec![DMatrix::zeros(k, k); lmax],
            normalized,
            zero_rows: vec![Vec::new(); lmax],
        })
    }

    /// Copy keeping only the first `lmax` lengths.
    pub fn truncated(&self, lmax: usize) -> Self {
        let lmax = lmax.min(self.lmax);
        Self {
            lmax,
            raw: self.raw[..lmax].to_vec(),
            normalized: self.normalized[..lmax].to_vec(),
            zero_rows: self.zero_rows[..lmax].to_vec(),
            ..self.clone()
        }
    }

    /// Row weights per length: 0 for masked rows, 1 otherwise.
    pub fn row_mask(&self, ell_index: usize) -> Vec<f64> {
        let mut mask = vec![1.0; self.k];
        for &r in &self.zero_rows[ell_index] {
            mask[r] = 0.0;
        }
        mask
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SummariesJson::from(self)).expect("summaries serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SummariesJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct SummariesJson {
    k: usize,
    lmax: usize,
    variant: Variant,
    #[serde(default = "default_true")]
    non_backtracking: bool,
    raw: Vec<Vec<Vec<f64>>>,
    normalized: Vec<Vec<Vec<f64>>>,
    zero_rows: Vec<Vec<usize>>,
}

fn default_true() -> bool {
    true
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(k: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension(format!("expected {k}×{k} matrix in summaries")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

impl From<&GraphSummaries> for SummariesJson {
    fn from(s: &GraphSummaries) -> Self {
        Self {
            k: s.k,
            lmax: s.lmax,
            variant: s.variant,
            non_backtracking: s.non_backtracking,
            raw: s.raw.iter().map(to_rows).collect(),
            normalized: s.normalized.iter().map(to_rows).collect(),
            zero_rows: s.zero_rows.clone(),
        }
    }
}

impl TryFrom<SummariesJson> for GraphSummaries {
    type Error = Error;

    fn try_from(j: SummariesJson) -> Result<Self> {
        if j.raw.len() != j.lmax || j.normalized.len() != j.lmax || j.zero_rows.len() != j.lmax {
            return Err(Error::Dimension("summary lists must have lmax entries".into()));
        }
        if j.zero_rows.iter().flatten().any(|&r| r >= j.k) {
            return Err(Error::Dimension("zero_rows entry out of range".into()));
        }
        Ok(Self {
            k: j.k,
            lmax: j.lmax,
            variant: j.variant,
            non_backtracking: j.non_backtracking,
            raw: j.raw.iter().map(|m| from_rows(j.k, m)).collect::<Result<_>>()?,
            normalized: j
                .normalized
                .iter()
                .map(|m| from_rows(j.k, m))
                .collect::<Result<_>>()?,
            zero_rows: j.zero_rows,
        })
    }
}

/// Normalizes a nonnegative count matrix. Returns the statistics and the
/// rows whose sum was zero; in the row and symmetric variants those rows
/// become uniform `1/k`.
pub fn normalize_statistics(m: &DMatrix<f64>, variant: Variant) -> (DMatrix<f64>, Vec<usize>) {
    let k = m.nrows();
    let sums: Vec<f64> = (0..k).map(|i| m.row(i).sum()).collect();
    let zero: Vec<usize> = (0..k).filter(|&i| sums[i] <= 0.0).collect();
    let uniform = 1.0 / k as f64;
    let out = match variant {
        Variant::Row => DMatrix::from_fn(k, k, |i, j| {
            if sums[i] > 0.0 {
                m[(i, j)] / sums[i]
            } else {
                uniform
            }
        }),
        Variant::Symmetric => DMatrix::from_fn(k, k, |i, j| {
            if sums[i] <= 0.0 {
                uniform
            } else if sums[j] <= 0.0 {
                0.0
            } else {
                m[(i, j)] / (sums[i] * sums[j]).sqrt()
            }
        }),
        Variant::Scaled => {
            let total: f64 = sums.iter().sum();
            if total > 0.0 {
                m * (k as f64 / total)
            } else {
                DMatrix::from_element(k, k, uniform)
            }
        }
    };
    (out, zero)
}

/// `[1, λ, λ², ..., λ^(lmax-1)]`.
pub fn weight_vector(lambda: f64, lmax: usize) -> Vec<f64> {
    std::iter::successors(Some(1.0), |w| Some(w * lambda))
        .take(lmax)
        .collect()
}

/// Dense `W_NB(ℓ)` by the matrix recurrence. Small graphs only; the
/// production path is [`factorized_summaries`].
pub fn nb_walk_counts_dense(g: &SparseGraph, ell: usize) -> Result<DMatrix<f64>> {
    let n = g.n();
    if n > DENSE_CAP {
        return Err(Error::DenseCapExceeded { n, cap: DENSE_CAP });
    }
    if ell == 0 {
        return Err(Error::Invalid("path length must be >= 1".into()));
    }
    let dense = g.to_dense();
    let w = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(g.degrees()));
    let d_minus_i = &d - DMatrix::identity(n, n);
    let mut prev = w.clone();
    if ell == 1 {
        return Ok(prev);
    }
    let mut cur = &w * &w - &d;
    for _ in 3..=ell {
        let next = &w * &cur - &d_minus_i * &prev;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

fn check_inputs(g: &SparseGraph, seeds: &LabelSet, lmax: usize) -> Result<()> {
    if lmax == 0 {
        return Err(Error::Invalid("lmax must be >= 1".into()));
    }
    if seeds.n_labeled() == 0 {
        return Err(Error::NoLabels);
    }
    if seeds.k() < 2 {
        return Err(Error::Dimension("need k >= 2 classes".into()));
    }
    if seeds.min_nodes() > g.n() {
        return Err(Error::Dimension("seed label outside the graph".into()));
    }
    Ok(())
}

/// `Eᵀ N` accumulated over labeled rows only.
fn project_labeled(seeds: &LabelSet, nmat: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for (node, c) in seeds.iter() {
        let row = &nmat[node * k..(node + 1) * k];
        for (e, v) in row.iter().enumerate() {
            m[(c, e)] += v;
        }
    }
    m
}

fn finish(
    k: usize,
    lmax: usize,
    variant: Variant,
    non_backtracking: bool,
    raw: Vec<DMatrix<f64>>,
) -> GraphSummaries {
    let (normalized, zero_rows) = raw.iter().map(|m| normalize_statistics(m, variant)).unzip();
    GraphSummaries {
        k,
        lmax,
        variant,
        non_backtracking,
        raw,
        normalized,
        zero_rows,
    }
}

/// Non-backtracking summaries for `ℓ = 1..=lmax` in `O(m k lmax)`.
pub fn factorized_summaries(
    g: &SparseGraph,
    seeds: &LabelSet,
    lmax: usize,
    variant: Variant,
) -> Result<GraphSummaries> {
    check_inputs(g, seeds, lmax)?;
    let (n, k) = (g.n(), seeds.k());
    let e = seeds.one_hot(n)?;
    let deg = g.degrees();
    let mut raw = Vec::with_capacity(lmax);

    let mut prev = vec![0.0; n * k];
    g.mul_dense(&e, k, &mut prev);
    raw.push(project_labeled(seeds, &prev, k));
    if lmax == 1 {
        return Ok(finish(k, lmax, variant, true, raw));
    }

    let mut cur = vec![0.0; n * k];
    g.mul_dense(&prev, k, &mut cur);
    for (node, c) in seeds.iter() {
        cur[node * k + c] -= deg[node];
    }
    raw.push(project_labeled(seeds, &cur, k));

    let mut next = vec![0.0; n * k];
    for _ in 3..=lmax {
        g.mul_dense(&cur, k, &mut next);
        for (i, (dst, old)) in next.chunks_mut(k).zip(prev.chunks(k)).enumerate() {
            let backtrack = deg[i] - 1.0;
            for (d, o) in dst.iter_mut().zip(old) {
                *d -= backtrack * o;
            }
        }
        raw.push(project_labeled(seeds, &next, k));
        // roll: prev <- cur, cur <- next
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(finish(k, lmax, variant, true, raw))
}

/// Summaries over all paths, `M(ℓ) = Eᵀ Wˡ E`, evaluated as
/// `Eᵀ (W (W (... E)))`.
pub fn backtracking_summaries(
    g: &SparseGraph,
    seeds: &LabelSet,
    lmax: usize,
    variant: Variant,
) -> Result<GraphSummaries> {
    check_inputs(g, seeds, lmax)?;
    let (n, k) = (g.n(), seeds.k());
    let mut cur = seeds.one_hot(n)?;
    let mut next = vec![0.0; n * k];
    let mut raw = Vec::with_capacity(lmax);
    for _ in 0..lmax {
        g.mul_dense(&cur, k, &mut next);
        std::mem::swap(&mut cur, &mut next);
        raw.push(project_labeled(seeds, &cur, k));
    }
    Ok(finish(k, lmax, variant, false, raw))
}
