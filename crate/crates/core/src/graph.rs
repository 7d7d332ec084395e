//! Sparse undirected graphs, label sets and dense belief matrices.
//!
//! The adjacency is stored once in compressed sparse row form with both
//! directions of every edge present. All products against it are
//! "sparse times thin dense" (`n × n` by `n × k`), the only kernel the
//! rest of the crate needs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row count above which sparse products are split across threads.
const PAR_ROWS: usize = 8192;

/// Immutable undirected weighted graph in CSR form.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    m: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    rho: OnceLock<f64>,
}

impl PartialEq for SparseGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.offsets == other.offsets
            && self.targets == other.targets
            && self.weights == other.weights
    }
}

impl SparseGraph {
    /// Builds a graph from undirected edges. Duplicate pairs (in either
    /// orientation) are merged by summing their weights.
    ///
    /// `n` fixes the node count; when `None` it is `max id + 1`.
    pub fn from_edges<I>(n: Option<usize>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut directed: Vec<(u32, u32, f64)> = Vec::new();
        let mut max_id = None::<usize>;
        for (line, (u, v, w)) in edges.into_iter().enumerate() {
            if u == v {
                return Err(Error::SelfLoop { line: line + 1, node: u });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::BadWeight { line: line + 1, weight: w });
            }
            let hi = u.max(v);
            if let Some(n) = n {
                if hi >= n {
                    return Err(Error::IdOverflow { id: hi, n });
                }
            }
            if hi >= u32::MAX as usize {
                return Err(Error::IdOverflow { id: hi, n: u32::MAX as usize });
            }
            max_id = Some(max_id.map_or(hi, |m| m.max(hi)));
            directed.push((u as u32, v as u32, w));
            directed.push((v as u32, u as u32, w));
        }
        let n = n.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
        directed.par_sort_unstable_by_key(|&(u, v, _)| (u, v));

        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::with_capacity(directed.len());
        let mut weights: Vec<f64> = Vec::with_capacity(directed.len());
        let mut last: Option<(u32, u32)> = None;
        for &(u, v, w) in &directed {
            if last == Some((u, v)) {
                *weights.last_mut().expect("merged edge has a predecessor") += w;
                continue;
            }
            last = Some((u, v));
            offsets[u as usize + 1] += 1;
            targets.push(v);
            weights.push(w);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self::from_csr(n, offsets, targets, weights))
    }

    fn from_csr(n: usize, offsets: Vec<usize>, targets: Vec<u32>, weights: Vec<f64>) -> Self {
        let degrees = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        let m = targets.len() / 2;
        Self {
            n,
            m,
            offsets,
            targets,
            weights,
            degrees,
            rho: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Weighted degrees, the diagonal of `D`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `(neighbor, weight)` pairs of node `i`, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// Undirected edges with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Dense copy of `W`, row-major. Test and oracle use only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, w) in self.neighbors(i) {
                row[j] = w;
            }
        }
        out
    }

    /// `out = W · x` for row-major `n × k` operands.
    pub fn mul_dense(&self, x: &[f64], k: usize, out: &mut [f64]) {
        assert_eq!(x.len(), self.n * k);
        assert_eq!(out.len(), self.n * k);
        let row = |i: usize, dst: &mut [f64]| {
            dst.fill(0.0);
            for p in self.offsets[i]..self.offsets[i + 1] {
                let j = self.targets[p] as usize;
                let w = self.weights[p];
                let src = &x[j * k..(j + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        };
        if self.n >= PAR_ROWS && k > 0 {
            out.par_chunks_mut(k)
                .enumerate()
                .for_each(|(i, dst)| row(i, dst));
        } else if k > 0 {
            out.chunks_mut(k).enumerate().for_each(|(i, dst)| row(i, dst));
        }
    }

    /// Spectral radius with default tolerance, computed once per graph.
    ///
    /// Falls back to the best power-iteration estimate when the iteration
    /// cap is reached; the value only feeds the propagation scale.
    pub fn rho(&self) -> f64 {
        *self.rho.get_or_init(|| {
            match spectral_radius(self, DEFAULT_RHO_TOL, DEFAULT_RHO_ITERS) {
                Ok(r) => r,
                Err(Error::NoConvergence { estimate, .. }) => {
                    log::warn!("spectral radius did not converge, using estimate {estimate}");
                    estimate
                }
                Err(e) => unreachable!("spectral_radius only fails on convergence: {e}"),
            }
        })
    }

    /// Sum of weights incident to `i` recomputed from the adjacency.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.n {
            let mut sum = 0.0;
            let mut prev = None;
            for (j, w) in self.neighbors(i) {
                if j == i {
                    return Err(Error::Invalid(format!("self-loop at {i}")));
                }
                if prev.is_some_and(|p| p >= j) {
                    return Err(Error::Invalid(format!("unsorted or duplicate row {i}")));
                }
                prev = Some(j);
                let back = self.neighbors(j).find(|&(t, _)| t == i);
                if back.map(|(_, bw)| bw) != Some(w) {
                    return Err(Error::Invalid(format!("asymmetric edge ({i},{j})")));
                }
                sum += w;
            }
            if (sum - self.degrees[i]).abs() > 1e-9 * sum.max(1.0) {
                return Err(Error::Invalid(format!("degree mismatch at {i}")));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_RHO_TOL: f64 = 1e-6;
pub const DEFAULT_RHO_ITERS: usize = 1000;

/// Spectral radius of `W` by power iteration from the all-ones direction.
///
/// The estimate is `‖W x‖` for unit `x`, which converges to the largest
/// absolute eigenvalue even on bipartite graphs where `+ρ` and `−ρ` are both
/// eigenvalues. Iteration stops once successive estimates agree to
/// `tol / 100` relative.
pub fn spectral_radius(g: &SparseGraph, tol: f64, max_iter: usize) -> Result<f64> {
    let n = g.n();
    if n == 0 || g.m() == 0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut est = 0.0;
    for _ in 0..max_iter {
        g.mul_dense(&x, 1, &mut y);
        est = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if est == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= 1e-2 * tol * est {
            return Ok(est);
        }
        prev = est;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / est;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: est,
    })
}

fn parse_lines<R: BufRead>(
    reader: R,
    path: &Path,
    mut each: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        each(idx + 1, &fields).map_err(|e| match e {
            Error::Invalid(msg) => Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg,
            },
            other => other,
        })?;
    }
    Ok(())
}

fn parse_id(field: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::Invalid(format!("invalid node id {field:?}")))
}

/// Parses `u v [w]` lines into a graph. See [`load_edge_list`].
pub fn parse_edge_list<R: BufRead>(reader: R, n: Option<usize>) -> Result<SparseGraph> {
    parse_edge_list_at(reader, n, Path::new("<input>"))
}

fn parse_edge_list_at<R: BufRead>(reader: R, n: Option<usize>, path: &Path) -> Result<SparseGraph> {
    let mut edges = Vec::new();
    parse_lines(reader, path, |line, fields| {
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Invalid(format!(
                "expected 2 or 3 fields, found {}",
                fields.len()
            )));
        }
        let u = parse_id(fields[0])?;
        let v = parse_id(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("invalid weight {s:?}")))?,
            None => 1.0,
        };
        if u == v {
            return Err(Error::SelfLoop { line, node: u });
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::BadWeight { line, weight: w });
        }
        if let Some(n) = n {
            if u.max(v) >= n {
                return Err(Error::IdOverflow { id: u.max(v), n });
            }
        }
        edges.push((u, v, w));
        Ok(())
    })?;
    SparseGraph::from_edges(n, edges)
}

/// Loads a whitespace-separated edge list `u<TAB>v[<TAB>w]` with 0-based ids.
///
/// `#` comment lines and blank lines are skipped. Repeated pairs merge by
/// summing weights.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<SparseGraph> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    parse_edge_list_at(reader, None, path)
}

/// Writes the graph as an edge list readable by [`load_edge_list`]. Unit
/// weights are omitted.
pub fn write_edge_list<W: Write>(g: &SparseGraph, mut out: W) -> Result<()> {
    for (u, v, w) in g.edges() {
        if w == 1.0 {
            writeln!(out, "{u}\t{v}")?;
        } else {
            writeln!(out, "{u}\t{v}\t{w}")?;
        }
    }
    Ok(())
}

/// Partial assignment of nodes to classes `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    k: usize,
    assignments: BTreeMap<usize, usize>,
}

impl LabelSet {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            assignments: BTreeMap::new(),
        }
    }

    /// Builds a label set, rejecting out-of-range classes and conflicting
    /// duplicates.
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(k: usize, pairs: I) -> Result<Self> {
        let mut set = Self::new(k);
        for (node, class) in pairs {
            set.insert(node, class)?;
        }
        Ok(set)
    }

    /// Fully labeled set from a dense class vector.
    pub fn from_classes(k: usize, classes: &[usize]) -> Result<Self> {
        Self::from_pairs(k, classes.iter().copied().enumerate())
    }

    pub fn insert(&mut self, node: usize, class: usize) -> Result<()> {
        if class >= self.k {
            return Err(Error::ClassOutOfRange { class, k: self.k });
        }
        match self.assignments.insert(node, class) {
            Some(prev) if prev != class => Err(Error::ConflictingLabel {
                node,
                first: prev,
                second: class,
            }),
            _ => Ok(()),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_labeled(&self) -> usize {
        self.assignments.len()
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.assignments.contains_key(&node)
    }

    /// `(node, class)` pairs in increasing node order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&n, &c)| (n, c))
    }

    /// Largest labeled node id plus one, or 0.
    pub fn min_nodes(&self) -> usize {
        self.assignments.keys().next_back().map_or(0, |&n| n + 1)
    }

    /// Labeled node count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (_, c) in self.iter() {
            counts[c] += 1;
        }
        counts
    }

    /// Dense `n × k` one-hot matrix `E`, row-major.
    pub fn one_hot(&self, n: usize) -> Result<Vec<f64>> {
        if self.min_nodes() > n {
            return Err(Error::Dimension(format!(
                "label for node {} but graph has {n} nodes",
                self.min_nodes() - 1
            )));
        }
        let mut e = vec![0.0; n * self.k];
        for (node, c) in self.iter() {
            e[node * self.k + c] = 1.0;
        }
        Ok(e)
    }
}

/// Parses `node class` lines. See [`load_labels`].
pub fn parse_labels<R: BufRead>(reader: R, k: usize) -> Result<LabelSet> {
    parse_labels_at(reader, k, Path::new("<input>"))
}

fn parse_labels_at<R: BufRead>(reader: R, k: usize, path: &Path) -> Result<LabelSet> {
    let mut set = LabelSet::new(k);
    parse_lines(reader, path, |_, fields| {
        if fields.len() != 2 {
            return Err(Error::Invalid(format!(
                "expected 2 fields, found {}",
                fields.len()
            )));
        }
        let node = parse_id(fields[0])?;
        let class = fields[1]
            .parse::<usize>()
            .map_err(|_| Error::Invalid(format!("invalid class {:?}", fields[1])))?;
        set.insert(node, class)
    })?;
    Ok(set)
}

/// Loads `node<TAB>class` lines; nodes not mentioned stay unlabeled.
pub fn load_labels(path: impl AsRef<Path>, k: usize) -> Result<LabelSet> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    parse_labels_at(reader, k, path)
}

pub fn write_labels<W: Write>(labels: &LabelSet, mut out: W) -> Result<()> {
    for (node, class) in labels.iter() {
        writeln!(out, "{node}\t{class}")?;
    }
    Ok(())
}

/// Dense `n × k` real-valued class scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMatrix {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl BeliefMatrix {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            values: vec![0.0; n * k],
        }
    }

    pub fn from_vec(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * k {
            return Err(Error::Dimension(format!(
                "{} values for a {n}×{k} belief matrix",
                values.len()
            )));
        }
        Ok(Self { n, k, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.k + c]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// CSV `node,score_0,...,score_{k-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.k).map(|c| format!("score_{c}")).collect();
        writeln!(out, "node,{}", header.join(","))?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{i},{}", row.join(","))?;
        }
        Ok(())
    }
}
