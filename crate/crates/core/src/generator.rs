//! Planted-partition graph generator with exact class sizes, edge count
//! and class-pair edge counts.
//!
//! A symmetric doubly stochastic `H` can only be reproduced as the
//! row-normalized class co-occurrence matrix if every class carries the
//! same endpoint mass `2m/k`. The plan therefore targets `(2m/k)·H_ce`
//! edges between distinct classes and `(m/k)·H_cc` inside a class, and the
//! wiring matches degree stubs block by block.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityMatrix;
use crate::error::{Error, Result};
use crate::graph::{LabelSet, SparseGraph};

const MAX_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DegreeDist {
    /// Every node in a class gets (almost) the same degree.
    Uniform,
    /// Degrees proportional to `u^(-coefficient)` with `u ~ U(0, 1)`.
    Powerlaw { coefficient: f64 },
}

impl DegreeDist {
    pub fn powerlaw() -> Self {
        DegreeDist::Powerlaw { coefficient: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub alpha: Vec<f64>,
    pub h: CompatibilityMatrix,
    pub dist: DegreeDist,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Balanced classes with uniform degrees.
    pub fn new(n: usize, m: usize, h: CompatibilityMatrix, seed: u64) -> Self {
        let k = h.k();
        Self {
            n,
            m,
            alpha: vec![1.0 / k as f64; k],
            h,
            dist: DegreeDist::Uniform,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.h.k()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let mut errs = Vec::new();
        if self.alpha.len() != k {
            errs.push(format!("alpha has {} entries but H is {k}×{k}", self.alpha.len()));
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            errs.push("alpha entries must be >= 0".into());
        }
        let total: f64 = self.alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            errs.push(format!("alpha must sum to 1, sums to {total}"));
        }
        if self.n < k {
            errs.push(format!("need at least k = {k} nodes, got {}", self.n));
        }
        if (2 * self.m) < self.n {
            errs.push(format!("average degree 2m/n must be >= 1, got {}", 2.0 * self.m as f64 / self.n as f64));
        }
        if self.n > u32::MAX as usize {
            errs.push("n exceeds the 32-bit node id range".into());
        }
        if let DegreeDist::Powerlaw { coefficient } = self.dist {
            if !(coefficient > 0.0 && coefficient < 1.0) {
                errs.push(format!("power-law coefficient must be in (0, 1), got {coefficient}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Class sizes: largest-remainder rounding of `n·α`.
    pub fn class_sizes(&self) -> Vec<usize> {
        let raw: Vec<f64> = self.alpha.iter().map(|a| a * self.n as f64).collect();
        largest_remainder(&raw, self.n)
    }
}

/// Rounds `raw` to integers summing to `total`, giving the leftover units to
/// the largest fractional parts (earlier index first on ties).
pub fn largest_remainder(raw: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = raw.iter().map(|v| v.max(0.0).floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    if assigned <= total {
        for &i in order.iter().cycle().take(total - assigned) {
            out[i] += 1;
        }
    } else {
        // only reachable through floating error in callers; trim smallest fractions
        let mut excess = assigned - total;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if out[i] > 0 {
                out[i] -= 1;
                excess -= 1;
            }
        }
    }
    out
}

/// Target edge counts per class pair as a symmetric `k × k` table; the
/// diagonal holds within-class counts. The upper triangle sums to `m`.
pub fn plan_block_counts(spec: &GeneratorSpec) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    let k = spec.k();
    let mass = spec.m as f64 / k as f64;
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for c in 0..k {
        for e in c..k {
            pairs.push((c, e));
            let factor = if c == e { mass } else { 2.0 * mass };
            raw.push(factor * spec.h.get(c, e));
        }
    }
    if raw.iter().any(|&v| v < 0.0) {
        return Err(Error::Infeasible("H has negative entries".into()));
    }
    let counts = largest_remainder(&raw, spec.m);
    let mut table = vec![vec![0; k]; k];
    for (&(c, e), &t) in pairs.iter().zip(&counts) {
        table[c][e] = t;
        table[e][c] = t;
    }
    let sizes = spec.class_sizes();
    for c in 0..k {
        for e in c..k {
            let cap = if c == e {
                sizes[c] * sizes[c].saturating_sub(1) / 2
            } else {
                sizes[c] * sizes[e]
            };
            if table[c][e] > cap {
                return Err(Error::Infeasible(format!(
                    "block ({c}, {e}) needs {} edges but a simple graph allows at most {cap}",
                    table[c][e]
                )));
            }
        }
        let degree_sum = class_degree_sum(&table, c);
        if degree_sum < sizes[c] {
            return Err(Error::Infeasible(format!(
                "class {c} has {} nodes but only {degree_sum} edge endpoints; every node needs degree >= 1",
                sizes[c]
            )));
        }
    }
    Ok(table)
}

fn class_degree_sum(table: &[Vec<usize>], c: usize) -> usize {
    table[c].iter().enumerate().map(|(e, &t)| if e == c { 2 * t } else { t }).sum()
}

/// Generated graph with its full labels and what was achieved.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: SparseGraph,
    pub labels: LabelSet,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub dist: DegreeDist,
    pub seed: u64,
    pub class_sizes: Vec<usize>,
    pub planned_blocks: Vec<Vec<usize>>,
    pub achieved_blocks: Vec<Vec<usize>>,
    pub attempts: u64,
    pub swaps: usize,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// [`generate`] without the manifest.
pub fn generate_graph(spec: &GeneratorSpec) -> Result<(SparseGraph, LabelSet)> {
    generate(spec).map(|g| (g.graph, g.labels))
}

/// Builds a simple graph with exactly `m` edges, the planned block counts
/// and class sizes. A failed repair retries on the next rng stream.
pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    let table = plan_block_counts(spec)?;
    let sizes = spec.class_sizes();
    let k = spec.k();
    let mut starts = vec![0; k + 1];
    for c in 0..k {
        starts[c + 1] = starts[c] + sizes[c];
    }
    let mut last_err = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(attempt);
        match wire(spec, &table, &sizes, &starts, &mut rng) {
            Ok((edges, swaps)) => {
                let graph = SparseGraph::from_edges(Some(spec.n), edges.into_iter().map(|(u, v)| (u as usize, v as usize, 1.0)))?;
                debug_assert_eq!(graph.m(), spec.m);
                let classes: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, sizes[c])).collect();
                let labels = LabelSet::from_classes(k, &classes)?;
                let achieved = measure_blocks(&graph, &classes, k);
                let manifest = Manifest {
                    n: spec.n,
                    m: spec.m,
                    k,
                    alpha: spec.alpha.clone(),
                    h: spec.h.rows(),
                    dist: spec.dist,
                    seed: spec.seed,
                    class_sizes: sizes,
                    planned_blocks: table,
                    achieved_blocks: achieved,
                    attempts: attempt + 1,
                    swaps,
                };
                return Ok(Generated { graph, labels, manifest });
            }
            Err(msg) => {
                log::debug!("generation attempt {attempt} failed: {msg}");
                last_err = msg;
            }
        }
    }
    Err(Error::Infeasible(format!("wiring failed after {MAX_ATTEMPTS} attempts: {last_err}")))
}

fn measure_blocks(g: &SparseGraph, classes: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0; k]; k];
    for (u, v, _) in g.edges() {
        let (a, b) = (classes[u], classes[v]);
        t[a][b] += 1;
        if a != b {
            t[b][a] += 1;
        }
    }
    t
}

/// Per-node degrees of one class, summing to `total`, each at least 1.
fn sample_degrees(count: usize, total: usize, dist: DegreeDist, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let weights: Vec<f64> = match dist {
        DegreeDist::Uniform => vec![1.0; count],
        DegreeDist::Powerlaw { coefficient } => (0..count)
            .map(|_| {
                // 1 - U[0,1) lies in (0, 1]
                let u: f64 = 1.0 - rng.random::<f64>();
                u.powf(-coefficient)
            })
            .collect(),
    };
    let wsum: f64 = weights.iter().sum();
    let target: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let spare = total - count;
    let excess: Vec<f64> = target.iter().map(|t| (t - 1.0).max(0.0)).collect();
    let esum: f64 = excess.iter().sum();
    let raw: Vec<f64> = if esum > 0.0 {
        excess.iter().map(|e| spare as f64 * e / esum).collect()
    } else {
        vec![spare as f64 / count as f64; count]
    };
    largest_remainder(&raw, spare).into_iter().map(|d| d + 1).collect()
}

fn key(u: u32, v: u32) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    (a as u64) << 32 | b as u64
}

type Wiring = std::result::Result<(Vec<(u32, u32)>, usize), String>;

#[allow(clippy::needless_range_loop)]
fn wire(spec: &GeneratorSpec, table: &[Vec<usize>], sizes: &[usize], starts: &[usize], rng: &mut ChaCha8Rng) -> Wiring {
    let k = spec.k();
    // stubs per class, split into consecutive runs for each partner class
    let mut runs: Vec<Vec<Vec<u32>>> = Vec::with_capacity(k);
    for c in 0..k {
        let degrees = sample_degrees(sizes[c], class_degree_sum(table, c), spec.dist, rng);
        let mut stubs: Vec<u32> = Vec::new();
        for (i, &d) in degrees.iter().enumerate() {
            stubs.extend(std::iter::repeat_n((starts[c] + i) as u32, d));
        }
        stubs.shuffle(rng);
        let mut per = Vec::with_capacity(k);
        let mut rest = stubs.as_slice();
        for (e, &t) in table[c].iter().enumerate() {
            let len = if e == c { 2 * t } else { t };
            let (head, tail) = rest.split_at(len);
            per.push(head.to_vec());
            rest = tail;
        }
        runs.push(per);
    }
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(spec.m);
    // block ranges into `edges`
    let mut blocks: Vec<(usize, usize, bool)> = Vec::new();
    for c in 0..k {
        for e in c..k {
            let begin = edges.len();
            if c == e {
                edges.extend(runs[c][c].chunks(2).map(|p| (p[0], p[1])));
            } else {
                edges.extend(runs[c][e].iter().copied().zip(runs[e][c].iter().copied()));
            }
            blocks.push((begin, edges.len(), c == e));
        }
    }
    let mut counts: HashMap<u64, u32> = HashMap::with_capacity(edges.len());
    for &(u, v) in &edges {
        *counts.entry(key(u, v)).or_insert(0) += 1;
    }
    let bad = |(u, v): (u32, u32), counts: &HashMap<u64, u32>| u == v || counts[&key(u, v)] > 1;
    let budget = 10 * spec.m;
    let mut swaps = 0;
    for &(begin, end, within) in &blocks {
        let len = end - begin;
        for i in begin..end {
            while bad(edges[i], &counts) {
                if swaps >= budget {
                    return Err(format!("swap budget of {budget} exhausted"));
                }
                swaps += 1;
                if len < 2 {
                    return Err("cannot repair a block with a single edge".into());
                }
                let j = begin + rng.random_range(0..len);
                if j == i {
                    continue;
                }
                let (a, b) = edges[i];
                let (x, y) = edges[j];
                let (p, q) = if within && rng.random::<bool>() {
                    ((a, x), (b, y))
                } else {
                    ((a, y), (x, b))
                };
                if p.0 == p.1 || q.0 == q.1 || key(p.0, p.1) == key(q.0, q.1) {
                    continue;
                }
                if counts.get(&key(p.0, p.1)).is_some_and(|&n| n > 0) || counts.get(&key(q.0, q.1)).is_some_and(|&n| n > 0) {
                    continue;
                }
                for old in [(a, b), (x, y)] {
                    *counts.get_mut(&key(old.0, old.1)).expect("present") -= 1;
                }
                for new in [p, q] {
                    *counts.entry(key(new.0, new.1)).or_insert(0) += 1;
                }
                edges[i] = p;
                edges[j] = q;
            }
        }
    }
    Ok((edges, swaps))
}
