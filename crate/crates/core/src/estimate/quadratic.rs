//! Estimators with a convex quadratic objective in the free parameters.
//!
//! Both MCE and LCE have the form `E(H) = ⟨H, A H⟩ - 2⟨C, H⟩ + c₀` for
//! small `k × k` matrices `A` (symmetric PSD) and `C`. Since `H` is affine
//! in the free parameters, the minimizer solves a `k* × k*` linear system.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{EstimationResult, Method};
use crate::compat::{chain_to_free, n_free, reconstruct_h, structure_matrix, CompatibilityMatrix, FreeParams};
use crate::error::{Error, Result};
use crate::graph::{LabelSet, SparseGraph};
use crate::summary::GraphSummaries;

struct Quadratic {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    c0: f64,
}

impl Quadratic {
    fn energy(&self, h: &DMatrix<f64>) -> f64 {
        let ah = &self.a * h;
        (h.component_mul(&ah).sum() - 2.0 * self.c.component_mul(h).sum() + self.c0).max(0.0)
    }

    /// Minimizer starting from the uniform point; directions the objective
    /// does not determine stay at their uniform values.
    fn solve(&self, k: usize) -> (CompatibilityMatrix, bool) {
        let dim = n_free(k);
        let base = FreeParams::uniform(k);
        let h0 = reconstruct_h(&base);
        let grad_h = (&self.a * h0.matrix()) * 2.0 - &self.c * 2.0;
        let g = DVector::from_vec(chain_to_free(k, &grad_h));
        let s: Vec<DMatrix<f64>> = (0..dim).map(|p| structure_matrix(k, p)).collect();
        let q = DMatrix::from_fn(dim, dim, |p, r| 2.0 * s[p].component_mul(&(&self.a * &s[r])).sum());
        if q.iter().all(|v| v.abs() < 1e-300) {
            return (h0, true);
        }
        let svd = q.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max();
        let step = svd
            .solve(&(-g), tol)
            .expect("svd computed with both factors");
        let mut p = base;
        for (v, d) in p.as_mut_slice().iter_mut().zip(step.iter()) {
            *v += d;
        }
        (reconstruct_h(&p), false)
    }
}

fn finish(q: Quadratic, k: usize, method: Method, start: Instant, degenerate_msg: &str) -> EstimationResult {
    let (h_hat, degenerate) = q.solve(k);
    let mut warnings = Vec::new();
    if degenerate {
        log::warn!("{degenerate_msg}");
        warnings.push(degenerate_msg.to_string());
    }
    EstimationResult {
        energy: q.energy(h_hat.matrix()),
        h_hat,
        restarts_used: 1,
        wall_time: start.elapsed().as_secs_f64(),
        method,
        trace_len: 1,
        warnings,
    }
}

/// Closest symmetric doubly stochastic matrix to `p` in Frobenius norm.
pub fn mce_estimate(p: &DMatrix<f64>) -> Result<EstimationResult> {
    let k = p.nrows();
    if k < 2 || p.ncols() != k {
        return Err(Error::Dimension("MCE needs a square k×k statistics matrix, k >= 2".into()));
    }
    let start = Instant::now();
    let q = Quadratic {
        a: DMatrix::identity(k, k),
        c: p.clone(),
        c0: p.norm_squared(),
    };
    Ok(finish(q, k, Method::Mce, start, "degenerate MCE statistics"))
}

/// MCE on the length-1 statistics of `s`, ignoring masked rows.
pub fn mce_from_summaries(s: &GraphSummaries) -> Result<EstimationResult> {
    let k = s.k;
    if s.lmax == 0 {
        return Err(Error::Invalid("summaries are empty".into()));
    }
    let start = Instant::now();
    let mask = DMatrix::from_diagonal(&DVector::from_vec(s.row_mask(0)));
    let p = &s.normalized[0];
    let masked = &mask * p;
    let q = Quadratic {
        c0: masked.norm_squared(),
        c: masked,
        a: mask,
    };
    Ok(finish(
        q,
        k,
        Method::Mce,
        start,
        "all length-1 statistic rows are empty; returning the uniform matrix",
    ))
}

/// Minimizes `‖E - W E H‖²` using the Gram statistics `(WE)ᵀ(WE)` and
/// `(WE)ᵀ E` from a single `O(mk)` pass.
pub fn lce_estimate(g: &SparseGraph, seeds: &LabelSet) -> Result<EstimationResult> {
    let (n, k) = (g.n(), seeds.k());
    if seeds.n_labeled() == 0 {
        return Err(Error::NoLabels);
    }
    let start = Instant::now();
    let e = seeds.one_hot(n)?;
    let mut we = vec![0.0; n * k];
    g.mul_dense(&e, k, &mut we);
    let mut gram = DMatrix::zeros(k, k);
    for row in we.chunks(k) {
        for a in 0..k {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..k {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let mut cross = DMatrix::zeros(k, k);
    for (node, c) in seeds.iter() {
        for a in 0..k {
            cross[(a, c)] += we[node * k + a];
        }
    }
    let q = Quadratic {
        a: gram,
        c: cross,
        c0: seeds.n_labeled() as f64,
    };
    Ok(finish(
        q,
        k,
        Method::Lce,
        start,
        "no labeled node has a labeled neighbor; returning the uniform matrix",
    ))
}

/// Clips entries to `[0, 1]` and re-projects onto symmetric unit-row-sum
/// matrices, alternating a few times.
pub fn clip_and_project(h: &CompatibilityMatrix) -> CompatibilityMatrix {
    let mut cur = h.clone();
    for _ in 0..50 {
        if cur.matrix().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)) {
            break;
        }
        let clipped = cur.matrix().map(|v| v.clamp(0.0, 1.0));
        cur = mce_estimate(&clipped).expect("square input").h_hat;
    }
    cur
}
