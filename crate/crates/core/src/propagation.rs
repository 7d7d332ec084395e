//! Uncentered linearized belief propagation and a random-walk baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::compat::{center, symmetric_spectral_radius, CompatibilityMatrix};
use crate::error::{Error, Result};
use crate::graph::{BeliefMatrix, LabelSet, SparseGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// Convergence parameter: `ρ(ε·Ĥ)·ρ(W)`.
    pub s: f64,
    pub iterations: usize,
    pub epsilon_override: Option<f64>,
    /// Stop early once the max-abs iterate change drops below this.
    pub converge_tol: Option<f64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            s: 0.5,
            iterations: 10,
            epsilon_override: None,
            converge_tol: None,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.s > 0.0 && self.s.is_finite()) {
            errs.push(format!("propagation.s must be > 0, got {}", self.s));
        }
        if self.iterations == 0 {
            errs.push("propagation.iterations must be >= 1".into());
        }
        if let Some(e) = self.epsilon_override {
            if !(e.is_finite() && e > 0.0) {
                errs.push(format!("propagation.epsilon_override must be > 0, got {e}"));
            }
        }
        errs
    }
}

/// Scale applied to `H` during propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon {
    pub value: f64,
    /// `H` was uniform, so its centered radius is zero and the scale is
    /// only normalized by `ρ(W)`.
    pub uniform_h: bool,
}

/// `ε = s / (ρ(W) · ρ(H - 1/k))`.
pub fn compute_epsilon(g: &SparseGraph, h: &CompatibilityMatrix, s: f64) -> Epsilon {
    epsilon_from_radii(g.rho(), symmetric_spectral_radius(&center(h)), s)
}

/// [`compute_epsilon`] from precomputed spectral radii.
pub fn epsilon_from_radii(rho_w: f64, rho_centered: f64, s: f64) -> Epsilon {
    let rho_w = if rho_w > 0.0 { rho_w } else { 1.0 };
    if rho_centered <= 1e-12 {
        Epsilon {
            value: s / rho_w,
            uniform_h: true,
        }
    } else {
        Epsilon {
            value: s / (rho_w * rho_centered),
            uniform_h: false,
        }
    }
}

/// Propagation output with diagnostics.
#[derive(Debug, Clone)]
pub struct PropagationReport {
    pub beliefs: BeliefMatrix,
    pub epsilon: Epsilon,
    pub iterations_run: usize,
    /// Unlabeled nodes without neighbors; their rows stay zero.
    pub isolated_unlabeled: Vec<usize>,
}

/// Runs `B ← E + W B (εH)` from `B = E` and returns the final beliefs.
pub fn linbp_propagate(
    g: &SparseGraph,
    seeds: &LabelSet,
    h: &CompatibilityMatrix,
    cfg: &PropagationConfig,
) -> Result<BeliefMatrix> {
    linbp_report(g, seeds, h, cfg).map(|r| r.beliefs)
}

pub fn linbp_report(
    g: &SparseGraph,
    seeds: &LabelSet,
    h: &CompatibilityMatrix,
    cfg: &PropagationConfig,
) -> Result<PropagationReport> {
    if seeds.k() != h.k() {
        return Err(Error::Dimension(format!(
            "seeds have k = {} but H has k = {}",
            seeds.k(),
            h.k()
        )));
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let epsilon = match cfg.epsilon_override {
        Some(value) => Epsilon {
            value,
            uniform_h: symmetric_spectral_radius(&center(h)) <= 1e-12,
        },
        None => compute_epsilon(g, h, cfg.s),
    };
    if epsilon.uniform_h {
        log::warn!("uniform compatibility matrix carries no signal; unlabeled nodes tie");
    }
    let prior = BeliefMatrix::from_vec(g.n(), h.k(), seeds.one_hot(g.n())?)?;
    let (beliefs, iterations_run) = linbp_iterate(
        g,
        &prior,
        h.matrix(),
        epsilon.value,
        cfg.iterations,
        cfg.converge_tol,
    )?;
    let isolated_unlabeled = (0..g.n())
        .filter(|&i| g.degrees()[i] == 0.0 && !seeds.contains(i))
        .collect();
    Ok(PropagationReport {
        beliefs,
        epsilon,
        iterations_run,
        isolated_unlabeled,
    })
}

/// The LinBP iteration for an arbitrary prior and potential.
///
/// Neither `prior` nor `h` needs to be stochastic, which is what the
/// centered and shifted variants of the update require.
pub fn linbp_iterate(
    g: &SparseGraph,
    prior: &BeliefMatrix,
    h: &DMatrix<f64>,
    epsilon: f64,
    iterations: usize,
    converge_tol: Option<f64>,
) -> Result<(BeliefMatrix, usize)> {
    let n = g.n();
    let k = h.nrows();
    if prior.n() != n || prior.k() != k || h.ncols() != k {
        return Err(Error::Dimension(format!(
            "prior is {}×{}, graph has {n} nodes, H is {}×{}",
            prior.n(),
            prior.k(),
            h.nrows(),
            h.ncols()
        )));
    }
    let hs = h * epsilon;
    let e = prior.as_slice();
    let mut b = e.to_vec();
    let mut t = vec![0.0; n * k];
    let mut next = vec![0.0; n * k];
    let mut run = 0;
    for it in 0..iterations {
        right_multiply(&b, &hs, &mut t);
        g.mul_dense(&t, k, &mut next);
        let mut delta = 0.0f64;
        for ((nx, ei), bi) in next.iter_mut().zip(e).zip(&b) {
            *nx += ei;
            delta = delta.max((*nx - bi).abs());
        }
        std::mem::swap(&mut b, &mut next);
        run = it + 1;
        if !delta.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: run });
        }
        if converge_tol.is_some_and(|tol| delta < tol) {
            break;
        }
    }
    Ok((BeliefMatrix::from_vec(n, k, b)?, run))
}

/// `out = x · h` for row-major `n × k` `x`.
pub(crate) fn right_multiply(x: &[f64], h: &DMatrix<f64>, out: &mut [f64]) {
    let k = h.nrows();
    for (src, dst) in x.chunks(k).zip(out.chunks_mut(k)) {
        for (c, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, s) in src.iter().enumerate() {
                acc += s * h[(r, c)];
            }
            *d = acc;
        }
    }
}

/// Class with the largest belief per node; ties go to the lowest index.
pub fn label_argmax(b: &BeliefMatrix) -> Vec<usize> {
    (0..b.n())
        .map(|i| {
            let row = b.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// `‖B - E - W B (εH)‖²`.
pub fn linbp_energy(
    b: &BeliefMatrix,
    seeds: &LabelSet,
    g: &SparseGraph,
    h: &CompatibilityMatrix,
    epsilon: f64,
) -> Result<f64> {
    let (n, k) = (g.n(), h.k());
    if b.n() != n || b.k() != k || seeds.k() != k {
        return Err(Error::Dimension("belief, seed and H shapes disagree".into()));
    }
    let e = seeds.one_hot(n)?;
    let mut t = vec![0.0; n * k];
    right_multiply(b.as_slice(), &(h.matrix() * epsilon), &mut t);
    let mut wbh = vec![0.0; n * k];
    g.mul_dense(&t, k, &mut wbh);
    Ok(b
        .as_slice()
        .iter()
        .zip(&e)
        .zip(&wbh)
        .map(|((bv, ev), wv)| {
            let r = bv - ev - wv;
            r * r
        })
        .sum())
}

/// Personalized random walks with restart, one per class.
///
/// Iterates `B ← (1-α) U + α W D⁻¹ B` from `B = U`, where column `c` of
/// `U` is uniform over the class-`c` seeds. Classes without seeds keep a
/// zero column.
pub fn rwr_propagate(
    g: &SparseGraph,
    seeds: &LabelSet,
    alpha: f64,
    iterations: usize,
) -> Result<BeliefMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("rwr alpha must be in (0,1), got {alpha}")));
    }
    let (n, k) = (g.n(), seeds.k());
    let counts = seeds.class_counts();
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            log::warn!("class {c} has no seeds; its random walk is empty");
        }
    }
    let mut u = vec![0.0; n * k];
    for (node, c) in seeds.iter() {
        if node >= n {
            return Err(Error::Dimension(format!("seed {node} outside graph")));
        }
        u[node * k + c] = 1.0 / counts[c] as f64;
    }
    let inv_deg: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut b = u.clone();
    let mut scaled = vec![0.0; n * k];
    let mut next = vec![0.0; n * k];
    for _ in 0..iterations {
        for (i, (src, dst)) in b.chunks(k).zip(scaled.chunks_mut(k)).enumerate() {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s * inv_deg[i];
            }
        }
        g.mul_dense(&scaled, k, &mut next);
        for (nx, ui) in next.iter_mut().zip(&u) {
            *nx = (1.0 - alpha) * ui + alpha * *nx;
        }
        std::mem::swap(&mut b, &mut next);
    }
    BeliefMatrix::from_vec(n, k, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_edge_list;

    fn graph(s: &str) -> SparseGraph {
        parse_edge_list(s.as_bytes(), None).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        let k3 = graph("0 1\n1 2\n0 2");
        let h8 = CompatibilityMatrix::skew(3, 8.0).unwrap();
        let eps = compute_epsilon(&k3, &h8, 0.95);
        assert!(!eps.uniform_h);
        assert!((eps.value - 0.95 / 1.4).abs() < 1e-6);
        assert!((epsilon_from_radii(2.0, 0.5, 0.5).value - 0.5).abs() < 1e-15);
        let u = compute_epsilon(&k3, &CompatibilityMatrix::uniform(3), 0.5);
        assert!(u.uniform_h);
        assert!((u.value - 0.25).abs() < 1e-6);
    }

    #[test]
    fn uncentered_scale_exceeds_one_on_nonconvergence_instance() {
        // ρ(H) = 1 while ρ(Ĥ) = 0.7, so the uncentered run sees s / 0.7.
        let k3 = graph("0 1\n1 2\n0 2");
        let h8 = CompatibilityMatrix::skew(3, 8.0).unwrap();
        let eps = compute_epsilon(&k3, &h8, 0.95).value;
        let s_uncentered = eps * symmetric_spectral_radius(h8.matrix()) * k3.rho();
        assert!((s_uncentered - 0.95 / 0.7).abs() < 1e-6);
        assert!(s_uncentered > 1.0);
    }

    #[test]
    fn two_node_one_step() {
        let g = graph("0 1");
        let seeds = LabelSet::from_pairs(2, [(0, 0)]).unwrap();
        let cfg = PropagationConfig {
            iterations: 1,
            epsilon_override: Some(1.0),
            ..Default::default()
        };
        let b = linbp_propagate(&g, &seeds, &CompatibilityMatrix::uniform(2), &cfg).unwrap();
        assert_eq!(b.as_slice(), &[1.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn zero_seeds_stay_zero() {
        let g = graph("0 1\n1 2\n2 3\n3 0");
        let seeds = LabelSet::new(3);
        let h = CompatibilityMatrix::skew(3, 8.0).unwrap();
        for iterations in [1, 5, 20] {
            let cfg = PropagationConfig {
                iterations,
                epsilon_override: Some(3.0),
                ..Default::default()
            };
            let b = linbp_propagate(&g, &seeds, &h, &cfg).unwrap();
            assert!(b.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn argmax_ties_low() {
        let b = BeliefMatrix::from_vec(3, 3, vec![0.2, 0.5, 0.3, 0., 0., 0., 1., 1., 0.]).unwrap();
        assert_eq!(label_argmax(&b), vec![1, 0, 0]);
    }

    #[test]
    fn dimension_mismatch() {
        let g = graph("0 1");
        let seeds = LabelSet::from_pairs(3, [(0, 0)]).unwrap();
        let r = linbp_propagate(&g, &seeds, &CompatibilityMatrix::uniform(2), &Default::default());
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn divergence_reported() {
        let g = graph("0 1\n1 2\n0 2");
        let seeds = LabelSet::from_pairs(2, [(0, 0)]).unwrap();
        let cfg = PropagationConfig {
            iterations: 5000,
            epsilon_override: Some(1e3),
            ..Default::default()
        };
        let h = CompatibilityMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert!(matches!(
            linbp_propagate(&g, &seeds, &h, &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn energy_zero_for_prior_without_seeds() {
        let g = graph("0 1\n1 2");
        let seeds = LabelSet::new(2);
        let b = BeliefMatrix::zeros(3, 2);
        let h = CompatibilityMatrix::uniform(2);
        assert_eq!(linbp_energy(&b, &seeds, &g, &h, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn isolated_nodes_reported() {
        let g = SparseGraph::from_edges(Some(4), vec![(0, 1, 1.0)]).unwrap();
        let seeds = LabelSet::from_pairs(2, [(0, 1), (3, 1)]).unwrap();
        let h = CompatibilityMatrix::from_rows(&[vec![0.2, 0.8], vec![0.8, 0.2]]).unwrap();
        let r = linbp_report(&g, &seeds, &h, &Default::default()).unwrap();
        assert_eq!(r.isolated_unlabeled, vec![2]);
        assert_eq!(r.beliefs.row(2), &[0.0, 0.0]);
        assert_eq!(label_argmax(&r.beliefs)[1], 0);
    }

    #[test]
    fn rwr_teleport_limit() {
        let g = graph("0 1\n1 2\n2 3");
        let seeds = LabelSet::from_pairs(1, [(1, 0)]).unwrap();
        let b = rwr_propagate(&g, &seeds, 1e-9, 10).unwrap();
        for i in 0..4 {
            let u = if i == 1 { 1.0 } else { 0.0 };
            assert!((b.get(i, 0) - u).abs() < 1e-8);
        }
        assert!(rwr_propagate(&g, &seeds, 1.0, 10).is_err());
    }

    #[test]
    fn rwr_splits_disconnected_cliques() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.push((base + a, base + b, 1.0));
                }
            }
        }
        let g = SparseGraph::from_edges(None, edges).unwrap();
        let seeds = LabelSet::from_pairs(2, [(0, 0), (5, 1)]).unwrap();
        let b = rwr_propagate(&g, &seeds, 0.85, 50).unwrap();
        assert_eq!(label_argmax(&b), vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }
}
