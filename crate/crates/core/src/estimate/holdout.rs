//! Holdout baseline: search for the matrix that best predicts held-out
//! seed labels via propagation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optimize::{nelder_mead, SimplexOptions};
use super::{EstimationResult, EstimatorConfig, Method};
use crate::compat::{reconstruct_h, CompatibilityMatrix, FreeParams};
use crate::error::{Error, Result};
use crate::experiment::macro_accuracy;
use crate::graph::{LabelSet, SparseGraph};
use crate::propagation::{label_argmax, linbp_propagate, PropagationConfig};

/// One stratified split of `labels` into `(seeds, holdout)`: per class,
/// `⌊n_c / 2⌋` random nodes are held out and the rest kept as seeds.
///
/// Classes with a single labeled node cannot appear on both sides; they
/// stay in the seed half and are reported in the returned warnings.
pub fn stratified_halves(labels: &LabelSet, rng: &mut ChaCha8Rng) -> (LabelSet, LabelSet, Vec<String>) {
    let k = labels.k();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (node, c) in labels.iter() {
        by_class[c].push(node);
    }
    let mut seeds = LabelSet::new(k);
    let mut hold = LabelSet::new(k);
    let mut warnings = Vec::new();
    for (c, nodes) in by_class.iter_mut().enumerate() {
        nodes.shuffle(rng);
        let cut = nodes.len() / 2;
        if nodes.len() == 1 {
            warnings.push(format!("class {c} has one labeled node; it is never held out"));
        }
        for (i, &node) in nodes.iter().enumerate() {
            let target = if i < cut { &mut hold } else { &mut seeds };
            target.insert(node, c).expect("class in range");
        }
    }
    (seeds, hold, warnings)
}

/// Negative summed holdout macro-accuracy of `h` over `splits`.
pub fn holdout_objective(
    g: &SparseGraph,
    splits: &[(LabelSet, LabelSet)],
    h: &CompatibilityMatrix,
    prop: &PropagationConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for (seeds, hold) in splits {
        let b = linbp_propagate(g, seeds, h, prop)?;
        total += macro_accuracy(&label_argmax(&b), hold, &LabelSet::new(seeds.k()))?;
    }
    Ok(-total)
}

/// Derivative-free search over the free parameters from the uniform start.
///
/// The reported energy is `b + objective`, i.e. the summed holdout error,
/// so that it is nonnegative.
pub fn holdout_estimate(
    g: &SparseGraph,
    seeds: &LabelSet,
    cfg: &EstimatorConfig,
    prop: &PropagationConfig,
    seed: u64,
) -> Result<EstimationResult> {
    let k = seeds.k();
    if seeds.n_labeled() < 2 * k {
        return Err(Error::Invalid(format!(
            "holdout needs at least 2k = {} labeled nodes, got {}",
            2 * k,
            seeds.n_labeled()
        )));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut splits = Vec::with_capacity(cfg.holdout_splits);
    for _ in 0..cfg.holdout_splits {
        let (s, h, w) = stratified_halves(seeds, &mut rng);
        warnings.extend(w);
        splits.push((s, h));
    }
    warnings.sort();
    warnings.dedup();
    for w in &warnings {
        log::warn!("{w}");
    }
    let objective = |x: &[f64]| {
        let h = reconstruct_h(&FreeParams::new(k, x.to_vec())?);
        holdout_objective(g, &splits, &h, prop)
    };
    let opts = SimplexOptions {
        step: cfg.delta_for(k),
        max_evals: cfg.holdout_max_evals,
        ..Default::default()
    };
    let (x, fx, evals) = nelder_mead(objective, FreeParams::uniform(k).as_slice(), opts)?;
    Ok(EstimationResult {
        h_hat: reconstruct_h(&FreeParams::new(k, x)?),
        energy: (cfg.holdout_splits as f64 + fx).max(0.0),
        restarts_used: 1,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::Holdout,
        trace_len: evals,
        warnings,
    })
}
