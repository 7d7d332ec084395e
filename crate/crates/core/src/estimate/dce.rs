//! Distance-smoothed compatibility estimation and its restart wrapper.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::optimize::minimize;
use super::quadratic::clip_and_project;
use super::{EstimationResult, EstimatorConfig, Method};
use crate::compat::{chain_to_free, n_free, reconstruct_h, FreeParams};
use crate::error::{Error, Result};
use crate::summary::{weight_vector, GraphSummaries};

fn check(h: &FreeParams, s: &GraphSummaries, w: &[f64]) {
    assert_eq!(h.k(), s.k, "class count of parameters and summaries differ");
    assert!(w.len() <= s.lmax, "more weights than summarized lengths");
}

/// Powers `H^0 ..= H^lmax`.
fn powers(h: &DMatrix<f64>, lmax: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(DMatrix::identity(h.nrows(), h.ncols()));
    for l in 0..lmax {
        out.push(&out[l] * h);
    }
    out
}

/// Masked residual `H^ℓ - P̂(ℓ)` with zero rows for masked classes.
fn residual(pw: &[DMatrix<f64>], s: &GraphSummaries, ell: usize) -> DMatrix<f64> {
    let mut r = &pw[ell] - &s.normalized[ell - 1];
    for &row in &s.zero_rows[ell - 1] {
        r.row_mut(row).fill(0.0);
    }
    r
}

/// `Σ_ℓ w_ℓ ‖H^ℓ - P̂(ℓ)‖²` over unmasked rows, for `ℓ = 1..=w.len()`.
pub fn dce_energy(h: &FreeParams, summaries: &GraphSummaries, w: &[f64]) -> f64 {
    check(h, summaries, w);
    let pw = powers(reconstruct_h(h).matrix(), w.len());
    w.iter()
        .enumerate()
        .map(|(i, wl)| wl * residual(&pw, summaries, i + 1).norm_squared())
        .sum()
}

fn energy_and_gradient(h: &FreeParams, s: &GraphSummaries, w: &[f64]) -> (f64, Vec<f64>) {
    let k = h.k();
    let pw = powers(reconstruct_h(h).matrix(), w.len());
    let mut energy = 0.0;
    let mut g = DMatrix::zeros(k, k);
    for (i, wl) in w.iter().enumerate() {
        let ell = i + 1;
        let r = residual(&pw, s, ell);
        energy += wl * r.norm_squared();
        for p in 0..ell {
            g += (&pw[p] * &r * &pw[ell - 1 - p]) * (2.0 * wl);
        }
    }
    (energy, chain_to_free(k, &g))
}

/// Gradient of [`dce_energy`] with respect to the free parameters.
pub fn dce_gradient(h: &FreeParams, summaries: &GraphSummaries, w: &[f64]) -> Vec<f64> {
    check(h, summaries, w);
    energy_and_gradient(h, summaries, w).1
}

fn prepare(summaries: &GraphSummaries, cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    if summaries.lmax < cfg.lmax {
        return Err(Error::Invalid(format!(
            "summaries cover lengths up to {} but lmax = {} was requested",
            summaries.lmax, cfg.lmax
        )));
    }
    Ok(weight_vector(cfg.lambda, cfg.lmax))
}

fn descend(s: &GraphSummaries, cfg: &EstimatorConfig, w: &[f64], x0: &FreeParams) -> Result<(FreeParams, f64, usize)> {
    let k = s.k;
    let f = |x: &[f64]| {
        let p = FreeParams::new(k, x.to_vec()).expect("length preserved");
        energy_and_gradient(&p, s, w)
    };
    let m = minimize(f, x0.as_slice(), cfg.descent, cfg.grad_tol, cfg.max_gd_iters)?;
    Ok((FreeParams::new(k, m.x)?, m.value, m.iterations))
}

fn result(s: &GraphSummaries, cfg: &EstimatorConfig, w: &[f64], p: FreeParams, method: Method, start: Instant) -> EstimationResult {
    let mut h_hat = reconstruct_h(&p);
    let mut energy = dce_energy(&p, s, w);
    if cfg.clip {
        h_hat = clip_and_project(&h_hat);
        energy = dce_energy(&crate::compat::extract_free_params(&h_hat).expect("projected"), s, w);
    }
    EstimationResult {
        h_hat,
        energy,
        restarts_used: 1,
        wall_time: start.elapsed().as_secs_f64(),
        method,
        trace_len: 0,
        warnings: Vec::new(),
    }
}

/// Local minimizer of the distance-smoothed energy from `initial`.
pub fn dce_estimate(summaries: &GraphSummaries, cfg: &EstimatorConfig, initial: &FreeParams) -> Result<EstimationResult> {
    if initial.k() != summaries.k {
        return Err(Error::Dimension(format!(
            "initial point has k = {}, summaries have k = {}",
            initial.k(),
            summaries.k
        )));
    }
    let start = Instant::now();
    let w = prepare(summaries, cfg)?;
    let (p, _, iters) = descend(summaries, cfg, &w, initial)?;
    let mut r = result(summaries, cfg, &w, p, Method::Dce, start);
    r.trace_len = iters;
    Ok(r)
}

/// Starting points for the restart search: the uniform point first, then
/// points at `1/k ± δ` in distinct sign quadrants.
pub fn restart_points(k: usize, cfg: &EstimatorConfig, seed: u64) -> Vec<FreeParams> {
    let dim = n_free(k);
    let base = 1.0 / k as f64;
    let delta = cfg.delta_for(k);
    let extra = cfg.restarts.saturating_sub(1);
    let mut quadrants: Vec<Vec<bool>> = Vec::new();
    let exhaustive = dim < usize::BITS as usize && (1usize << dim) <= extra;
    if exhaustive {
        for mask in 0..1usize << dim {
            quadrants.push((0..dim).map(|b| mask >> b & 1 == 1).collect());
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        while quadrants.len() < extra {
            let q: Vec<bool> = (0..dim).map(|_| rng.random()).collect();
            if seen.insert(q.clone()) {
                quadrants.push(q);
            }
        }
    }
    let mut out = vec![FreeParams::uniform(k)];
    out.extend(quadrants.into_iter().map(|q| {
        let h = q.iter().map(|&up| if up { base + delta } else { base - delta }).collect();
        FreeParams::new(k, h).expect("dimension matches")
    }));
    out
}

/// Best of several [`dce_estimate`] runs; ties go to the earlier start.
pub fn dcer_estimate(summaries: &GraphSummaries, cfg: &EstimatorConfig, seed: u64) -> Result<EstimationResult> {
    let start = Instant::now();
    let w = prepare(summaries, cfg)?;
    let starts = restart_points(summaries.k, cfg, seed);
    let runs: Vec<Result<(FreeParams, f64, usize)>> = starts
        .par_iter()
        .map(|x0| descend(summaries, cfg, &w, x0))
        .collect();
    let mut best: Option<(FreeParams, f64)> = None;
    let mut iters = 0;
    let mut failures = 0;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok((p, e, it)) => {
                iters += it;
                if best.as_ref().is_none_or(|(_, be)| e < *be) {
                    best = Some((p, e));
                }
            }
            Err(e) => {
                failures += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((p, _)) = best else {
        return Err(first_err.expect("at least one start"));
    };
    let mut r = result(summaries, cfg, &w, p, Method::Dcer, start);
    r.restarts_used = starts.len();
    r.trace_len = iters;
    if failures > 0 {
        r.warnings.push(format!("{failures} restart(s) failed"));
    }
    Ok(r)
}
