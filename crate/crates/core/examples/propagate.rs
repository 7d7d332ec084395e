//! Label a graph from seeds with a known compatibility matrix.
//!
//! The iteration is uncentered, so it only converges when `s` is below the
//! spectral radius of the centered matrix. Above that the beliefs grow
//! along the all-ones direction, which does not change any argmax, and a
//! fixed number of iterations is used instead.

use compatest::compat::symmetric_spectral_radius;
use compatest::propagation::linbp_report;
use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    let h = CompatibilityMatrix::from_rows(&[
        vec![0.2, 0.6, 0.2],
        vec![0.6, 0.1, 0.3],
        vec![0.2, 0.3, 0.5],
    ])?;
    let (g, labels) = generate_graph(&GeneratorSpec::new(5000, 50_000, h.clone(), 3))?;
    let seeds = sample_seeds(&labels, 0.02, 4)?;
    let limit = symmetric_spectral_radius(&center(&h));
    println!("ρ(W) = {:.3}, ρ(H - 1/k) = {limit:.3}", g.rho());

    let converged = PropagationConfig {
        s: 0.5 * limit,
        iterations: 500,
        converge_tol: Some(1e-10),
        ..Default::default()
    };
    let r = linbp_report(&g, &seeds, &h, &converged)?;
    let residual = linbp_energy(&r.beliefs, &seeds, &g, &h, r.epsilon.value)?;
    let acc = macro_accuracy(&label_argmax(&r.beliefs), &labels, &seeds)?;
    println!(
        "s = {:.3}: fixed point after {} iterations, residual {residual:.1e}, accuracy {acc:.3}",
        converged.s, r.iterations_run
    );

    for s in [0.1, 0.5, 0.9] {
        let cfg = PropagationConfig { s, ..Default::default() };
        let b = linbp_propagate(&g, &seeds, &h, &cfg)?;
        let acc = macro_accuracy(&label_argmax(&b), &labels, &seeds)?;
        println!("s = {s}: {} iterations, accuracy {acc:.3}", cfg.iterations);
    }
    Ok(())
}
