//! Every estimator on the same sparsely labeled graph.

use compatest::estimate::{holdout_estimate, Method};
use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    let f: f64 = std::env::args().nth(1).map_or(0.003, |s| s.parse().expect("f"));
    let gs = CompatibilityMatrix::skew(3, 8.0)?;
    let (g, labels) = generate_graph(&GeneratorSpec::new(10_000, 100_000, gs.clone(), 11))?;
    let seeds = sample_seeds(&labels, f, 12)?;
    println!("{} seeds (f = {f})", seeds.n_labeled());

    let cfg = EstimatorConfig::default();
    let prop = PropagationConfig::default();
    let s = factorized_summaries(&g, &seeds, cfg.lmax, cfg.variant)?;
    let results = [
        mce_from_summaries(&s)?,
        lce_estimate(&g, &seeds)?,
        dce_estimate(&s, &cfg, &FreeParams::uniform(3))?,
        dcer_estimate(&s, &cfg, 13)?,
        holdout_estimate(&g, &seeds, &cfg, &prop, 14)?,
    ];

    println!("{:<8} {:>8} {:>10} {:>10}", "method", "L2", "accuracy", "seconds");
    for r in results.iter() {
        let b = linbp_propagate(&g, &seeds, &r.h_hat, &prop)?;
        let acc = macro_accuracy(&label_argmax(&b), &labels, &seeds)?;
        println!("{:<8} {:>8.4} {:>10.3} {:>10.4}", r.method.name(), r.h_hat.l2_distance(&gs), acc, r.wall_time);
    }
    let b = linbp_propagate(&g, &seeds, &gs, &prop)?;
    println!("{:<8} {:>8} {:>10.3}", Method::Gs.name(), "-", macro_accuracy(&label_argmax(&b), &labels, &seeds)?);
    println!("{}", results[3].to_json(&cfg));
    Ok(())
}
