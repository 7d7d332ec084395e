//! The holdout baseline pays one propagation per objective evaluation.

use compatest::estimate::holdout_estimate;
use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    let gs = CompatibilityMatrix::skew(3, 8.0)?;
    let (g, labels) = generate_graph(&GeneratorSpec::new(10_000, 100_000, gs.clone(), 31))?;
    let seeds = sample_seeds(&labels, 0.01, 32)?;
    let prop = PropagationConfig::default();

    for splits in [1, 4] {
        let cfg = EstimatorConfig {
            holdout_splits: splits,
            ..Default::default()
        };
        let r = holdout_estimate(&g, &seeds, &cfg, &prop, 33)?;
        let acc = macro_accuracy(&label_argmax(&linbp_propagate(&g, &seeds, &r.h_hat, &prop)?), &labels, &seeds)?;
        println!(
            "{splits} split(s): {} evaluations in {:.2} s, L2 {:.3}, accuracy {acc:.3}",
            r.trace_len,
            r.wall_time,
            r.h_hat.l2_distance(&gs)
        );
    }
    let s = factorized_summaries(&g, &seeds, 5, Variant::Row)?;
    let d = dcer_estimate(&s, &EstimatorConfig::default(), 34)?;
    println!("DCEr for comparison: {:.3} s, L2 {:.3}", d.wall_time, d.h_hat.l2_distance(&gs));
    Ok(())
}
