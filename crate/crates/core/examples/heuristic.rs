//! A two-level guess built from a High/Low pattern, compared with an
//! estimate from data.

use compatest::estimate::{heuristic_pattern_from, Level};
use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    use Level::{High as H, Low as L};
    let pattern = vec![vec![L, H, H], vec![H, L, H], vec![H, H, L]];
    for gap in [0.1, 0.3, 0.45] {
        println!("gap {gap}: {:?}", heuristic_compatibility(&pattern, gap)?.rows());
    }

    let gs = CompatibilityMatrix::skew(3, 8.0)?;
    let (g, labels) = generate_graph(&GeneratorSpec::new(10_000, 100_000, gs.clone(), 21))?;
    let seeds = sample_seeds(&labels, 0.01, 22)?;
    let guess = heuristic_compatibility(&heuristic_pattern_from(&gs), 0.3)?;
    let s = factorized_summaries(&g, &seeds, 5, Variant::Row)?;
    let est = dcer_estimate(&s, &EstimatorConfig::default(), 23)?.h_hat;

    let prop = PropagationConfig::default();
    for (name, h) in [("heuristic", &guess), ("DCEr", &est), ("GS", &gs)] {
        let acc = macro_accuracy(&label_argmax(&linbp_propagate(&g, &seeds, h, &prop)?), &labels, &seeds)?;
        println!("{name:<10} L2 {:.3}  accuracy {acc:.3}", h.l2_distance(&gs));
    }
    Ok(())
}
