//! Random walks with restart against LinBP on homophilous and
//! heterophilous graphs.

use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    let prop = PropagationConfig::default();
    for (name, h) in [
        ("homophily", CompatibilityMatrix::from_rows(&[vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]])?),
        ("heterophily", CompatibilityMatrix::from_rows(&[vec![0.1, 0.45, 0.45], vec![0.45, 0.1, 0.45], vec![0.45, 0.45, 0.1]])?),
        ("skew 8", CompatibilityMatrix::skew(3, 8.0)?),
    ] {
        let (g, labels) = generate_graph(&GeneratorSpec::new(10_000, 100_000, h.clone(), 41))?;
        let seeds = sample_seeds(&labels, 0.01, 42)?;
        let rwr = macro_accuracy(&label_argmax(&rwr_propagate(&g, &seeds, 0.85, 30)?), &labels, &seeds)?;
        let lin = macro_accuracy(&label_argmax(&linbp_propagate(&g, &seeds, &h, &prop)?), &labels, &seeds)?;
        println!("{name:<12} RWR {rwr:.3}  LinBP(H) {lin:.3}");
    }
    Ok(())
}
