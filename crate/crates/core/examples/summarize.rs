//! Path statistics from a few seed labels, with and without backtracking,
//! next to the powers of the planted matrix they should approach.

use compatest::prelude::*;

fn show(name: &str, m: &nalgebra::DMatrix<f64>) {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "))
        .collect();
    println!("{name:>10}: [{}]", rows.join(" | "));
}

fn main() -> compatest::Result<()> {
    let h = CompatibilityMatrix::skew(3, 3.0)?;
    let (g, labels) = generate_graph(&GeneratorSpec::new(10_000, 100_000, h.clone(), 5))?;
    let seeds = sample_seeds(&labels, 0.1, 6)?;

    let t = std::time::Instant::now();
    let nb = factorized_summaries(&g, &seeds, 4, Variant::Row)?;
    println!("non-backtracking summaries in {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
    let bt = backtracking_summaries(&g, &seeds, 4, Variant::Row)?;

    for ell in 1..=4 {
        println!("ℓ = {ell}");
        show("H^ℓ", &matrix_power(&h, ell));
        show("NB", &nb.normalized[ell - 1]);
        show("all paths", &bt.normalized[ell - 1]);
    }
    println!("{}", nb.to_json());
    Ok(())
}
