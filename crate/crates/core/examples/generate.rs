//! Plant a compatibility matrix into a random graph and check that the
//! fully labeled graph reproduces it.
//!
//! ```text
//! cargo run --release --example generate -- [n] [m] [out-prefix]
//! ```

use compatest::generator::generate;
use compatest::graph::{write_edge_list, write_labels};
use compatest::prelude::*;
use std::fs::File;
use std::io::BufWriter;

fn main() -> compatest::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(10_000, |s| s.parse().expect("n"));
    let m: usize = args.next().map_or(100_000, |s| s.parse().expect("m"));
    let prefix = args.next();

    let h = CompatibilityMatrix::skew(3, 8.0)?;
    let mut spec = GeneratorSpec::new(n, m, h.clone(), 42);
    spec.dist = DegreeDist::powerlaw();
    let out = generate(&spec)?;
    println!("{}", out.manifest.to_json());

    let stats = factorized_summaries(&out.graph, &out.labels, 1, Variant::Row)?;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((stats.normalized[0][(i, j)] - h.get(i, j)).abs());
        }
    }
    println!("max |P - H| on the full labeling: {worst:.2e}");

    if let Some(p) = prefix {
        write_edge_list(&out.graph, BufWriter::new(File::create(format!("{p}.edges.tsv"))?))?;
        write_labels(&out.labels, BufWriter::new(File::create(format!("{p}.labels.tsv"))?))?;
        println!("wrote {p}.edges.tsv and {p}.labels.tsv");
    }
    Ok(())
}
