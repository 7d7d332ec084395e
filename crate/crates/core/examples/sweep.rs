//! Run an experiment config and print per-method means.
//!
//! ```text
//! cargo run --release --example sweep -- crates/core/configs/quick.json [out.csv]
//! ```

use std::collections::BTreeMap;

use compatest::prelude::*;

fn main() -> compatest::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quick.json").into());
    let cfg = ExperimentConfig::load(&path)?;
    let out = run_experiment(&cfg)?;
    if let Some(csv) = args.next() {
        out.write_csv(std::fs::File::create(&csv)?)?;
        println!("wrote {csv}");
    }

    let mut cells: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in out.accuracy() {
        cells.entry((r.method.to_string(), r.f.to_bits())).or_default().push(r.macro_accuracy);
    }
    for ((method, f), accs) in cells {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("{method:<10} f = {:<8} accuracy {mean:.3}", f64::from_bits(f));
    }
    Ok(())
}
