//! Rank sweep over the bundled YOLOv5s-like fixture with synthetic weights.
//!
//! Run with `cargo run --release --example rank_sweep`.

use ttconv::net::{fixture_manifest, rank_sweep, render_sweep_table, WeightSet};
use ttconv::Result;

fn main() -> Result<()> {
    let manifest = fixture_manifest();
    let weights = WeightSet::synthetic(&manifest, 0);
    let points = rank_sweep(&manifest, &weights, &[16, 8, 4, 2])?;
    let reports: Vec<_> = points.into_iter().map(|p| p.report).collect();
    print!("{}", render_sweep_table(&reports));
    println!();
    print!("{}", reports[1].render_table());
    Ok(())
}
