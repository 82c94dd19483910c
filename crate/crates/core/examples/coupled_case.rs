//! Runs a built-in case on a coarsened grid and reports its diagnostics.
//!
//! `cargo run --release --example coupled_case -- fingering_2d`

use porous_fv::io::{run_case, template};

fn main() -> porous_fv::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "henry_diffusive".into());
    let mut cfg = template(&name)?;
    for n in &mut cfg.mesh.cells {
        *n = (*n / 4).max(1);
    }
    cfg.time.end *= 0.2;
    cfg.time.write_interval = None;
    let dir = std::env::temp_dir().join(format!("porous-fv-{name}"));
    let summary = run_case(&cfg, &dir)?;
    let worst = summary
        .reports
        .iter()
        .map(|r| r.balance_error())
        .fold(0.0, f64::max);
    println!(
        "{name}: {} steps, worst mass-balance error {worst:.2e}",
        summary.reports.len()
    );
    for (k, v) in &summary.diagnostics {
        println!("{k} = {v:.5}");
    }
    println!("output in {}", dir.display());
    Ok(())
}
