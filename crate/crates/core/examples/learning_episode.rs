//! One learning episode in the default scenario, written to CSV.
//!
//! `cargo run --release --example learning_episode -- [seed] [out.csv]`

use safeq::harness::{run_episode, ExperimentConfig};
use safeq::report::emit_csv;

fn main() -> safeq::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = args.next().unwrap_or_else(|| "episode.csv".into());

    let ep = run_episode(&ExperimentConfig {
        seed,
        ..Default::default()
    })?;
    let m = &ep.metrics;
    println!("seed {seed}");
    println!("  min margin     {:.4}", m.min_margin);
    println!("  |x(t_end)|     {:.3e}", m.final_norm);
    println!("  actor error    {:.3}", m.actor_error);
    println!("  total cost     {:.3}", m.total_cost);
    println!("  peak |u|       {:.1}", m.peak_control);
    println!("  PE level       {:.3e}", m.pe_level);
    if let Some(last) = ep.log.last() {
        println!("  W_a(t_end)     {:?}", last.wa);
    }
    emit_csv(&ep.log, &out)?;
    println!("wrote {} rows to {out}", ep.log.records.len());
    Ok(())
}
