//! Barrier-protected learner against plain Q-learning under identical noise.

use safeq::harness::{compare_baseline, ExperimentConfig};

fn main() -> safeq::Result<()> {
    let (proposed, baseline) = compare_baseline(&ExperimentConfig::default())?;
    for (label, ep) in [("proposed", &proposed), ("baseline", &baseline)] {
        let m = &ep.metrics;
        print!(
            "{label:>9}: min margin {:>8.4}, violated {}",
            m.min_margin, m.safety_violated
        );
        match ep.breach {
            Some(b) => println!(", left the set at t = {:.3} s", b.t),
            None => println!(", |x(t_end)| {:.3e}", m.final_norm),
        }
    }
    Ok(())
}
