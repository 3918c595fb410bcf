//! Excitation level of the critic regressor against exploration amplitude.

use safeq::harness::{run_episode, ExperimentConfig};

fn main() -> safeq::Result<()> {
    println!(
        "{:>9} {:>12} {:>12} {:>10}",
        "amplitude", "PE level", "actor err", "|x(end)|"
    );
    for amplitude in [0.1, 0.3, 1.0, 2.0] {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.amplitude = amplitude;
        let m = run_episode(&cfg)?.metrics;
        println!(
            "{amplitude:>9} {:>12.3e} {:>12.3} {:>10.3e}",
            m.pe_level, m.actor_error, m.final_norm
        );
    }
    Ok(())
}
