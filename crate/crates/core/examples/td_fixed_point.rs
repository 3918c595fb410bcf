//! With the ideal weights and the optimal controller the integral TD error is
//! zero up to discretization, which checks the whole learning pipeline.

use safeq::harness::{run_episode, ControllerKind, ExperimentConfig, NoiseSpec, WeightInit};

fn main() -> safeq::Result<()> {
    let cfg = ExperimentConfig {
        noise: NoiseSpec::silent(),
        controller: ControllerKind::OracleUnconstrained,
        init: WeightInit::Ideal,
        ..Default::default()
    };
    let ep = run_episode(&cfg)?;
    println!("max |e_c| with learning on: {:.3e}", ep.metrics.max_abs_td);
    println!("actor drift from W_a: {:.3e}", ep.metrics.actor_error);

    let frozen = run_episode(&ExperimentConfig {
        learning: false,
        ..cfg
    })?;
    println!(
        "max |e_c| with learning off: {:.3e}",
        frozen.metrics.max_abs_td
    );
    Ok(())
}
