//! Experiments from key-value text, and back.

use safeq::config::{parse_config_str, render_config};

fn main() -> safeq::Result<()> {
    let text = "\
# stronger barrier, different noise realization
k_sb = 0.3
seed = 11
noise_amplitude = 0.5
x0 = 0.9, -0.8
";
    let cfg = parse_config_str(text)?;
    println!("k_sb {} seed {} x0 {:?}", cfg.gains.k_sb, cfg.seed, cfg.x0);
    print!("{}", render_config(&cfg));

    for bad in ["k_sb = -1", "A = 2x2: 0, 1, 1.6", "x0 = 2, 2", "speed = 3"] {
        println!("{bad:<22} -> {}", parse_config_str(bad).unwrap_err());
    }
    Ok(())
}
