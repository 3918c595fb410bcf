//! Safety-gain sweep with a shared exploration signal, printed next to the
//! published reference rows.

use safeq::harness::{sweep_ksb, ExperimentConfig};
use safeq::report::render_summary;

fn main() -> safeq::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    let rows = sweep_ksb(&cfg, &[0.01, 0.1, 0.2, 0.3, 0.5])?;
    print!("{}", render_summary(&rows)?);
    Ok(())
}
