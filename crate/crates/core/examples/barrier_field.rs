//! Reciprocal barrier values and gradients along a ray toward the boundary.

use safeq::barrier::BarrierSpec;
use safeq::riccati::SystemModel;

fn main() -> safeq::Result<()> {
    let spec = BarrierSpec::default();
    let sys = SystemModel::demo();
    let dir = [std::f64::consts::FRAC_1_SQRT_2; 2];
    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "|x|", "h", "B_s", "|grad B_s|"
    );
    for r in [0.0, 0.3, 0.6, 0.9, 1.2, 1.4, 1.49, 1.499] {
        let x = [dir[0] * r, dir[1] * r];
        let g = spec.grad_b_s(&x)?;
        println!(
            "{r:>8} {:>14.6} {:>14.6e} {:>14.6e}",
            spec.h(&x),
            spec.b_s(&x)?,
            g[0].hypot(g[1])
        );
    }
    // open-loop drift at the initial state pushes outward hard
    let x0 = [1.0, 1.0];
    println!(
        "residual at x0 with u = 0: {}",
        spec.constraint_residual(&sys, &x0, &[0.0])?
    );
    println!("x = [1.5, 0] inside? {}", spec.is_interior(&[1.5, 0.0]));
    Ok(())
}
