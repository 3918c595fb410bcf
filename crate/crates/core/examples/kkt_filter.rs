//! Model-based safe control: where the KKT multiplier switches on and how far
//! it moves the unconstrained optimum.

use safeq::barrier::BarrierSpec;
use safeq::riccati::{solve_care, SystemModel};
use safeq::safecontrol::{nu_star, u_hat_safe, u_star_safe, unconstrained_optimum};

fn main() -> safeq::Result<()> {
    let sys = SystemModel::demo();
    let spec = BarrierSpec::default();
    let sol = solve_care(&sys)?;
    let states = [
        [0.2, 0.1],
        [1.0, 1.0],
        [1.3, -0.3],
        [-1.2, 0.6],
        [0.0, 1.45],
    ];
    println!(
        "{:>14} {:>10} {:>12} {:>12} {:>12} {:>14}",
        "x", "nu*", "u_free", "u*_safe", "u_hat_safe", "residual(u*)"
    );
    for x in states {
        let kkt = nu_star(&sys, &spec, &sol.p, &x)?;
        let free = unconstrained_optimum(&sys, &sol.p, &x)?;
        let safe = u_star_safe(&sys, &spec, &sol.p, &x)?;
        let learned = u_hat_safe(&sol.wa, 0.2, &sys, &spec, &x)?;
        println!(
            "{:>14} {:>10.4e} {:>12.4} {:>12.4} {:>12.4} {:>14.3e}",
            format!("{x:?}"),
            kkt.nu_star,
            free[0],
            safe[0],
            learned[0],
            spec.constraint_residual(&sys, &x, &safe)?
        );
    }
    Ok(())
}
