//! Solve the LQR problem for the demo plant and show the ideal learner weights.

use safeq::matlib::eig_sym;
use safeq::qlearn::extract_gain;
use safeq::riccati::{is_hurwitz, solve_care, SystemModel};

fn main() -> safeq::Result<()> {
    let sys = SystemModel::demo();
    let sol = solve_care(&sys)?;
    println!("P =\n{}", sol.p);
    println!("eig(P) = {:?}", eig_sym(&sol.p)?);
    println!("W_a = {:?}", sol.wa.as_slice());
    println!("W_c = {:?}", sol.wc);
    println!(
        "ARE residual {:.2e} after {} Kleinman steps",
        sol.residual, sol.iterations
    );

    let closed = sys.a().add(&sys.b().matmul(&sol.wa.transpose())?)?;
    println!("A + B W_a^T Hurwitz: {}", is_hurwitz(&closed));

    // the gain is recoverable from the critic alone
    let (q21, q22) = extract_gain(&sol.wc, sys.n(), sys.m_inputs(), sys.r())?;
    let from_critic = q22.inverse()?.matmul(&q21)?.scale(-1.0);
    println!("-Q22^-1 Q21 = {:?}", from_critic.as_slice());
    Ok(())
}
