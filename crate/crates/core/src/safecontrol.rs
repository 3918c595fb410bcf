//! Safe control laws.
//!
//! [`u_hat_safe`] is the implementable controller: learned actor weights plus
//! an always-on barrier term with constant gain `k_sb`. It touches neither `A`
//! nor `P`. [`u_star_safe`] is the model-based constrained optimum with the
//! exact KKT multiplier, used only as an oracle.

use crate::barrier::BarrierSpec;
use crate::error::Result;
use crate::matlib::{self, Matrix};
use crate::riccati::SystemModel;

/// `R_b` at or below this value means the barrier gradient is invisible to the
/// input and the multiplier is set to zero.
pub const DEGENERATE_RB: f64 = 1e-12;

/// `Ŵ_aᵀx − k_sb·R⁻¹Bᵀ∇B_s(x)`.
pub fn u_hat_safe(
    wa: &Matrix,
    k_sb: f64,
    sys: &SystemModel,
    spec: &BarrierSpec,
    x: &[f64],
) -> Result<Vec<f64>> {
    let grad = spec.grad_b_s(x)?;
    let nominal = wa.tr_mul_vec(x)?;
    let push = safety_direction(sys, &grad)?;
    Ok(nominal
        .iter()
        .zip(&push)
        .map(|(u, p)| u - k_sb * p)
        .collect())
}

/// `R⁻¹Bᵀ∇B_s`.
fn safety_direction(sys: &SystemModel, grad: &[f64]) -> Result<Vec<f64>> {
    sys.r_inv().mul_vec(&sys.b().tr_mul_vec(grad)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktDiagnostics {
    pub nu_star: f64,
    pub c_b: f64,
    pub r_b: f64,
    pub active: bool,
}

/// Optimal multiplier `ν* = max(C_b/R_b, 0)` of the barrier-constrained
/// Q-minimization at `x`, with
/// `C_b = ∇B_sᵀAx − ∇B_sᵀBR⁻¹BᵀPx − γ(1/B_s)` and `R_b = ∇B_sᵀBR⁻¹Bᵀ∇B_s`.
pub fn nu_star(
    sys: &SystemModel,
    spec: &BarrierSpec,
    p: &Matrix,
    x: &[f64],
) -> Result<KktDiagnostics> {
    let grad = spec.grad_b_s(x)?;
    let dir = safety_direction(sys, &grad)?;
    let bt_grad = sys.b().tr_mul_vec(&grad)?;
    let r_b = matlib::dot(&bt_grad, &dir);
    if r_b <= DEGENERATE_RB {
        return Ok(KktDiagnostics {
            nu_star: 0.0,
            c_b: 0.0,
            r_b,
            active: false,
        });
    }
    let bs = spec.b_s(x)?;
    let px = p.mul_vec(x)?;
    let ax = sys.a().mul_vec(x)?;
    let bt_px = sys.b().tr_mul_vec(&px)?;
    let coupling = matlib::dot(&dir, &bt_px);
    // constraint residual of the unconstrained optimum
    let c_b = -coupling + matlib::dot(&grad, &ax) - spec.gamma(1.0 / bs)?;
    let nu = (c_b / r_b).max(0.0);
    Ok(KktDiagnostics {
        nu_star: nu,
        c_b,
        r_b,
        active: nu > 0.0,
    })
}

/// `−R⁻¹BᵀPx − ν*(x)·R⁻¹Bᵀ∇B_s(x)`.
pub fn u_star_safe(
    sys: &SystemModel,
    spec: &BarrierSpec,
    p: &Matrix,
    x: &[f64],
) -> Result<Vec<f64>> {
    let kkt = nu_star(sys, spec, p, x)?;
    let unconstrained = unconstrained_optimum(sys, p, x)?;
    if !kkt.active {
        return Ok(unconstrained);
    }
    let dir = safety_direction(sys, &spec.grad_b_s(x)?)?;
    Ok(unconstrained
        .iter()
        .zip(&dir)
        .map(|(u, d)| u - kkt.nu_star * d)
        .collect())
}

/// `−R⁻¹BᵀPx`.
pub fn unconstrained_optimum(sys: &SystemModel, p: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    let bt_px = sys.b().tr_mul_vec(&p.mul_vec(x)?)?;
    Ok(sys.r_inv().mul_vec(&bt_px)?.iter().map(|v| -v).collect())
}
