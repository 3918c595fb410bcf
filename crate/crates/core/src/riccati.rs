//! Model-based ground truth: Lyapunov and Riccati solvers.
//!
//! The continuous-time ARE `AᵀP + PA − PBR⁻¹BᵀP + M = 0` is solved by
//! Kleinman–Newton iteration seeded with a stabilizing gain from Bass's
//! method. Each Newton step is one Lyapunov solve through the Kronecker
//! identity, so nothing beyond [`crate::matlib`] is needed.

use crate::error::{Error, Result};
use crate::matlib::{self, kron, min_eig_sym, solve_linear, Matrix};
use crate::qlearn::vech_weights;

const DEFINITENESS_TOL: f64 = 1e-9;
const KLEINMAN_TOL: f64 = 1e-12;
const KLEINMAN_MAX_ITERS: usize = 100;
/// Accepted Frobenius norm of the ARE residual.
pub const ARE_RESIDUAL_TOL: f64 = 1e-8;

/// Plant `ẋ = Ax + Bu` together with the quadratic cost weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Matrix,
    b: Matrix,
    m: Matrix,
    r: Matrix,
    r_inv: Matrix,
}

impl SystemModel {
    pub fn new(a: Matrix, b: Matrix, m: Matrix, r: Matrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("A is {:?}", a.shape())));
        }
        if b.rows() != n || b.cols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {:?}, expected {n} rows",
                b.shape()
            )));
        }
        let nu = b.cols();
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "M is {:?}, expected {n}x{n}",
                m.shape()
            )));
        }
        if r.shape() != (nu, nu) {
            return Err(Error::DimensionMismatch(format!(
                "R is {:?}, expected {nu}x{nu}",
                r.shape()
            )));
        }
        if min_eig_sym(&m)? < -DEFINITENESS_TOL {
            return Err(Error::InvariantViolation(
                "M must be positive semidefinite".into(),
            ));
        }
        if min_eig_sym(&r)? <= DEFINITENESS_TOL {
            return Err(Error::InvariantViolation(
                "R must be positive definite".into(),
            ));
        }
        let btb = b.transpose().matmul(&b)?;
        if min_eig_sym(&btb)? <= DEFINITENESS_TOL {
            return Err(Error::InvariantViolation(
                "B must have full column rank".into(),
            ));
        }
        let r_inv = r.inverse()?.symmetrize();
        Ok(Self { a, b, m, r, r_inv })
    }

    /// The simulation example: an open-loop unstable second-order plant.
    pub fn demo() -> Self {
        Self::new(
            Matrix::from_rows(&[[0.0, 1.0], [1.6, 2.8]]),
            Matrix::from_rows(&[[0.0], [1.0]]),
            Matrix::identity(2),
            Matrix::from_rows(&[[0.1]]),
        )
        .expect("valid example system")
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn r_inv(&self) -> &Matrix {
        &self.r_inv
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension.
    pub fn m_inputs(&self) -> usize {
        self.b.cols()
    }

    /// Instantaneous cost `½(xᵀMx + uᵀRu)`.
    pub fn stage_cost(&self, x: &[f64], u: &[f64]) -> f64 {
        let mx = self.m.mul_vec(x).expect("state dimension");
        let ru = self.r.mul_vec(u).expect("input dimension");
        0.5 * (matlib::dot(x, &mx) + matlib::dot(u, &ru))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// Stabilizing ARE solution.
    pub p: Matrix,
    /// Optimal actor weights, `u* = W_aᵀx`.
    pub wa: Matrix,
    /// Ideal critic weights `½·vech(Q̄)`.
    pub wc: Vec<f64>,
    /// Q-function kernel `[[PA + AᵀP + P + M, PB], [BᵀP, R]]`.
    pub qbar: Matrix,
    /// Frobenius norm of the ARE residual at `p`.
    pub residual: f64,
    /// Kleinman iterations used.
    pub iterations: usize,
}

impl RiccatiSolution {
    /// Optimal state-feedback gain `K = R⁻¹BᵀP` (so `u* = −Kx`).
    pub fn gain(&self) -> Matrix {
        self.wa.transpose().scale(-1.0)
    }
}

/// Solves `FᵀP + PF + Q = 0` for symmetric `P`.
pub fn solve_lyapunov(f: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !f.is_square() || q.shape() != f.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov operands {:?} and {:?}",
            f.shape(),
            q.shape()
        )));
    }
    q.ensure_symmetric()?;
    let n = f.rows();
    let eye = Matrix::identity(n);
    let ft = f.transpose();
    let lhs = kron(&eye, &ft).add(&kron(&ft, &eye))?;
    let rhs: Vec<f64> = q.vec().iter().map(|v| -v).collect();
    let p = solve_linear(&lhs, &rhs)?;
    Ok(Matrix::unvec(&p, n, n)?.symmetrize())
}

/// `‖FᵀP + PF + Q‖_F`.
pub fn lyapunov_residual(f: &Matrix, p: &Matrix, q: &Matrix) -> Result<f64> {
    let ft = f.transpose();
    Ok(ft.matmul(p)?.add(&p.matmul(f)?)?.add(q)?.frobenius_norm())
}

/// Lyapunov stability test: `F` is Hurwitz iff `FᵀP + PF + I = 0` has a
/// positive definite solution.
pub fn is_hurwitz(f: &Matrix) -> bool {
    if !f.is_square() {
        return false;
    }
    match solve_lyapunov(f, &Matrix::identity(f.rows())) {
        Ok(p) => matches!(matlib::is_positive_definite(&p, 0.0), Ok(true)),
        Err(_) => false,
    }
}

/// `‖AᵀP + PA − PBR⁻¹BᵀP + M‖_F`.
pub fn care_residual(sys: &SystemModel, p: &Matrix) -> Result<f64> {
    let at = sys.a().transpose();
    let pb = p.matmul(sys.b())?;
    let quad = pb.matmul(sys.r_inv())?.matmul(&pb.transpose())?;
    Ok(at
        .matmul(p)?
        .add(&p.matmul(sys.a())?)?
        .sub(&quad)?
        .add(sys.m())?
        .frobenius_norm())
}

/// Returns `K₀` with `A − BK₀` Hurwitz, by Bass's method.
pub fn stabilizing_initial_gain(sys: &SystemModel) -> Result<Matrix> {
    let n = sys.n();
    let (a, b) = (sys.a(), sys.b());
    if is_hurwitz(a) {
        return Ok(Matrix::zeros(sys.m_inputs(), n));
    }
    let beta = a.frobenius_norm() + 1.0;
    let shifted = a.add(&Matrix::identity(n).scale(beta))?;
    // (A + βI)X + X(A + βI)ᵀ = 2BBᵀ
    let bbt2 = b.matmul(&b.transpose())?.scale(2.0);
    let x = solve_lyapunov(&shifted.transpose().scale(-1.0), &bbt2)
        .map_err(|e| Error::NotStabilizable(format!("Bass equation: {e}")))?;
    let x_inv = x
        .inverse()
        .map_err(|_| Error::NotStabilizable("Bass Gramian is singular".into()))?;
    let k0 = b.transpose().matmul(&x_inv)?;
    if !is_hurwitz(&a.sub(&b.matmul(&k0)?)?) {
        return Err(Error::NotStabilizable(
            "seed gain failed the Lyapunov certification".into(),
        ));
    }
    Ok(k0)
}

/// Solves the continuous-time ARE and assembles the ideal Q-learning weights.
pub fn solve_care(sys: &SystemModel) -> Result<RiccatiSolution> {
    let (a, b, r) = (sys.a(), sys.b(), sys.r());
    let bt = b.transpose();
    let mut k = stabilizing_initial_gain(sys)?;
    let mut p_prev: Option<Matrix> = None;
    let mut last_step = f64::INFINITY;
    for iteration in 1..=KLEINMAN_MAX_ITERS {
        let closed = a.sub(&b.matmul(&k)?)?;
        let q = sys
            .m()
            .add(&k.transpose().matmul(r)?.matmul(&k)?)?
            .symmetrize();
        let p = solve_lyapunov(&closed, &q)?;
        k = sys.r_inv().matmul(&bt)?.matmul(&p)?;
        if let Some(prev) = &p_prev {
            last_step = p.sub(prev)?.frobenius_norm();
            if last_step <= KLEINMAN_TOL * p.frobenius_norm().max(1.0) {
                return assemble(sys, p, iteration);
            }
        }
        p_prev = Some(p);
    }
    Err(Error::NoConvergence {
        iterations: KLEINMAN_MAX_ITERS,
        last_step,
    })
}

fn assemble(sys: &SystemModel, p: Matrix, iterations: usize) -> Result<RiccatiSolution> {
    let residual = care_residual(sys, &p)?;
    if residual > ARE_RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            iterations,
            last_step: residual,
        });
    }
    let qbar = q_kernel(sys, &p)?;
    let wa = sys
        .r_inv()
        .matmul(&sys.b().transpose())?
        .matmul(&p)?
        .transpose()
        .scale(-1.0);
    let wc = vech_weights(&qbar)?;
    Ok(RiccatiSolution {
        p,
        wa,
        wc,
        qbar,
        residual,
        iterations,
    })
}

/// Assembles `Q̄` from a value-function matrix `P`.
pub fn q_kernel(sys: &SystemModel, p: &Matrix) -> Result<Matrix> {
    let (n, m) = (sys.n(), sys.m_inputs());
    let a = sys.a();
    let q11 = p
        .matmul(a)?
        .add(&a.transpose().matmul(p)?)?
        .add(p)?
        .add(sys.m())?
        .symmetrize();
    let q12 = p.matmul(sys.b())?;
    let mut qbar = Matrix::zeros(n + m, n + m);
    qbar.set_block(0, 0, &q11);
    qbar.set_block(0, n, &q12);
    qbar.set_block(n, 0, &q12.transpose());
    qbar.set_block(n, n, sys.r());
    Ok(qbar)
}
