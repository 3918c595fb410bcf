//! Model-free actor–critic Q-learning.
//!
//! The critic approximates `Q(x, u) = ½XᵀQ̄X` with `X = [x; u]` through the
//! quadratic monomial basis `φ(X)` and weights `W_c = ½·vech(Q̄)` (off-diagonal
//! entries doubled, so `W_cᵀφ(X) = ½XᵀQ̄X`). It is trained on the integral
//! temporal-difference error over a sliding window of length `T`:
//!
//! ```text
//! e_c = Ŵ_cᵀ(φ(X(t)) − φ(X(t−T))) + ½∫_{t−T}^{t} (xᵀMx + uᵀRu) dτ
//! ```
//!
//! The actor `Ŵ_a` chases `−Q̂₂₁ᵀQ̂₂₂⁻¹` extracted from the critic, projected
//! onto the Frobenius ball of radius `Wa_bound`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matlib::{self, min_eig_sym, Matrix};

/// Number of critic weights for `n` states and `m` inputs.
pub fn basis_len(n: usize, m: usize) -> usize {
    let q = n + m;
    q * (q + 1) / 2
}

/// Position of monomial `X_i·X_j` (`i ≤ j`) in the row-scan ordering.
pub fn vech_index(i: usize, j: usize, dim: usize) -> usize {
    debug_assert!(i <= j && j < dim);
    i * dim - i * (i + 1) / 2 + j
}

/// Quadratic basis `[X_i·X_j for i ≤ j]` in row-scan order.
pub fn basis_phi(x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            out.push(x[i] * x[j]);
        }
    }
    out
}

/// `½·vech(Q̄)` with doubled off-diagonal entries, ordered like [`basis_phi`].
pub fn vech_weights(qbar: &Matrix) -> Result<Vec<f64>> {
    if !qbar.is_square() {
        return Err(Error::DimensionMismatch(format!("Q̄ is {:?}", qbar.shape())));
    }
    qbar.ensure_symmetric()?;
    let dim = qbar.rows();
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                out.push(0.5 * qbar[(i, i)]);
            } else {
                out.push(0.5 * (qbar[(i, j)] + qbar[(j, i)]));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`vech_weights`].
pub fn unvech(w: &[f64], n: usize, m: usize) -> Result<Matrix> {
    let dim = n + m;
    if w.len() != basis_len(n, m) {
        return Err(Error::DimensionMismatch(format!(
            "{} critic weights for n = {n}, m = {m} (expected {})",
            w.len(),
            basis_len(n, m)
        )));
    }
    let mut q = Matrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                q[(i, i)] = 2.0 * w[k];
            } else {
                q[(i, j)] = w[k];
                q[(j, i)] = w[k];
            }
            k += 1;
        }
    }
    Ok(q)
}

/// Splits critic weights into `(Q̂₂₁, Q̂₂₂)`.
///
/// `Q̂₂₂` is lifted so that its smallest eigenvalue is at least
/// `1e-6·λ_min(R)`, which keeps it invertible during transients.
pub fn extract_gain(wc: &[f64], n: usize, m: usize, r: &Matrix) -> Result<(Matrix, Matrix)> {
    let q = unvech(wc, n, m)?;
    let q21 = q.block(n, 0, m, n);
    let q22 = q.block(n, n, m, m);
    let floor = 1e-6 * min_eig_sym(r)?;
    let lowest = min_eig_sym(&q22)?;
    let q22 = if lowest < floor {
        q22.add(&Matrix::identity(m).scale(floor - lowest))?
    } else {
        q22
    };
    Ok((q21, q22))
}

/// Sliding window of samples `(t, X, ½(xᵀMx + uᵀRu))` spanning `[t − T, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralWindow {
    dt: f64,
    span: f64,
    capacity: usize,
    samples: VecDeque<WindowSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub integrand: f64,
}

impl IntegralWindow {
    pub fn new(span: f64, dt: f64) -> Result<Self> {
        let ratio = span / dt;
        if !(dt > 0.0 && span >= dt) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvariantViolation(format!(
                "window span {span} must be a positive integral multiple of dt {dt}"
            )));
        }
        let capacity = ratio.round() as usize + 1;
        Ok(Self {
            dt,
            span,
            capacity,
            samples: VecDeque::with_capacity(capacity),
        })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn is_warm(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn oldest(&self) -> Option<&WindowSample> {
        self.samples.front()
    }

    pub fn newest(&self) -> Option<&WindowSample> {
        self.samples.back()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Pushes a sample, evicts everything older than `t − T`, and returns the
    /// trapezoidal integral of the stored integrand over the window.
    pub fn push_and_integrate(&mut self, t: f64, x: &[f64], integrand: f64) -> Result<f64> {
        if let Some(last) = self.samples.back() {
            let gap = t - last.t;
            if (gap - self.dt).abs() > 1e-9 * self.dt.max(t.abs()) {
                return Err(Error::InvariantViolation(format!(
                    "window samples must be spaced by dt = {}, got {gap}",
                    self.dt
                )));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(WindowSample {
            t,
            x: x.to_vec(),
            integrand,
        });
        if !self.is_warm() {
            return Err(Error::NotWarmedUp);
        }
        let first = self.samples.front().map_or(0.0, |s| s.integrand);
        let total: f64 = self.samples.iter().map(|s| s.integrand).sum();
        Ok(self.dt * (total - 0.5 * (first + integrand)))
    }
}

/// Integral TD error and the regressor `ψ = φ_now − φ_then`.
pub fn td_error(
    wc: &[f64],
    phi_now: &[f64],
    phi_then: &[f64],
    window_integral: f64,
) -> (f64, Vec<f64>) {
    let psi: Vec<f64> = phi_now.iter().zip(phi_then).map(|(a, b)| a - b).collect();
    (matlib::dot(wc, &psi) + window_integral, psi)
}

/// `−η_c·ψ/(1 + ψᵀψ)²·e_c`.
pub fn critic_derivative(e_c: f64, psi: &[f64], eta_c: f64) -> Vec<f64> {
    let denom = (1.0 + matlib::dot(psi, psi)).powi(2);
    psi.iter().map(|p| -eta_c * p / denom * e_c).collect()
}

/// Projected actor flow `proj(−η_a(Q̂₂₁ᵀQ̂₂₂⁻¹ + Ŵ_a))`.
///
/// On or beyond the bound, an outward-pointing derivative loses its radial
/// component.
pub fn actor_derivative(
    wa: &Matrix,
    q21: &Matrix,
    q22: &Matrix,
    eta_a: f64,
    wa_bound: f64,
) -> Result<Matrix> {
    let target = q21.transpose().matmul(&q22.inverse()?)?;
    let raw = target.add(wa)?.scale(-eta_a);
    let norm = wa.frobenius_norm();
    let outward = wa.frobenius_dot(&raw)?;
    if norm >= wa_bound && outward > 0.0 {
        return raw.sub(&wa.scale(outward / (norm * norm)));
    }
    Ok(raw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnGains {
    /// Critic gain.
    pub eta_c: f64,
    /// Actor gain.
    pub eta_a: f64,
    /// Projection radius for `Ŵ_a`.
    pub wa_bound: f64,
    /// Integral window length.
    pub t_window: f64,
    /// Constant safety gain in place of the KKT multiplier.
    pub k_sb: f64,
}

impl LearnGains {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta_c", self.eta_c),
            ("eta_a", self.eta_a),
            ("Wa_bound", self.wa_bound),
            ("T", self.t_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvariantViolation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.k_sb >= 0.0 && self.k_sb.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "k_sb must be non-negative, got {}",
                self.k_sb
            )));
        }
        Ok(())
    }

    /// The critic is expected to run at least ten times faster than the actor.
    pub fn timescale_warning(&self) -> Option<String> {
        (self.eta_c < 10.0 * self.eta_a).then(|| {
            format!(
                "critic gain {} is less than 10x the actor gain {}",
                self.eta_c, self.eta_a
            )
        })
    }
}

impl Default for LearnGains {
    fn default() -> Self {
        Self {
            eta_c: 20.0,
            eta_a: 0.05,
            wa_bound: 20.0,
            t_window: 0.01,
            k_sb: 0.2,
        }
    }
}

/// Per-step diagnostics from [`LearnerState::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// TD error, `None` until the window spans `T`.
    pub e_c: Option<f64>,
    pub psi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub wc: Vec<f64>,
    pub wa: Matrix,
    window: IntegralWindow,
    m_weight: Matrix,
    r_weight: Matrix,
    n: usize,
    m: usize,
}

impl LearnerState {
    /// Fresh learner: `Ŵ_a = 0`, critic zero except the `Q₂₂` block set from `R`.
    pub fn new(m_weight: &Matrix, r_weight: &Matrix, t_window: f64, dt: f64) -> Result<Self> {
        let n = m_weight.rows();
        let m = r_weight.rows();
        let mut qbar = Matrix::zeros(n + m, n + m);
        qbar.set_block(n, n, r_weight);
        Self::with_weights(
            m_weight,
            r_weight,
            vech_weights(&qbar)?,
            Matrix::zeros(n, m),
            t_window,
            dt,
        )
    }

    pub fn with_weights(
        m_weight: &Matrix,
        r_weight: &Matrix,
        wc: Vec<f64>,
        wa: Matrix,
        t_window: f64,
        dt: f64,
    ) -> Result<Self> {
        let n = m_weight.rows();
        let m = r_weight.rows();
        if wc.len() != basis_len(n, m) || wa.shape() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "critic {} / actor {:?} for n = {n}, m = {m}",
                wc.len(),
                wa.shape()
            )));
        }
        Ok(Self {
            wc,
            wa,
            window: IntegralWindow::new(t_window, dt)?,
            m_weight: m_weight.clone(),
            r_weight: r_weight.clone(),
            n,
            m,
        })
    }

    pub fn window(&self) -> &IntegralWindow {
        &self.window
    }

    /// Current `(Q̂₂₁, Q̂₂₂)`.
    pub fn q_blocks(&self) -> Result<(Matrix, Matrix)> {
        extract_gain(&self.wc, self.n, self.m, &self.r_weight)
    }

    /// Records the applied `(x, u)` at time `t` and advances both weight
    /// vectors by one explicit Euler step of length `dt`. Before the window is
    /// warm the weights are left unchanged.
    pub fn step(
        &mut self,
        gains: &LearnGains,
        t: f64,
        x: &[f64],
        u: &[f64],
        dt: f64,
    ) -> Result<StepReport> {
        let xu: Vec<f64> = x.iter().chain(u).copied().collect();
        let mx = self.m_weight.mul_vec(x)?;
        let ru = self.r_weight.mul_vec(u)?;
        let integrand = 0.5 * (matlib::dot(x, &mx) + matlib::dot(u, &ru));
        let integral = match self.window.push_and_integrate(t, &xu, integrand) {
            Ok(v) => v,
            Err(Error::NotWarmedUp) => {
                return Ok(StepReport {
                    e_c: None,
                    psi: None,
                })
            }
            Err(e) => return Err(e),
        };
        let then = self.window.oldest().expect("warm window").x.clone();
        let (e_c, psi) = td_error(&self.wc, &basis_phi(&xu), &basis_phi(&then), integral);

        let dwc = critic_derivative(e_c, &psi, gains.eta_c);
        let (q21, q22) = self.q_blocks()?;
        let dwa = actor_derivative(&self.wa, &q21, &q22, gains.eta_a, gains.wa_bound)?;

        for (w, d) in self.wc.iter_mut().zip(&dwc) {
            *w += dt * d;
        }
        self.wa = self.wa.add(&dwa.scale(dt))?;
        let mut norm = self.wa.frobenius_norm();
        // rounding can leave the rescaled weights a few ulps outside
        while norm > gains.wa_bound {
            self.wa = self.wa.scale(gains.wa_bound / norm * (1.0 - f64::EPSILON));
            norm = self.wa.frobenius_norm();
        }
        Ok(StepReport {
            e_c: Some(e_c),
            psi: Some(psi),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_examples() {
        assert_eq!(
            basis_phi(&[1.0, 0.0, 0.0]),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            basis_phi(&[1.0, 2.0, 3.0]),
            vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
        assert_eq!(basis_len(2, 1), 6);
    }

    #[test]
    fn vech_index_matches_basis_order() {
        let dim = 4;
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                assert_eq!(vech_index(i, j, dim), k);
                k += 1;
            }
        }
    }

    #[test]
    fn vech_examples() {
        assert_eq!(
            vech_weights(&Matrix::identity(3)).unwrap(),
            vec![0.5, 0.0, 0.0, 0.5, 0.0, 0.5]
        );
        let off = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(vech_weights(&off).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            vech_weights(&Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn unvech_examples() {
        assert_eq!(unvech(&[0.0; 6], 2, 1).unwrap(), Matrix::zeros(3, 3));
        assert_eq!(
            unvech(&[0.5, 0.0, 0.0, 0.5, 0.0, 0.5], 2, 1).unwrap(),
            Matrix::identity(3)
        );
        assert!(matches!(
            unvech(&[0.0; 5], 2, 1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn extract_gain_guard_and_indices() {
        let r = Matrix::from_rows(&[[0.1]]);
        let (q21, q22) = extract_gain(&[0.0; 6], 2, 1, &r).unwrap();
        assert_eq!(q21, Matrix::zeros(1, 2));
        assert_abs_diff_eq!(q22[(0, 0)], 1e-7, epsilon = 1e-20);

        // entries (1,3) and (2,3) in one-based indexing sit at positions 2 and 4
        let w = [0.0, 0.0, 7.0, 0.0, -3.0, 0.05];
        let (q21, q22) = extract_gain(&w, 2, 1, &r).unwrap();
        assert_eq!(q21, Matrix::from_rows(&[[7.0, -3.0]]));
        assert_abs_diff_eq!(q22[(0, 0)], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn window_constant_and_linear_integrands() {
        let dt = 1e-3;
        let mut w = IntegralWindow::new(0.01, dt).unwrap();
        let mut last = Err(Error::NotWarmedUp);
        for k in 0..25 {
            last = w.push_and_integrate(k as f64 * dt, &[0.0], 3.0);
            if k < 10 {
                assert_eq!(last, Err(Error::NotWarmedUp));
            }
        }
        assert_abs_diff_eq!(last.unwrap(), 0.03, epsilon = 1e-12);

        let mut w = IntegralWindow::new(0.01, dt).unwrap();
        let mut last = 0.0;
        for k in 0..30 {
            let t = k as f64 * dt;
            if let Ok(v) = w.push_and_integrate(t, &[0.0], t) {
                last = v;
            }
        }
        let t = 29.0 * dt;
        let exact = 0.5 * (t * t - (t - 0.01) * (t - 0.01));
        assert_abs_diff_eq!(last, exact, epsilon = 1e-12);
    }

    #[test]
    fn window_rejects_irregular_spacing() {
        let mut w = IntegralWindow::new(0.01, 1e-3).unwrap();
        let _ = w.push_and_integrate(0.0, &[0.0], 1.0);
        assert!(matches!(
            w.push_and_integrate(0.005, &[0.0], 1.0),
            Err(Error::InvariantViolation(_))
        ));
        assert!(IntegralWindow::new(0.0105, 1e-3).is_err());
    }

    #[test]
    fn td_error_examples() {
        let phi = basis_phi(&[0.3, -0.2, 1.0]);
        let (e, psi) = td_error(&[0.0; 6], &phi, &phi, 0.0);
        assert_eq!(e, 0.0);
        assert!(psi.iter().all(|p| *p == 0.0));
        let (e, _) = td_error(&[1.0; 6], &phi, &phi, 0.7);
        assert_eq!(e, 0.7);
    }

    #[test]
    fn critic_derivative_examples() {
        assert!(critic_derivative(0.0, &[1.0, 2.0], 20.0)
            .iter()
            .all(|v| *v == 0.0));
        assert!(critic_derivative(3.0, &[0.0, 0.0], 20.0)
            .iter()
            .all(|v| *v == 0.0));
        assert_eq!(critic_derivative(1.0, &[1.0, 0.0], 20.0), vec![-5.0, 0.0]);
    }

    #[test]
    fn actor_derivative_fixed_point_and_interior() {
        let q21 = Matrix::from_rows(&[[0.5, 0.8]]);
        let q22 = Matrix::from_rows(&[[0.1]]);
        let consistent = q21.transpose().scale(-10.0);
        let d = actor_derivative(&consistent, &q21, &q22, 0.05, 20.0).unwrap();
        assert!(d.frobenius_norm() < 1e-15);

        let wa = Matrix::from_rows(&[[1.0], [2.0]]);
        let d = actor_derivative(&wa, &q21, &q22, 0.05, 20.0).unwrap();
        let raw = q21.transpose().scale(10.0).add(&wa).unwrap().scale(-0.05);
        assert_eq!(d, raw);
    }

    #[test]
    fn actor_projection_removes_outward_component() {
        // target −Q₂₁ᵀQ₂₂⁻¹ = [−30, 0] pulls Ŵ_a outward through the bound
        let q21 = Matrix::from_rows(&[[3.0, 0.0]]);
        let q22 = Matrix::from_rows(&[[0.1]]);
        let wa = Matrix::from_rows(&[[-3.0], [-4.0]]);
        let d = actor_derivative(&wa, &q21, &q22, 0.05, 5.0).unwrap();
        assert!(wa.frobenius_dot(&d).unwrap().abs() < 1e-12);
        assert!(d.frobenius_norm() > 0.0);
    }

    #[test]
    fn learner_zero_gains_keeps_weights() {
        let m = Matrix::identity(2);
        let r = Matrix::from_rows(&[[0.1]]);
        let mut learner = LearnerState::new(&m, &r, 0.01, 1e-3).unwrap();
        let gains = LearnGains {
            eta_c: 0.0,
            eta_a: 0.0,
            ..LearnGains::default()
        };
        let before = learner.clone();
        for k in 0..50 {
            let t = k as f64 * 1e-3;
            learner
                .step(&gains, t, &[t.sin(), t.cos()], &[0.3], 1e-3)
                .unwrap();
        }
        assert_eq!(learner.wc, before.wc);
        assert_eq!(learner.wa, before.wa);
    }

    #[test]
    fn learner_initial_weights() {
        let learner = LearnerState::new(
            &Matrix::identity(2),
            &Matrix::from_rows(&[[0.1]]),
            0.01,
            1e-3,
        )
        .unwrap();
        assert_eq!(learner.wc, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.05]);
        assert_eq!(learner.wa, Matrix::zeros(2, 1));
    }

    #[test]
    fn gains_validation() {
        assert!(LearnGains::default().validate().is_ok());
        assert!(LearnGains {
            k_sb: -1.0,
            ..LearnGains::default()
        }
        .validate()
        .is_err());
        assert!(LearnGains::default().timescale_warning().is_none());
        assert!(LearnGains {
            eta_c: 0.1,
            ..LearnGains::default()
        }
        .timescale_warning()
        .is_some());
    }
}
