//! Norm-ball safe set and its reciprocal barrier.
//!
//! The safe set is `𝒮 = {x : ‖x‖ ≤ c}` with zeroing function
//! `h(x) = c² − xᵀx`. The reciprocal barrier is
//! `B_s(x) = (c²/(c² − xᵀx) − 1)² = (s/(c² − s))²` with `s = xᵀx`, which is
//! zero at the origin and blows up on the boundary.

use crate::error::{Error, Result};
use crate::matlib;
use crate::plant::dynamics;
use crate::riccati::SystemModel;

/// Below this barrier value the safety constraint is treated as inactive.
pub const INACTIVE_BARRIER: f64 = 1e-12;
/// Residual reported when the constraint is inactive (stands in for −∞).
pub const INACTIVE_RESIDUAL: f64 = -1e18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    /// Radius of the safe ball.
    pub c: f64,
    /// Slope of the linear class-K function `γ(s) = gamma0·s`.
    pub gamma0: f64,
    /// States with `‖x‖ ≥ c − eps_interior` count as outside the interior.
    pub eps_interior: f64,
}

impl BarrierSpec {
    pub fn new(c: f64, gamma0: f64) -> Result<Self> {
        let spec = Self {
            c,
            gamma0,
            eps_interior: 1e-9 * c,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        if !(self.eps_interior > 0.0 && self.eps_interior < self.c) {
            return Err(Error::InvariantViolation(format!(
                "eps_interior must lie in (0, c), got {}",
                self.eps_interior
            )));
        }
        Ok(())
    }

    /// Zeroing barrier `c² − xᵀx`.
    pub fn h(&self, x: &[f64]) -> f64 {
        self.c * self.c - matlib::dot(x, x)
    }

    /// Distance to the boundary, `c − ‖x‖`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.c - matlib::norm(x)
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        matlib::norm(x) < self.c - self.eps_interior
    }

    fn check_interior(&self, x: &[f64]) -> Result<f64> {
        let norm = matlib::norm(x);
        if norm < self.c - self.eps_interior {
            Ok(norm * norm)
        } else {
            Err(Error::OutsideInterior {
                norm,
                limit: self.c - self.eps_interior,
            })
        }
    }

    /// Reciprocal barrier `B_s(x)`.
    pub fn b_s(&self, x: &[f64]) -> Result<f64> {
        let s = self.check_interior(x)?;
        let ratio = s / (self.c * self.c - s);
        Ok(ratio * ratio)
    }

    /// `∇B_s(x) = 4c²·s·x / (c² − s)³`.
    pub fn grad_b_s(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.check_interior(x)?;
        let c2 = self.c * self.c;
        let scale = 4.0 * c2 * s / (c2 - s).powi(3);
        Ok(x.iter().map(|v| scale * v).collect())
    }

    /// Class-K gain `γ(s) = gamma0·s`.
    pub fn gamma(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::NegativeArgument(s));
        }
        Ok(self.gamma0 * s)
    }

    /// `∇B_sᵀ(Ax + Bu) − γ(1/B_s)`; non-positive means the barrier constraint
    /// holds at `(x, u)`. Needs the model, so only oracle code calls this.
    ///
    /// Where `B_s ≤ 1e-12` (a neighbourhood of the origin) `1/B_s` is not
    /// usable; the constraint cannot bind there and [`INACTIVE_RESIDUAL`] is
    /// returned.
    pub fn constraint_residual(&self, sys: &SystemModel, x: &[f64], u: &[f64]) -> Result<f64> {
        let bs = self.b_s(x)?;
        if bs <= INACTIVE_BARRIER {
            return Ok(INACTIVE_RESIDUAL);
        }
        let grad = self.grad_b_s(x)?;
        let drift = dynamics(sys, x, u)?;
        Ok(matlib::dot(&grad, &drift) - self.gamma(1.0 / bs)?)
    }
}

impl Default for BarrierSpec {
    fn default() -> Self {
        Self::new(1.5, 1.0).expect("valid default")
    }
}
