//! LTI plant simulation with classical fourth-order Runge–Kutta.
//!
//! Two stepping flavours exist. [`rk4_step`] holds the input constant across
//! the step. [`rk4_step_feedback`] and [`integrate_feedback`] re-evaluate a
//! state-feedback law at every stage, which is what the closed-loop
//! experiments use: the barrier term of the safe controller is stiff near the
//! boundary, so [`integrate_feedback`] subdivides a step until the
//! step-doubling error estimate is small enough.

use crate::error::{Error, Result};
use crate::matlib::{self, axpy};
use crate::riccati::SystemModel;

/// Largest admissible plant step.
pub const MAX_DT: f64 = 0.01;
/// Default plant step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Relative local error accepted by [`integrate_feedback`].
pub const DEFAULT_SUBSTEP_TOL: f64 = 1e-10;
const MAX_SUBDIVISION_DEPTH: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub x: Vec<f64>,
}

impl PlantState {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state"));
        }
        Ok(Self { t, x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self { dt, t_end };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvariantViolation(format!(
                "dt must lie in (0, {MAX_DT}], got {}",
                self.dt
            )));
        }
        if self.t_end.is_nan() || self.t_end < self.dt {
            return Err(Error::InvariantViolation(format!(
                "t_end ({}) must be at least dt ({})",
                self.t_end, self.dt
            )));
        }
        let ratio = self.t_end / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "t_end / dt = {ratio} is not an integer"
            )));
        }
        Ok(())
    }

    /// Number of plant steps in one episode.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: 20.0,
        }
    }
}

/// `Ax + Bu`.
pub fn dynamics(sys: &SystemModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if x.len() != sys.n() || u.len() != sys.m_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "state {} / input {} for a system with n = {}, m = {}",
            x.len(),
            u.len(),
            sys.n(),
            sys.m_inputs()
        )));
    }
    let ax = sys.a().mul_vec(x)?;
    let bu = sys.b().mul_vec(u)?;
    Ok(ax.iter().zip(&bu).map(|(a, b)| a + b).collect())
}

/// One RK4 step with `u` held constant over `[t, t + dt]`.
pub fn rk4_step(sys: &SystemModel, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let k1 = dynamics(sys, x, u)?;
    let k2 = dynamics(sys, &axpy(x, 0.5 * dt, &k1), u)?;
    let k3 = dynamics(sys, &axpy(x, 0.5 * dt, &k2), u)?;
    let k4 = dynamics(sys, &axpy(x, dt, &k3), u)?;
    Ok(combine(x, dt, &k1, &k2, &k3, &k4))
}

fn combine(x: &[f64], dt: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Result of advancing the closed loop over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: Vec<f64>,
    /// `∫ ½(xᵀMx + uᵀRu) dτ` over the interval.
    pub cost: f64,
    /// Number of RK4 sub-steps accepted.
    pub substeps: usize,
}

/// One RK4 step of `ẋ = Ax + B·policy(t, x)`, integrating the stage cost
/// alongside the state.
pub fn rk4_step_feedback<P>(
    sys: &SystemModel,
    t: f64,
    x: &[f64],
    dt: f64,
    policy: &mut P,
) -> Result<(Vec<f64>, f64)>
where
    P: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut stage = |tt: f64, y: &[f64]| -> Result<(Vec<f64>, f64)> {
        let u = policy(tt, y)?;
        Ok((dynamics(sys, y, &u)?, sys.stage_cost(y, &u)))
    };
    let (k1, c1) = stage(t, x)?;
    let (k2, c2) = stage(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1))?;
    let (k3, c3) = stage(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2))?;
    let (k4, c4) = stage(t + dt, &axpy(x, dt, &k3))?;
    let x_next = combine(x, dt, &k1, &k2, &k3, &k4);
    let cost = dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    Ok((x_next, cost))
}

/// Advances the closed loop over `[t, t + dt]`, subdividing the interval
/// whenever the full step and two half steps disagree by more than
/// `tol·(1 + |x|)` or a stage leaves the policy's domain.
pub fn integrate_feedback<P>(
    sys: &SystemModel,
    t: f64,
    x: &[f64],
    dt: f64,
    tol: f64,
    policy: &mut P,
) -> Result<StepOutcome>
where
    P: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    subdivide(sys, t, x, dt, tol, policy, 0)
}

fn subdivide<P>(
    sys: &SystemModel,
    t: f64,
    x: &[f64],
    h: f64,
    tol: f64,
    policy: &mut P,
    depth: u32,
) -> Result<StepOutcome>
where
    P: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let attempt = (|| -> Result<(Vec<f64>, f64, f64)> {
        let (full, _) = rk4_step_feedback(sys, t, x, h, policy)?;
        let (mid, c1) = rk4_step_feedback(sys, t, x, 0.5 * h, policy)?;
        let (half, c2) = rk4_step_feedback(sys, t + 0.5 * h, &mid, 0.5 * h, policy)?;
        let diff: Vec<f64> = full.iter().zip(&half).map(|(a, b)| a - b).collect();
        let err = matlib::norm(&diff) / (1.0 + matlib::norm(&half));
        Ok((half, c1 + c2, err))
    })();
    match attempt {
        Ok((half, cost, err)) if err.is_finite() && err <= tol => Ok(StepOutcome {
            x: half,
            cost,
            substeps: 2,
        }),
        Ok((half, cost, _)) if depth >= MAX_SUBDIVISION_DEPTH => Ok(StepOutcome {
            x: half,
            cost,
            substeps: 2,
        }),
        Err(e) if depth >= MAX_SUBDIVISION_DEPTH => Err(e),
        _ => {
            let first = subdivide(sys, t, x, 0.5 * h, tol, policy, depth + 1)?;
            let second = subdivide(sys, t + 0.5 * h, &first.x, 0.5 * h, tol, policy, depth + 1)?;
            Ok(StepOutcome {
                x: second.x,
                cost: first.cost + second.cost,
                substeps: first.substeps + second.substeps,
            })
        }
    }
}
