//! Closed-loop episodes, metrics, and the safety-gain sweep.
//!
//! One episode runs on a uniform grid `t_k = k·dt`. At every grid point the
//! controller output (plus exploration) is recorded, the learner consumes the
//! sample, and the plant is advanced to the next grid point with the feedback
//! law re-evaluated inside the integrator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barrier::BarrierSpec;
use crate::error::{Error, Result};
use crate::matlib::{self, eig_sym, Matrix};
use crate::plant::{integrate_feedback, IntegratorConfig, DEFAULT_SUBSTEP_TOL};
use crate::qlearn::{basis_len, LearnGains, LearnerState};
use crate::riccati::{solve_care, RiccatiSolution, SystemModel};
use crate::safecontrol::{u_hat_safe, u_star_safe, unconstrained_optimum};

/// Relative overshoot of `‖x‖` past `c` that counts as a breach.
pub const BREACH_TOL: f64 = 1e-6;
/// `‖x‖` beyond which an episode is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub num_tones: usize,
    /// Lowest tone, rad/s.
    pub freq_lo: f64,
    /// Highest tone, rad/s.
    pub freq_hi: f64,
    /// Exploration is switched off from this time on.
    pub t_off: f64,
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "noise amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.num_tones == 0 {
            return Err(Error::InvariantViolation(
                "noise needs at least one tone".into(),
            ));
        }
        let ordered = self.freq_lo > 0.0 && (self.num_tones == 1 || self.freq_hi > self.freq_lo);
        if !ordered {
            return Err(Error::InvariantViolation(format!(
                "noise frequencies must satisfy 0 < lo < hi, got [{}, {}]",
                self.freq_lo, self.freq_hi
            )));
        }
        Ok(())
    }

    /// Log-spaced tone frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.num_tones == 1 {
            return vec![self.freq_lo];
        }
        let ratio = self.freq_hi / self.freq_lo;
        (0..self.num_tones)
            .map(|k| self.freq_lo * ratio.powf(k as f64 / (self.num_tones - 1) as f64))
            .collect()
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            num_tones: 10,
            freq_lo: 0.5,
            freq_hi: 50.0,
            t_off: 10.0,
        }
    }
}

/// Multi-tone exploration signal with seeded phases, one phase set per input.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSignal {
    amplitude: f64,
    t_off: f64,
    freqs: Vec<f64>,
    phases: Vec<Vec<f64>>,
}

impl ExplorationSignal {
    pub fn new(noise: &NoiseSpec, inputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..inputs)
            .map(|_| {
                (0..noise.num_tones)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect()
            })
            .collect();
        Self {
            amplitude: noise.amplitude,
            t_off: noise.t_off,
            freqs: noise.frequencies(),
            phases,
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t < self.t_off && self.amplitude != 0.0
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        if !self.is_active(t) {
            return vec![0.0; self.phases.len()];
        }
        self.phases
            .iter()
            .map(|ph| {
                self.amplitude
                    * self
                        .freqs
                        .iter()
                        .zip(ph)
                        .map(|(w, p)| (w * t + p).sin())
                        .sum::<f64>()
            })
            .collect()
    }
}

/// `amplitude·Σ sin(ω_k t + φ_k)` per input for `t < t_off`, zero afterwards.
pub fn exploration_noise(noise: &NoiseSpec, inputs: usize, seed: u64, t: f64) -> Vec<f64> {
    ExplorationSignal::new(noise, inputs, seed).sample(t)
}

/// Which law drives the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerKind {
    /// `Ŵ_aᵀx − k_sb·R⁻¹Bᵀ∇B_s(x)` from the learner's current actor.
    #[default]
    Learned,
    /// Model-based `−R⁻¹BᵀPx`.
    OracleUnconstrained,
    /// Model-based KKT-optimal safe control.
    OracleSafe,
}

/// Initial learner weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightInit {
    /// `Ŵ_a = 0`, critic zero except the `Q₂₂` block taken from `R`.
    #[default]
    Default,
    /// Riccati-optimal `W_c` and `W_a`.
    Ideal,
    Custom {
        wc: Vec<f64>,
        wa: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sys: SystemModel,
    pub spec: BarrierSpec,
    pub gains: LearnGains,
    pub integ: IntegratorConfig,
    pub x0: Vec<f64>,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Forces `k_sb = 0`: plain Q-learning without the barrier term.
    pub baseline: bool,
    pub controller: ControllerKind,
    /// When false the weights stay at their initial values (the TD error is
    /// still evaluated).
    pub learning: bool,
    pub init: WeightInit,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.sys.n();
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0 has {} entries, system has n = {n}",
                self.x0.len()
            )));
        }
        self.spec.validate()?;
        self.gains.validate()?;
        self.integ.validate()?;
        self.noise.validate()?;
        if !self.spec.is_interior(&self.x0) {
            return Err(Error::InvariantViolation(format!(
                "x0 must lie strictly inside the safe set (|x0| = {}, c = {})",
                matlib::norm(&self.x0),
                self.spec.c
            )));
        }
        let ratio = self.gains.t_window / self.integ.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvariantViolation(format!(
                "T = {} is not a multiple of dt = {}",
                self.gains.t_window, self.integ.dt
            )));
        }
        Ok(())
    }

    /// Safety gain actually applied.
    pub fn effective_k_sb(&self) -> f64 {
        if self.baseline {
            0.0
        } else {
            self.gains.k_sb
        }
    }

    pub fn with_k_sb(&self, k_sb: f64) -> Self {
        let mut cfg = self.clone();
        cfg.gains.k_sb = k_sb;
        cfg
    }
}

impl Default for ExperimentConfig {
    /// The simulation study scenario.
    fn default() -> Self {
        Self {
            sys: SystemModel::demo(),
            spec: BarrierSpec::default(),
            gains: LearnGains::default(),
            integ: IntegratorConfig::default(),
            x0: vec![1.0, 1.0],
            noise: NoiseSpec::default(),
            seed: 0,
            baseline: false,
            controller: ControllerKind::Learned,
            learning: true,
            init: WeightInit::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub norm_x: f64,
    /// `B_s(x)`; infinite outside the interior.
    pub b_s: f64,
    /// TD error, `None` until the window is warm.
    pub e_c: Option<f64>,
    pub margin: f64,
    pub wc: Vec<f64>,
    /// Row-major `n×m` actor weights.
    pub wa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub n: usize,
    pub m: usize,
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn p(&self) -> usize {
        basis_len(self.n, self.m)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn final_actor(&self) -> Option<Matrix> {
        self.last()
            .map(|r| Matrix::new(self.n, self.m, r.wa.clone()).expect("logged actor shape"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    /// `∫ ½(xᵀMx + uᵀRu) dτ` over the episode, applied input including exploration.
    pub total_cost: f64,
    /// `max_t ‖u(t)‖` over grid samples.
    pub peak_control: f64,
    /// `min_t (c − ‖x(t)‖)`.
    pub min_margin: f64,
    /// `‖Ŵ_a(t_end) − W_a‖_F / ‖W_a‖_F`; NaN when the oracle is unavailable.
    pub actor_error: f64,
    pub safety_violated: bool,
    /// `‖x(t_end)‖`.
    pub final_norm: f64,
    /// Largest `|e_c|` once the window is warm.
    pub max_abs_td: f64,
    /// Smallest eigenvalue of the time-averaged `ψψᵀ/(1 + ψᵀψ)²` while
    /// exploration is on; NaN when no warm sample falls in that range.
    pub pe_level: f64,
    /// Largest `‖Ŵ_a‖_F` seen.
    pub max_actor_norm: f64,
    /// Largest `‖Ŵ_c‖` seen.
    pub max_critic_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breach {
    pub t: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub log: TrajectoryLog,
    pub metrics: RunMetrics,
    /// Set when the state crossed the boundary; the episode stops there.
    pub breach: Option<Breach>,
}

struct Policy<'a> {
    cfg: &'a ExperimentConfig,
    oracle: Option<&'a RiccatiSolution>,
    signal: &'a ExplorationSignal,
    k_sb: f64,
}

impl Policy<'_> {
    fn feedback(&self, wa: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        match cfg.controller {
            ControllerKind::Learned if self.k_sb == 0.0 => wa.tr_mul_vec(x),
            ControllerKind::Learned => u_hat_safe(wa, self.k_sb, &cfg.sys, &cfg.spec, x),
            ControllerKind::OracleUnconstrained => {
                unconstrained_optimum(&cfg.sys, &self.oracle.expect("oracle").p, x)
            }
            ControllerKind::OracleSafe => {
                u_star_safe(&cfg.sys, &cfg.spec, &self.oracle.expect("oracle").p, x)
            }
        }
    }

    fn apply(&self, wa: &Matrix, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.feedback(wa, x)?;
        if self.signal.is_active(t) {
            for (ui, ni) in u.iter_mut().zip(self.signal.sample(t)) {
                *ui += ni;
            }
        }
        Ok(u)
    }
}

/// Runs one closed-loop episode.
pub fn run_episode(cfg: &ExperimentConfig) -> Result<Episode> {
    cfg.validate()?;
    let (n, m) = (cfg.sys.n(), cfg.sys.m_inputs());
    let dt = cfg.integ.dt;
    let steps = cfg.integ.steps();
    let oracle = solve_care(&cfg.sys).ok();
    let needs_oracle = cfg.controller != ControllerKind::Learned || cfg.init == WeightInit::Ideal;
    if needs_oracle && oracle.is_none() {
        return Err(Error::NotStabilizable(
            "the oracle controller needs a Riccati solution".into(),
        ));
    }

    let mut learner = match &cfg.init {
        WeightInit::Default => LearnerState::new(cfg.sys.m(), cfg.sys.r(), cfg.gains.t_window, dt)?,
        WeightInit::Ideal => {
            let o = oracle.as_ref().expect("checked above");
            LearnerState::with_weights(
                cfg.sys.m(),
                cfg.sys.r(),
                o.wc.clone(),
                o.wa.clone(),
                cfg.gains.t_window,
                dt,
            )?
        }
        WeightInit::Custom { wc, wa } => LearnerState::with_weights(
            cfg.sys.m(),
            cfg.sys.r(),
            wc.clone(),
            wa.clone(),
            cfg.gains.t_window,
            dt,
        )?,
    };
    let gains = if cfg.learning {
        cfg.gains
    } else {
        LearnGains {
            eta_c: 0.0,
            eta_a: 0.0,
            ..cfg.gains
        }
    };

    let signal = ExplorationSignal::new(&cfg.noise, m, cfg.seed);
    let policy = Policy {
        cfg,
        oracle: oracle.as_ref(),
        signal: &signal,
        k_sb: cfg.effective_k_sb(),
    };

    let p = basis_len(n, m);
    let mut records = Vec::with_capacity(steps + 1);
    let mut pe_sum = Matrix::zeros(p, p);
    let mut pe_count = 0usize;
    let mut total_cost = 0.0;
    let mut breach = None;
    let mut x = cfg.x0.clone();

    for k in 0..=steps {
        let t = k as f64 * dt;
        let norm_x = matlib::norm(&x);
        if norm_x > DIVERGENCE_NORM || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence { t, norm: norm_x });
        }
        if norm_x >= cfg.spec.c * (1.0 + BREACH_TOL) {
            breach = Some(Breach { t, norm: norm_x });
            records.push(record(cfg, t, &x, vec![f64::NAN; m], None, &learner));
            break;
        }
        let wa_now = learner.wa.clone();
        let u = policy.apply(&wa_now, t, &x)?;
        let report = learner.step(&gains, t, &x, &u, dt)?;
        if let Some(psi) = &report.psi {
            if signal.is_active(t) {
                let denom = (1.0 + matlib::dot(psi, psi)).powi(2);
                for i in 0..p {
                    for j in 0..p {
                        pe_sum[(i, j)] += psi[i] * psi[j] / denom;
                    }
                }
                pe_count += 1;
            }
        }
        records.push(record(cfg, t, &x, u, report.e_c, &learner));
        if k == steps {
            break;
        }
        let mut law = |tt: f64, y: &[f64]| policy.apply(&wa_now, tt, y);
        match integrate_feedback(&cfg.sys, t, &x, dt, DEFAULT_SUBSTEP_TOL, &mut law) {
            Ok(out) => {
                total_cost += out.cost;
                x = out.x;
            }
            Err(Error::OutsideInterior { norm, .. }) => {
                breach = Some(Breach { t, norm });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let log = TrajectoryLog { n, m, records };
    let pe_level = if pe_count > 0 {
        eig_sym(&pe_sum.scale(1.0 / pe_count as f64).symmetrize())?[0]
    } else {
        f64::NAN
    };
    let metrics = summarize(
        cfg,
        &log,
        total_cost,
        pe_level,
        oracle.as_ref(),
        breach.is_some(),
    );
    Ok(Episode {
        log,
        metrics,
        breach,
    })
}

fn record(
    cfg: &ExperimentConfig,
    t: f64,
    x: &[f64],
    u: Vec<f64>,
    e_c: Option<f64>,
    learner: &LearnerState,
) -> StepRecord {
    let norm_x = matlib::norm(x);
    StepRecord {
        t,
        x: x.to_vec(),
        u,
        norm_x,
        b_s: cfg.spec.b_s(x).unwrap_or(f64::INFINITY),
        e_c,
        margin: cfg.spec.c - norm_x,
        wc: learner.wc.clone(),
        wa: learner.wa.as_slice().to_vec(),
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    log: &TrajectoryLog,
    total_cost: f64,
    pe_level: f64,
    oracle: Option<&RiccatiSolution>,
    breached: bool,
) -> RunMetrics {
    let records = &log.records;
    let peak_control = records
        .iter()
        .filter(|r| r.u.iter().all(|v| v.is_finite()))
        .map(|r| matlib::norm(&r.u))
        .fold(0.0, f64::max);
    let min_margin = records
        .iter()
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    let max_abs_td = records
        .iter()
        .filter_map(|r| r.e_c)
        .map(f64::abs)
        .fold(0.0, f64::max);
    let max_actor_norm = records
        .iter()
        .map(|r| matlib::norm(&r.wa))
        .fold(0.0, f64::max);
    let max_critic_norm = records
        .iter()
        .map(|r| matlib::norm(&r.wc))
        .fold(0.0, f64::max);
    let actor_error = match (oracle, log.final_actor()) {
        (Some(o), Some(wa)) => {
            wa.sub(&o.wa).map_or(f64::NAN, |d| d.frobenius_norm()) / o.wa.frobenius_norm()
        }
        _ => f64::NAN,
    };
    RunMetrics {
        total_cost,
        peak_control,
        min_margin,
        actor_error,
        safety_violated: breached || min_margin < 0.0,
        final_norm: log.last().map_or(f64::NAN, |r| r.norm_x),
        max_abs_td,
        pe_level: if cfg.noise.amplitude > 0.0 {
            pe_level
        } else {
            f64::NAN
        },
        max_actor_norm,
        max_critic_norm,
    }
}

/// One episode per safety gain, everything else held fixed. Rows come back in
/// input order.
pub fn sweep_ksb(cfg: &ExperimentConfig, ksb_values: &[f64]) -> Result<Vec<(f64, RunMetrics)>> {
    if ksb_values.len() < 2 {
        return Err(Error::InvariantViolation(
            "a sweep needs at least two k_sb values".into(),
        ));
    }
    ksb_values
        .par_iter()
        .map(|&k| run_episode(&cfg.with_k_sb(k)).map(|ep| (k, ep.metrics)))
        .collect()
}

/// Runs the configured controller and the unprotected baseline (`k_sb = 0`)
/// under the same exploration signal.
pub fn compare_baseline(cfg: &ExperimentConfig) -> Result<(Episode, Episode)> {
    let mut base = cfg.clone();
    base.baseline = true;
    let (proposed, baseline) = rayon::join(|| run_episode(cfg), || run_episode(&base));
    Ok((proposed?, baseline?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(cfg: ExperimentConfig, t_end: f64) -> ExperimentConfig {
        ExperimentConfig {
            integ: IntegratorConfig::new(1e-3, t_end).unwrap(),
            ..cfg
        }
    }

    #[test]
    fn noise_switches_off() {
        let noise = NoiseSpec::default();
        assert_eq!(exploration_noise(&noise, 1, 3, 10.0), vec![0.0]);
        assert_eq!(exploration_noise(&noise, 1, 3, 12.5), vec![0.0]);
        assert_ne!(exploration_noise(&noise, 1, 3, 1.0), vec![0.0]);
    }

    #[test]
    fn silent_noise_is_zero() {
        assert_eq!(
            exploration_noise(&NoiseSpec::silent(), 2, 3, 1.0),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let noise = NoiseSpec::default();
        assert_eq!(
            exploration_noise(&noise, 1, 42, 0.37),
            exploration_noise(&noise, 1, 42, 0.37)
        );
        assert_ne!(
            exploration_noise(&noise, 1, 42, 0.37),
            exploration_noise(&noise, 1, 43, 0.37)
        );
    }

    #[test]
    fn frequencies_are_log_spaced() {
        let f = NoiseSpec::default().frequencies();
        assert_eq!(f.len(), 10);
        assert!((f[0] - 0.5).abs() < 1e-12 && (f[9] - 50.0).abs() < 1e-9);
        for w in f.windows(3) {
            assert!((w[1] / w[0] - w[2] / w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_episode() {
        let cfg = short(
            ExperimentConfig {
                x0: vec![0.0, 0.0],
                noise: NoiseSpec::silent(),
                ..ExperimentConfig::default()
            },
            1.0,
        );
        let ep = run_episode(&cfg).unwrap();
        assert!(ep.log.records.iter().all(|r| r.x == vec![0.0, 0.0]));
        assert_eq!(ep.metrics.total_cost, 0.0);
        assert_eq!(ep.log.records.len(), 1001);
    }

    #[test]
    fn x0_outside_is_rejected() {
        let cfg = ExperimentConfig {
            x0: vec![1.5, 0.1],
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            run_episode(&cfg),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn sweep_needs_two_values() {
        assert!(sweep_ksb(&ExperimentConfig::default(), &[0.2]).is_err());
    }

    #[test]
    fn weights_frozen_without_learning() {
        let cfg = short(
            ExperimentConfig {
                learning: false,
                ..ExperimentConfig::default()
            },
            0.5,
        );
        let ep = run_episode(&cfg).unwrap();
        let first = &ep.log.records[0];
        assert!(ep
            .log
            .records
            .iter()
            .all(|r| r.wc == first.wc && r.wa == first.wa));
        assert!(ep.log.records[20].e_c.is_some());
        assert!(ep.log.records[5].e_c.is_none());
    }
}
