//! Property suite run by `safeq verify`.
//!
//! Each property draws its own samples from a fixed-seed generator, so the
//! suite is deterministic. A property that returns an error counts as failed.

use std::cell::OnceCell;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::{
    run_episode, ControllerKind, Episode, ExperimentConfig, NoiseSpec, WeightInit,
};
use crate::matlib::{self, eig_sym, kron, solve_linear, Matrix};
use crate::plant::{rk4_step, rk4_step_feedback};
use crate::qlearn::{basis_phi, unvech, vech_weights};
use crate::riccati::{
    care_residual, is_hurwitz, q_kernel, solve_care, SystemModel, ARE_RESIDUAL_TOL,
};
use crate::safecontrol::{nu_star, u_hat_safe, u_star_safe, unconstrained_optimum};

/// Safety-gain grid of the sweep property.
pub const SWEEP_KSB: [f64; 5] = [0.01, 0.1, 0.2, 0.3, 0.5];
const SUITE_SEED: u64 = 0x5afe_0001;
const SAFETY_SEEDS: u64 = 20;
const INVARIANCE_STARTS: usize = 100;
const KKT_SAMPLES: usize = 2000;

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds `1e-6` to `P₁₁` before the ARE residual check.
    PerturbedRiccati,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}/{}: {}", self.module, self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub results: Vec<PropertyResult>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} properties, {} failed, {:.2} s",
            self.results.len(),
            failed,
            self.elapsed.as_secs_f64()
        )
    }
}

type Check = fn(&Ctx) -> Result<(bool, String)>;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    opts: VerifyOptions,
    default_run: Episode,
    seed_runs: OnceCell<Vec<Episode>>,
}

impl Ctx<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(SUITE_SEED ^ salt)
    }
}

const CHECKS: &[(&str, &str, Check)] = &[
    ("matlib", "solve_residual", solve_residual),
    ("matlib", "kron_vec_identity", kron_vec_identity),
    ("matlib", "jacobi_vs_char_poly", jacobi_vs_char_poly),
    ("riccati", "are_residual", are_residual),
    ("riccati", "random_are_residuals", random_are_residuals),
    ("riccati", "ideal_fixed_point", ideal_fixed_point),
    ("plant", "rk4_convergence_order", rk4_convergence_order),
    ("plant", "rk4_linearity", rk4_linearity),
    ("barrier", "reciprocal_blow_up", reciprocal_blow_up),
    (
        "barrier",
        "gradient_vs_finite_differences",
        gradient_vs_finite_differences,
    ),
    ("barrier", "h_bs_consistency", h_bs_consistency),
    (
        "qlearn",
        "parameterization_identity",
        parameterization_identity,
    ),
    ("qlearn", "vech_roundtrip", vech_roundtrip),
    ("qlearn", "actor_projection", actor_projection),
    (
        "qlearn",
        "normalized_regressor_bound",
        normalized_regressor_bound,
    ),
    (
        "qlearn",
        "persistence_of_excitation",
        persistence_of_excitation,
    ),
    ("qlearn", "td_fixed_point", td_fixed_point),
    ("safecontrol", "minimal_invasiveness", minimal_invasiveness),
    (
        "safecontrol",
        "kkt_feasibility_and_slackness",
        kkt_feasibility_and_slackness,
    ),
    (
        "safecontrol",
        "certainty_equivalence_gap",
        certainty_equivalence_gap,
    ),
    (
        "safecontrol",
        "oracle_forward_invariance",
        oracle_forward_invariance,
    ),
    ("harness", "determinism", determinism),
    ("harness", "safety_over_seeds", safety_over_seeds),
    ("harness", "boundedness", boundedness),
    ("harness", "regulation", regulation),
    (
        "harness",
        "conservativeness_ordering",
        conservativeness_ordering,
    ),
];

/// Runs every property against `cfg` (normally the default scenario).
pub fn run_suite(cfg: &ExperimentConfig, opts: VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let ctx = Ctx {
        cfg,
        opts,
        default_run: run_episode(cfg)?,
        seed_runs: OnceCell::new(),
    };
    let results = CHECKS
        .iter()
        .map(|&(module, name, check)| {
            let (passed, detail) = match check(&ctx) {
                Ok(outcome) => outcome,
                Err(e) => (false, format!("error: {e}")),
            };
            PropertyResult {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect();
    Ok(VerifyReport {
        results,
        elapsed: start.elapsed(),
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Matrix::new(rows, cols, data).expect("finite entries")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Uniform sample from the ball of radius `r` (rejection).
fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let x = random_vec(rng, n, r);
        if matlib::norm(&x) <= r {
            return x;
        }
    }
}

fn solve_residual(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(1);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 1000 {
        let n = rng.gen_range(1..=6);
        let a = random_matrix(&mut rng, n, n, 1.0);
        let inv = match a.inverse() {
            Ok(inv) => inv,
            Err(_) => continue,
        };
        if a.frobenius_norm() * inv.frobenius_norm() >= 1e6 {
            continue;
        }
        let b = random_vec(&mut rng, n, 10.0);
        let x = solve_linear(&a, &b)?;
        let ax = a.mul_vec(&x)?;
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        worst = worst.max(matlib::norm(&r) / (1.0 + matlib::norm(&b)));
        tested += 1;
    }
    Ok((
        worst <= 1e-10,
        format!("max |Ax-b|/(1+|b|) = {worst:.2e} over {tested} systems"),
    ))
}

fn kron_vec_identity(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(2);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let a = random_matrix(&mut rng, n, n, 2.0);
        let b = random_matrix(&mut rng, n, n, 2.0);
        let x = random_matrix(&mut rng, n, n, 2.0);
        let lhs = a.matmul(&x)?.matmul(&b.transpose())?.vec();
        let rhs = kron(&b, &a).mul_vec(&x.vec())?;
        for (l, r) in lhs.iter().zip(&rhs) {
            worst = worst.max((l - r).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max componentwise gap {worst:.2e}")))
}

fn jacobi_vs_char_poly(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, d) = (
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        let s = Matrix::from_rows(&[[a, b], [b, d]]);
        let eig = eig_sym(&s)?;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        worst = worst
            .max((eig[0] - (mean - radius)).abs())
            .max((eig[1] - (mean + radius)).abs());
    }
    Ok((worst <= 1e-9, format!("max root gap {worst:.2e}")))
}

fn are_residual(ctx: &Ctx) -> Result<(bool, String)> {
    let sys = &ctx.cfg.sys;
    let sol = solve_care(sys)?;
    let mut p = sol.p.clone();
    if ctx.opts.fault == Some(Fault::PerturbedRiccati) {
        let mut data = p.as_slice().to_vec();
        data[0] += 1e-6;
        p = Matrix::new(p.rows(), p.cols(), data)?;
    }
    let residual = care_residual(sys, &p)?;
    let pd = matlib::is_positive_definite(&p, 0.0)?;
    let closed = sys.a().add(&sys.b().matmul(&sol.wa.transpose())?)?;
    let hurwitz = is_hurwitz(&closed);
    Ok((
        residual <= ARE_RESIDUAL_TOL && pd && hurwitz,
        format!(
            "residual {residual:.2e}, P positive definite: {pd}, closed loop Hurwitz: {hurwitz}, {} iterations",
            sol.iterations
        ),
    ))
}

/// Random system whose `A` is shifted left by its Frobenius norm, hence
/// Hurwitz, so every draw is stabilizable.
fn random_system(rng: &mut ChaCha8Rng) -> Result<SystemModel> {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let g = random_matrix(rng, n, n, 2.0);
    let shift = g.frobenius_norm() + rng.gen_range(0.05..1.0);
    let a = g.sub(&Matrix::identity(n).scale(shift))?;
    let b = random_matrix(rng, n, m, 1.0);
    let l = random_matrix(rng, n, n, 0.5);
    let weight = l.matmul(&l.transpose())?.add(&Matrix::identity(n))?;
    let r = Matrix::from_diag(
        &random_vec(rng, m, 1.0)
            .iter()
            .map(|v| 0.1 + v.abs())
            .collect::<Vec<_>>(),
    );
    SystemModel::new(a, b, weight, r)
}

fn random_are_residuals(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(4);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    let mut failures = 0;
    while tested < 100 {
        let sys = match random_system(&mut rng) {
            Ok(sys) => sys,
            Err(_) => continue,
        };
        tested += 1;
        match solve_care(&sys) {
            Ok(sol) => {
                let closed = sys.a().add(&sys.b().matmul(&sol.wa.transpose())?)?;
                if !is_hurwitz(&closed) || !matlib::is_positive_definite(&sol.p, 0.0)? {
                    failures += 1;
                }
                worst = worst.max(sol.residual);
            }
            Err(_) => failures += 1,
        }
    }
    Ok((
        failures == 0 && worst <= ARE_RESIDUAL_TOL,
        format!("{tested} systems, worst residual {worst:.2e}, {failures} failures"),
    ))
}

fn ideal_fixed_point(ctx: &Ctx) -> Result<(bool, String)> {
    let sys = SystemModel::demo();
    let sol = solve_care(&sys)?;
    let qbar = q_kernel(&sys, &sol.p)?;
    let mut rng = ctx.rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_vec(&mut rng, 2, 1.0);
        let u = sol.wa.tr_mul_vec(&x)?;
        let big: Vec<f64> = x.iter().chain(&u).copied().collect();
        let q = 0.5 * matlib::dot(&big, &qbar.mul_vec(&big)?);
        let v = 0.5 * matlib::dot(&x, &sol.p.mul_vec(&x)?);
        worst = worst.max((q - v).abs());
    }
    Ok((
        worst <= 1e-9,
        format!("max |Q(x, W_a'x) - V(x)| = {worst:.2e}"),
    ))
}

fn rk4_convergence_order(ctx: &Ctx) -> Result<(bool, String)> {
    let sys = &ctx.cfg.sys;
    let sol = solve_care(sys)?;
    let t_end = 2.0;
    let run = |dt: f64| -> Result<Vec<f64>> {
        let mut law = |_: f64, y: &[f64]| unconstrained_optimum(sys, &sol.p, y);
        let steps = (t_end / dt).round() as usize;
        let mut x = ctx.cfg.x0.clone();
        for k in 0..steps {
            x = rk4_step_feedback(sys, k as f64 * dt, &x, dt, &mut law)?.0;
        }
        Ok(x)
    };
    let (x1, x2, x4) = (run(0.04)?, run(0.02)?, run(0.01)?);
    let d12: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
    let d24: Vec<f64> = x2.iter().zip(&x4).map(|(a, b)| a - b).collect();
    let ratio = matlib::norm(&d12) / matlib::norm(&d24);
    Ok((
        (12.0..=20.0).contains(&ratio),
        format!("step-halving error ratio {ratio:.3}"),
    ))
}

fn rk4_linearity(ctx: &Ctx) -> Result<(bool, String)> {
    let sys = &ctx.cfg.sys;
    let (n, m) = (sys.n(), sys.m_inputs());
    let mut rng = ctx.rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (x1, x2) = (random_vec(&mut rng, n, 1.0), random_vec(&mut rng, n, 1.0));
        let (u1, u2) = (random_vec(&mut rng, m, 1.0), random_vec(&mut rng, m, 1.0));
        let sum =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + q).collect() };
        let dt = rng.gen_range(1e-4..1e-2);
        let joint = rk4_step(sys, &sum(&x1, &x2), &sum(&u1, &u2), dt)?;
        let split = sum(&rk4_step(sys, &x1, &u1, dt)?, &rk4_step(sys, &x2, &u2, dt)?);
        for (a, b) in joint.iter().zip(&split) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max superposition gap {worst:.2e}")))
}

fn reciprocal_blow_up(ctx: &Ctx) -> Result<(bool, String)> {
    let spec = &ctx.cfg.spec;
    let n = ctx.cfg.sys.n();
    let mut rng = ctx.rng(7);
    let mut monotone = true;
    let mut smallest_edge = f64::INFINITY;
    for _ in 0..50 {
        let dir = random_vec(&mut rng, n, 1.0);
        let unit: Vec<f64> = dir.iter().map(|v| v / matlib::norm(&dir)).collect();
        let mut prev = -1.0;
        for k in 1..=200 {
            let radius = spec.c * (1.0 - 1e-4) * k as f64 / 200.0;
            let b = spec.b_s(&unit.iter().map(|v| v * radius).collect::<Vec<_>>())?;
            if b <= prev {
                monotone = false;
            }
            prev = b;
        }
        smallest_edge = smallest_edge.min(prev);
    }
    Ok((
        monotone && smallest_edge > 1e6,
        format!("monotone along 50 rays: {monotone}, B_s at 0.9999c >= {smallest_edge:.3e}"),
    ))
}

fn gradient_vs_finite_differences(ctx: &Ctx) -> Result<(bool, String)> {
    let spec = &ctx.cfg.spec;
    let n = ctx.cfg.sys.n();
    let mut rng = ctx.rng(8);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_in_ball(&mut rng, n, 0.95 * spec.c);
        let grad = spec.grad_b_s(&x)?;
        let mut fd = vec![0.0; n];
        for i in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (spec.b_s(&xp)? - spec.b_s(&xm)?) / (2.0 * h);
        }
        let gap: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(matlib::norm(&gap) / matlib::norm(&grad));
    }
    Ok((
        worst <= 1e-5,
        format!("max relative error {worst:.2e} at 100 points"),
    ))
}

fn h_bs_consistency(ctx: &Ctx) -> Result<(bool, String)> {
    let spec = &ctx.cfg.spec;
    let n = ctx.cfg.sys.n();
    let mut rng = ctx.rng(9);
    let mut bad = 0;
    for _ in 0..5000 {
        let x = random_vec(&mut rng, n, 1.5 * spec.c);
        let interior = spec.is_interior(&x);
        let positive_h = spec.h(&x) > 0.0;
        let finite_bs = spec.b_s(&x).map(f64::is_finite).unwrap_or(false);
        if interior != positive_h || interior != finite_bs {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} inconsistent samples out of 5000")))
}

fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    random_matrix(rng, dim, dim, 1.0).symmetrize()
}

fn parameterization_identity(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(10);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let (n, m) = [(2, 1), (1, 1), (3, 2)][trial % 3];
        let q = random_symmetric(&mut rng, n + m);
        let big = random_vec(&mut rng, n + m, 1.0);
        let w = vech_weights(&q)?;
        let lhs = matlib::dot(&w, &basis_phi(&big));
        let rhs = 0.5 * matlib::dot(&big, &q.mul_vec(&big)?);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((
        worst <= 1e-12,
        format!("max |W_c'phi(X) - X'QX/2| = {worst:.2e}"),
    ))
}

fn vech_roundtrip(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(11);
    let mut mismatches = 0;
    for trial in 0..1000 {
        let (n, m) = [(2, 1), (1, 1), (3, 2)][trial % 3];
        let q = random_symmetric(&mut rng, n + m);
        if unvech(&vech_weights(&q)?, n, m)? != q {
            mismatches += 1;
        }
    }
    Ok((
        mismatches == 0,
        format!("{mismatches} inexact roundtrips out of 1000"),
    ))
}

fn actor_projection(ctx: &Ctx) -> Result<(bool, String)> {
    let bound = ctx.cfg.gains.wa_bound;
    let largest = ctx
        .default_run
        .log
        .records
        .iter()
        .map(|r| matlib::norm(&r.wa))
        .fold(0.0, f64::max);
    Ok((
        largest <= bound,
        format!("max |W_a| = {largest} (bound {bound})"),
    ))
}

fn normalized_regressor_bound(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..5000 {
        let scale = 10f64.powf(rng.gen_range(-6.0..6.0));
        let psi = random_vec(&mut rng, 6, scale);
        let nn = matlib::dot(&psi, &psi);
        worst = worst.max(nn.sqrt() / (1.0 + nn));
    }
    Ok((worst <= 0.5, format!("max |psi|/(1+|psi|^2) = {worst:.6}")))
}

fn persistence_of_excitation(ctx: &Ctx) -> Result<(bool, String)> {
    let level = ctx.default_run.metrics.pe_level;
    if ctx.cfg.noise.amplitude == 0.0 {
        return Ok((
            true,
            "exploration disabled in this configuration; not monitored".into(),
        ));
    }
    Ok((
        level > 0.0,
        format!("min eigenvalue of averaged normalized regressor {level:.3e}"),
    ))
}

fn td_fixed_point(ctx: &Ctx) -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        noise: NoiseSpec::silent(),
        controller: ControllerKind::OracleUnconstrained,
        init: WeightInit::Ideal,
        learning: false,
        ..ctx.cfg.clone()
    };
    let ep = run_episode(&cfg)?;
    let td = ep.metrics.max_abs_td;
    Ok((
        td <= 1e-6,
        format!("max |e_c| = {td:.3e} with ideal weights"),
    ))
}

fn random_interior_states(ctx: &Ctx, salt: u64, count: usize) -> Vec<Vec<f64>> {
    let spec = &ctx.cfg.spec;
    let mut rng = ctx.rng(salt);
    (0..count)
        .map(|_| random_in_ball(&mut rng, ctx.cfg.sys.n(), spec.c - 0.05))
        .collect()
}

fn minimal_invasiveness(ctx: &Ctx) -> Result<(bool, String)> {
    let (sys, spec) = (&ctx.cfg.sys, &ctx.cfg.spec);
    let p = solve_care(sys)?.p;
    let (mut feasible, mut bad) = (0, 0);
    for x in random_interior_states(ctx, 13, KKT_SAMPLES) {
        let free = unconstrained_optimum(sys, &p, &x)?;
        if spec.constraint_residual(sys, &x, &free)? <= 0.0 {
            feasible += 1;
            if u_star_safe(sys, spec, &p, &x)? != free || nu_star(sys, spec, &p, &x)?.nu_star != 0.0
            {
                bad += 1;
            }
        }
    }
    Ok((
        bad == 0,
        format!("{bad} modified out of {feasible} feasible states"),
    ))
}

fn kkt_feasibility_and_slackness(ctx: &Ctx) -> Result<(bool, String)> {
    let (sys, spec) = (&ctx.cfg.sys, &ctx.cfg.spec);
    let p = solve_care(sys)?.p;
    let (mut worst_res, mut worst_slack): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    let mut active = 0;
    for x in random_interior_states(ctx, 14, KKT_SAMPLES) {
        let kkt = nu_star(sys, spec, &p, &x)?;
        if kkt.r_b <= crate::safecontrol::DEGENERATE_RB {
            continue;
        }
        let u = u_star_safe(sys, spec, &p, &x)?;
        let residual = spec.constraint_residual(sys, &x, &u)?;
        worst_res = worst_res.max(residual);
        if kkt.active {
            active += 1;
        }
        worst_slack = worst_slack.max((kkt.nu_star * residual).abs());
    }
    Ok((
        worst_res <= 1e-9 && worst_slack <= 1e-9,
        format!("max residual {worst_res:.2e}, max |nu*residual| {worst_slack:.2e}, {active} active states"),
    ))
}

fn certainty_equivalence_gap(ctx: &Ctx) -> Result<(bool, String)> {
    let (sys, spec) = (&ctx.cfg.sys, &ctx.cfg.spec);
    let k_sb = ctx.cfg.gains.k_sb;
    let sol = solve_care(sys)?;
    let mut worst: f64 = 0.0;
    let mut inactive = 0;
    for x in random_interior_states(ctx, 15, KKT_SAMPLES) {
        if nu_star(sys, spec, &sol.p, &x)?.active {
            continue;
        }
        inactive += 1;
        let learned = u_hat_safe(&sol.wa, k_sb, sys, spec, &x)?;
        let oracle = u_star_safe(sys, spec, &sol.p, &x)?;
        let push = sys
            .r_inv()
            .mul_vec(&sys.b().tr_mul_vec(&spec.grad_b_s(&x)?)?)?;
        for i in 0..learned.len() {
            let expected = -k_sb * push[i];
            let gap = (learned[i] - oracle[i] - expected).abs()
                / (1.0 + oracle[i].abs() + expected.abs());
            worst = worst.max(gap);
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max relative gap {worst:.2e} over {inactive} inactive states"),
    ))
}

fn oracle_forward_invariance(ctx: &Ctx) -> Result<(bool, String)> {
    let spec = ctx.cfg.spec;
    let mut rng = ctx.rng(16);
    let radius = (spec.c - 0.1).min(1.4 * spec.c / 1.5);
    let mut worst = f64::INFINITY;
    let mut breaches = 0;
    for _ in 0..INVARIANCE_STARTS {
        let cfg = ExperimentConfig {
            x0: random_in_ball(&mut rng, ctx.cfg.sys.n(), radius),
            noise: NoiseSpec::silent(),
            controller: ControllerKind::OracleSafe,
            learning: false,
            ..ctx.cfg.clone()
        };
        let ep = run_episode(&cfg)?;
        if ep.metrics.safety_violated {
            breaches += 1;
        }
        worst = worst.min(ep.metrics.min_margin);
    }
    Ok((
        breaches == 0 && worst >= 0.0,
        format!("{INVARIANCE_STARTS} starts with |x0| <= {radius}, min margin {worst:.4}, {breaches} breaches"),
    ))
}

fn determinism(ctx: &Ctx) -> Result<(bool, String)> {
    let again = run_episode(ctx.cfg)?;
    let same = bitwise_equal(&again, &ctx.default_run);
    Ok((same, format!("repeat run bit-identical: {same}")))
}

fn bitwise_equal(a: &Episode, b: &Episode) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    a.log.records.len() == b.log.records.len()
        && a.log.records.iter().zip(&b.log.records).all(|(p, q)| {
            p.t.to_bits() == q.t.to_bits()
                && bits(&p.x) == bits(&q.x)
                && bits(&p.u) == bits(&q.u)
                && bits(&p.wc) == bits(&q.wc)
                && bits(&p.wa) == bits(&q.wa)
                && p.e_c.map(f64::to_bits) == q.e_c.map(f64::to_bits)
        })
}

/// The scenario under seeds `0..20`, computed once for the properties that
/// share it.
fn seed_runs<'c>(ctx: &'c Ctx) -> Result<&'c [Episode]> {
    if let Some(runs) = ctx.seed_runs.get() {
        return Ok(runs);
    }
    let runs = (0..SAFETY_SEEDS)
        .map(|seed| {
            if seed == ctx.cfg.seed {
                Ok(ctx.default_run.clone())
            } else {
                run_episode(&ExperimentConfig {
                    seed,
                    ..ctx.cfg.clone()
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ctx.seed_runs.get_or_init(|| runs))
}

fn safety_over_seeds(ctx: &Ctx) -> Result<(bool, String)> {
    let runs = seed_runs(ctx)?;
    let violated = runs.iter().filter(|ep| ep.metrics.safety_violated).count();
    let worst = runs
        .iter()
        .map(|ep| ep.metrics.min_margin)
        .fold(f64::INFINITY, f64::min);
    Ok((
        violated == 0 && worst >= 0.0,
        format!("{SAFETY_SEEDS} seeds, min margin {worst:.4}, {violated} violations"),
    ))
}

fn boundedness(ctx: &Ctx) -> Result<(bool, String)> {
    let bound = ctx.cfg.gains.wa_bound;
    let runs = seed_runs(ctx)?;
    let mut finite = true;
    let mut actor: f64 = 0.0;
    let mut critic: f64 = 0.0;
    let mut state: f64 = 0.0;
    for ep in runs {
        for r in &ep.log.records {
            finite &= r.x.iter().chain(&r.wc).chain(&r.wa).all(|v| v.is_finite());
            state = state.max(r.norm_x);
        }
        actor = actor.max(ep.metrics.max_actor_norm);
        critic = critic.max(ep.metrics.max_critic_norm);
    }
    Ok((
        finite && actor <= bound,
        format!("{SAFETY_SEEDS} seeds, finite: {finite}, max |x| {state:.4}, max |W_c| {critic:.4}, max |W_a| {actor} (bound {bound})"),
    ))
}

fn regulation(ctx: &Ctx) -> Result<(bool, String)> {
    let fin = ctx.default_run.metrics.final_norm;
    Ok((fin <= 0.05, format!("|x(t_end)| = {fin:.3e}")))
}

fn conservativeness_ordering(ctx: &Ctx) -> Result<(bool, String)> {
    let runs: Vec<Episode> = SWEEP_KSB
        .iter()
        .map(|&k| run_episode(&ctx.cfg.with_k_sb(k)))
        .collect::<Result<_>>()?;
    let mut ok = true;
    let mut margins = Vec::new();
    for pair in runs.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let slack = sample_slack(lo).max(sample_slack(hi));
        ok &= hi.metrics.min_margin >= lo.metrics.min_margin - slack;
    }
    for ep in &runs {
        ok &= !ep.metrics.safety_violated;
        margins.push(format!("{:.4}", ep.metrics.min_margin));
    }
    Ok((
        ok,
        format!(
            "min margins over k_sb {SWEEP_KSB:?}: [{}]",
            margins.join(", ")
        ),
    ))
}

/// How far the sampled minimum margin can move within one grid step.
fn sample_slack(ep: &Episode) -> f64 {
    let recs = &ep.log.records;
    let (k, _) = recs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.margin.total_cmp(&b.1.margin))
        .expect("non-empty log");
    let prev = if k > 0 {
        (recs[k].margin - recs[k - 1].margin).abs()
    } else {
        0.0
    };
    let next = recs
        .get(k + 1)
        .map_or(0.0, |r| (r.margin - recs[k].margin).abs());
    prev.max(next)
}
