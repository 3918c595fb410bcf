//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N [PASS|FAIL] ...` line before asserting.
//!
//! The tests hold a shared lock so that the timing criteria measure one
//! computation at a time.

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safeq::barrier::BarrierSpec;
use safeq::harness::{
    run_episode, sweep_ksb, ControllerKind, ExperimentConfig, NoiseSpec, WeightInit,
};
use safeq::matlib::Matrix;
use safeq::qlearn::{basis_phi, unvech, vech_weights};
use safeq::riccati::{is_hurwitz, solve_care, SystemModel};
use safeq::safecontrol::{nu_star, u_star_safe};
use safeq::verify::{run_suite, VerifyOptions};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn verdict(id: u32, title: &str, passed: bool, detail: String) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{tag}] {title}: {detail}");
    assert!(passed, "criterion {id} ({title}) failed: {detail}");
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    loop {
        let x = [
            rng.gen_range(-radius..radius),
            rng.gen_range(-radius..radius),
        ];
        if x[0].hypot(x[1]) <= radius {
            return x;
        }
    }
}

#[test]
fn criterion_01_riccati_oracle() {
    let _g = serial();
    let sys = SystemModel::demo();
    let mut best = Duration::MAX;
    let mut sol = None;
    for _ in 0..5 {
        let start = Instant::now();
        let s = solve_care(&sys).expect("demo system is stabilizable");
        best = best.min(start.elapsed());
        sol = Some(s);
    }
    let sol = sol.unwrap();
    let closed = sys
        .a()
        .add(&sys.b().matmul(&sol.wa.transpose()).unwrap())
        .unwrap();
    let hurwitz = is_hurwitz(&closed);
    let passed =
        sol.residual <= 1e-8 && sol.iterations <= 50 && hurwitz && best < Duration::from_millis(10);
    verdict(
        1,
        "Riccati oracle",
        passed,
        format!(
            "residual {:.2e}, {} iterations, Hurwitz {hurwitz}, {:.3} ms",
            sol.residual,
            sol.iterations,
            best.as_secs_f64() * 1e3
        ),
    );
}

#[test]
fn criterion_02_scalar_closed_form() {
    let _g = serial();
    let one = || Matrix::from_rows(&[[1.0]]);
    let sys = SystemModel::new(Matrix::from_rows(&[[-1.0]]), one(), one(), one()).unwrap();
    let p = solve_care(&sys).unwrap().p[(0, 0)];
    let err = (p - (2f64.sqrt() - 1.0)).abs();
    verdict(
        2,
        "scalar closed form",
        err <= 1e-12,
        format!("P = {p}, |P - (sqrt2 - 1)| = {err:.2e}"),
    );
}

#[test]
fn criterion_03_parameterization_identity() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for trial in 0..1000 {
        let (n, m) = [(2, 1), (1, 1), (2, 2), (3, 1)][trial % 4];
        let dim = n + m;
        let mut q = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = rng.gen_range(-2.0..2.0);
                q[i * dim + j] = v;
                q[j * dim + i] = v;
            }
        }
        let qbar = Matrix::new(dim, dim, q.clone()).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = vech_weights(&qbar).unwrap();
        let lhs: f64 = w.iter().zip(basis_phi(&x)).map(|(a, b)| a * b).sum();
        let mut rhs = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                rhs += 0.5 * x[i] * q[i * dim + j] * x[j];
            }
        }
        worst = worst.max((lhs - rhs).abs());
        exact &= unvech(&w, n, m).unwrap() == qbar;
    }
    verdict(
        3,
        "parameterization identity",
        worst <= 1e-12 && exact,
        format!("max |W_c'phi - X'QX/2| = {worst:.2e}, roundtrip exact {exact}"),
    );
}

#[test]
fn criterion_04_barrier_gradient() {
    let _g = serial();
    let spec = BarrierSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = uniform_in_disc(&mut rng, 0.95 * spec.c);
        let g = spec.grad_b_s(&x).unwrap();
        let mut gap = [0.0; 2];
        for i in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            let fd = (spec.b_s(&xp).unwrap() - spec.b_s(&xm).unwrap()) / (2.0 * h);
            gap[i] = g[i] - fd;
        }
        worst = worst.max(gap[0].hypot(gap[1]) / g[0].hypot(g[1]));
    }
    verdict(
        4,
        "barrier gradient",
        worst <= 1e-5,
        format!("max relative error {worst:.2e} at 100 points"),
    );
}

#[test]
fn criterion_05_td_fixed_point() {
    let _g = serial();
    let cfg = ExperimentConfig {
        noise: NoiseSpec::silent(),
        controller: ControllerKind::OracleUnconstrained,
        init: WeightInit::Ideal,
        ..Default::default()
    };
    let ep = run_episode(&cfg).unwrap();
    let td = ep.metrics.max_abs_td;
    let warm = ep.log.records.iter().filter(|r| r.e_c.is_some()).count();
    verdict(
        5,
        "TD fixed point",
        td <= 1e-6 && warm > 19_000,
        format!(
            "max |e_c| = {td:.3e} over {warm} warm steps of {:.0} s",
            cfg.integ.t_end
        ),
    );
}

/// Minimizes `(u − u₀)ᵀR(u − u₀)` over the half-space `aᵀu ≤ b` for the
/// single-input demo plant, written out by hand.
fn halfspace_projection(x: [f64; 2], p: &Matrix) -> (f64, bool) {
    let (a, r, c, gamma0) = ([[0.0, 1.0], [1.6, 2.8]], 0.1, 1.5, 1.0);
    let s = x[0] * x[0] + x[1] * x[1];
    let c2 = c * c;
    let barrier = (s / (c2 - s)).powi(2);
    let scale = 4.0 * c2 * s / (c2 - s).powi(3);
    let grad = [scale * x[0], scale * x[1]];
    // B = [0; 1]
    let u0 = -(p[(1, 0)] * x[0] + p[(1, 1)] * x[1]) / r;
    let ax = [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ];
    let row = grad[1];
    let bound = gamma0 / barrier - (grad[0] * ax[0] + grad[1] * ax[1]);
    let excess = row * u0 - bound;
    if excess <= 0.0 || row == 0.0 {
        (u0, false)
    } else {
        (u0 - excess * row / r / (row * row / r), true)
    }
}

#[test]
fn criterion_06_kkt_correctness() {
    let _g = serial();
    let sys = SystemModel::demo();
    let spec = BarrierSpec::default();
    let p = solve_care(&sys).unwrap().p;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_u, mut worst_slack): (f64, f64) = (0.0, 0.0);
    let (mut active, mut invasive, mut checked) = (0, 0, 0);
    while checked < 10_000 {
        let x = uniform_in_disc(&mut rng, spec.c - 0.05);
        if x[0].hypot(x[1]) < 1e-3 {
            // barrier and its gradient vanish; both sides return u₀ there
            continue;
        }
        checked += 1;
        let (expected, binding) = halfspace_projection(x, &p);
        let u = u_star_safe(&sys, &spec, &p, &x).unwrap()[0];
        let kkt = nu_star(&sys, &spec, &p, &x).unwrap();
        worst_u = worst_u.max((u - expected).abs());
        let residual = spec.constraint_residual(&sys, &x, &[u]).unwrap();
        worst_slack = worst_slack.max((kkt.nu_star * residual).abs());
        if binding {
            active += 1;
        } else if kkt.nu_star != 0.0 {
            invasive += 1;
        }
    }
    verdict(
        6,
        "KKT correctness",
        worst_u <= 1e-9 && worst_slack <= 1e-9 && invasive == 0,
        format!(
            "max |u* - projection| {worst_u:.2e}, max |nu* residual| {worst_slack:.2e}, \
             nu* != 0 at {invasive} feasible states, {active} of {checked} states active"
        ),
    );
}

#[test]
fn criterion_07_safety_over_seeds() {
    let _g = serial();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for seed in 0..20 {
        let m = run_episode(&ExperimentConfig {
            seed,
            ..Default::default()
        })
        .unwrap()
        .metrics;
        worst = worst.min(m.min_margin);
        violations += m.safety_violated as usize;
    }
    verdict(
        7,
        "safety over 20 seeds",
        worst >= 0.0 && violations == 0,
        format!("min margin {worst:.4}, {violations} violations"),
    );
}

#[test]
fn criterion_08_regulation() {
    let _g = serial();
    let m = run_episode(&ExperimentConfig::default()).unwrap().metrics;
    verdict(
        8,
        "regulation",
        m.final_norm <= 0.05,
        format!("|x(20 s)| = {:.3e}", m.final_norm),
    );
}

#[test]
fn criterion_09_actor_convergence() {
    let _g = serial();
    let m = run_episode(&ExperimentConfig::default()).unwrap().metrics;
    verdict(
        9,
        "actor convergence",
        m.actor_error <= 0.25,
        format!("|W_a(20 s) - W_a|/|W_a| = {:.3}", m.actor_error),
    );
}

#[test]
fn criterion_10_table_trends() {
    let _g = serial();
    let ksb = [0.01, 0.1, 0.2, 0.3, 0.5];
    let rows = sweep_ksb(&ExperimentConfig::default(), &ksb).unwrap();
    let cost: Vec<f64> = rows.iter().map(|r| r.1.total_cost).collect();
    let peak: Vec<f64> = rows.iter().map(|r| r.1.peak_control).collect();
    let margin: Vec<f64> = rows.iter().map(|r| r.1.min_margin).collect();
    let cost_ok = cost.windows(2).all(|w| w[1] <= w[0] * 1.02);
    let peak_ok = peak[2..].windows(2).all(|w| w[1] >= w[0]);
    let margin_ok = margin.windows(2).all(|w| w[1] >= w[0]);
    let violations = rows.iter().filter(|r| r.1.safety_violated).count();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    verdict(
        10,
        "safety-gain sweep trends",
        cost_ok && peak_ok && margin_ok && violations == 0,
        format!(
            "cost non-increasing {cost_ok} [{}], peak non-decreasing on 0.2..0.5 {peak_ok} [{}], \
             margin non-decreasing {margin_ok} [{}], {violations} violations",
            fmt(&cost),
            fmt(&peak),
            fmt(&margin)
        ),
    );
}

#[test]
fn criterion_11_oracle_forward_invariance() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    let mut breaches = 0;
    for _ in 0..100 {
        let x0 = uniform_in_disc(&mut rng, 1.4);
        let cfg = ExperimentConfig {
            x0: x0.to_vec(),
            noise: NoiseSpec::silent(),
            controller: ControllerKind::OracleSafe,
            learning: false,
            ..Default::default()
        };
        let ep = run_episode(&cfg).unwrap();
        worst = worst.min(ep.metrics.min_margin);
        breaches += ep.breach.is_some() as usize;
    }
    verdict(
        11,
        "forward invariance under the oracle",
        worst >= 0.0 && breaches == 0,
        format!("100 starts, min margin {worst:.4}, {breaches} breaches"),
    );
}

#[test]
fn criterion_12_verify_runtime() {
    let _g = serial();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let report = pool
        .install(|| run_suite(&ExperimentConfig::default(), VerifyOptions::default()))
        .unwrap();
    let elapsed = start.elapsed();
    for failed in report.failures() {
        println!("    verify: {failed}");
    }
    verdict(
        12,
        "verify runtime",
        elapsed < Duration::from_secs(60),
        format!(
            "{} properties in {:.1} s on one thread",
            report.results.len(),
            elapsed.as_secs_f64()
        ),
    );
}
