//! Flat `key = value` experiment files.
//!
//! ```text
//! # lines starting with '#' are comments
//! A = 2x2: 0, 1, 1.6, 2.8
//! B = 2x1: 0, 1
//! k_sb = 0.3
//! x0 = 1, 1
//! seed = 7
//! ```
//!
//! Matrices are row-major with explicit `rows x cols` dimensions. Missing keys
//! keep the values of [`ExperimentConfig::default`].

use std::fmt::Write as _;
use std::path::Path;

use crate::barrier::BarrierSpec;
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::matlib::Matrix;
use crate::riccati::SystemModel;

/// Every key the parser accepts.
pub const KEYS: [&str; 21] = [
    "A",
    "B",
    "M",
    "R",
    "c",
    "gamma0",
    "eta_a",
    "eta_c",
    "k_sb",
    "T",
    "Wa_bound",
    "dt",
    "t_end",
    "x0",
    "noise_amplitude",
    "noise_tones",
    "noise_freq_lo",
    "noise_freq_hi",
    "noise_t_off",
    "seed",
    "baseline",
];

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let (mut a, mut b, mut m, mut r) = (
        cfg.sys.a().clone(),
        cfg.sys.b().clone(),
        cfg.sys.m().clone(),
        cfg.sys.r().clone(),
    );
    let (mut c, mut gamma0) = (cfg.spec.c, cfg.spec.gamma0);
    let mut seen: Vec<&str> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        };
        if seen.contains(&key) {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
        seen.push(key);

        match key {
            "A" => a = matrix(line, value)?,
            "B" => b = matrix(line, value)?,
            "M" => m = matrix(line, value)?,
            "R" => r = matrix(line, value)?,
            "c" => c = real(line, value)?,
            "gamma0" => gamma0 = real(line, value)?,
            "eta_a" => cfg.gains.eta_a = real(line, value)?,
            "eta_c" => cfg.gains.eta_c = real(line, value)?,
            "k_sb" => cfg.gains.k_sb = real(line, value)?,
            "T" => cfg.gains.t_window = real(line, value)?,
            "Wa_bound" => cfg.gains.wa_bound = real(line, value)?,
            "dt" => cfg.integ.dt = real(line, value)?,
            "t_end" => cfg.integ.t_end = real(line, value)?,
            "x0" => cfg.x0 = list(line, value)?,
            "noise_amplitude" => cfg.noise.amplitude = real(line, value)?,
            "noise_tones" => cfg.noise.num_tones = integer(line, value)? as usize,
            "noise_freq_lo" => cfg.noise.freq_lo = real(line, value)?,
            "noise_freq_hi" => cfg.noise.freq_hi = real(line, value)?,
            "noise_t_off" => cfg.noise.t_off = real(line, value)?,
            "seed" => cfg.seed = integer(line, value)?,
            "baseline" => {
                cfg.baseline = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("expected true/false, got `{value}`"),
                        ))
                    }
                }
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }

    cfg.sys = SystemModel::new(a, b, m, r)?;
    cfg.spec = BarrierSpec::new(c, gamma0)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Inverse of [`parse_config_str`] for the keys it understands.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    for (key, mat) in [
        ("A", cfg.sys.a()),
        ("B", cfg.sys.b()),
        ("M", cfg.sys.m()),
        ("R", cfg.sys.r()),
    ] {
        let _ = writeln!(
            out,
            "{key} = {}x{}: {}",
            mat.rows(),
            mat.cols(),
            join(mat.as_slice())
        );
    }
    let scalars = [
        ("c", cfg.spec.c),
        ("gamma0", cfg.spec.gamma0),
        ("eta_a", cfg.gains.eta_a),
        ("eta_c", cfg.gains.eta_c),
        ("k_sb", cfg.gains.k_sb),
        ("T", cfg.gains.t_window),
        ("Wa_bound", cfg.gains.wa_bound),
        ("dt", cfg.integ.dt),
        ("t_end", cfg.integ.t_end),
    ];
    for (key, v) in scalars {
        let _ = writeln!(out, "{key} = {v}");
    }
    let _ = writeln!(out, "x0 = {}", join(&cfg.x0));
    let _ = writeln!(out, "noise_amplitude = {}", cfg.noise.amplitude);
    let _ = writeln!(out, "noise_tones = {}", cfg.noise.num_tones);
    let _ = writeln!(out, "noise_freq_lo = {}", cfg.noise.freq_lo);
    let _ = writeln!(out, "noise_freq_hi = {}", cfg.noise.freq_hi);
    let _ = writeln!(out, "noise_t_off = {}", cfg.noise.t_off);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "baseline = {}", cfg.baseline);
    out
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

fn real(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn integer(line: usize, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not a non-negative integer")))
}

fn list(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|item| real(line, item.trim())).collect()
}

/// `RxC: v11, v12, ...`
fn matrix(line: usize, s: &str) -> Result<Matrix> {
    let (dims, values) = s.split_once(':').ok_or_else(|| {
        parse_err(
            line,
            "matrix needs `rows x cols:` before its entries".into(),
        )
    })?;
    let (rows, cols) = dims
        .trim()
        .split_once('x')
        .ok_or_else(|| parse_err(line, format!("bad matrix dimensions `{}`", dims.trim())))?;
    let rows = integer(line, rows.trim())? as usize;
    let cols = integer(line, cols.trim())? as usize;
    if rows == 0 || cols == 0 {
        return Err(parse_err(line, "matrix dimensions must be positive".into()));
    }
    let data = list(line, values)?;
    if data.len() != rows * cols {
        return Err(parse_err(
            line,
            format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            ),
        ));
    }
    Matrix::new(rows, cols, data).map_err(|e| parse_err(line, e.to_string()))
}
