//! CSV output: per-step trajectories, sweep summaries, and a reader for
//! checking them.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{RunMetrics, TrajectoryLog};
use crate::riccati::RiccatiSolution;

/// Published reference rows `(k_sb, total cost, peak control effort)` for the
/// safety-gain sweep. Our exploration signal differs from the one behind these
/// numbers, so they are printed for comparison only.
pub const REFERENCE_SWEEP: [(f64, f64, f64); 5] = [
    (0.01, 43.652, 18.746),
    (0.1, 40.631, 18.45),
    (0.2, 40.021, 18.39),
    (0.3, 39.833, 24.0),
    (0.5, 39.293, 40.0),
];

pub const SUMMARY_HEADER: &str =
    "k_sb,total_cost,peak_control,min_margin,actor_error,safety_violated";

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e12)`.
pub fn fmt_g12(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_header(log: &TrajectoryLog) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=log.n).map(|i| format!("x{i}")));
    cols.extend((1..=log.m).map(|i| format!("u{i}")));
    cols.extend(["norm_x", "B_s", "e_c", "margin"].map(String::from));
    cols.extend((1..=log.p()).map(|i| format!("Wc_{i}")));
    for i in 1..=log.n {
        for j in 1..=log.m {
            cols.push(format!("Wa_{i}{j}"));
        }
    }
    cols.join(",")
}

/// Renders the trajectory as CSV text. The TD error is `NaN` until the
/// integral window has filled.
pub fn render_csv(log: &TrajectoryLog) -> Result<String> {
    if log.records.is_empty() {
        return Err(Error::InvariantViolation(
            "cannot write an empty trajectory".into(),
        ));
    }
    let mut out = csv_header(log);
    out.push('\n');
    for r in &log.records {
        let mut fields: Vec<f64> =
            Vec::with_capacity(1 + log.n + log.m + 4 + log.p() + log.n * log.m);
        fields.push(r.t);
        fields.extend(&r.x);
        fields.extend(&r.u);
        fields.extend([r.norm_x, r.b_s, r.e_c.unwrap_or(f64::NAN), r.margin]);
        fields.extend(&r.wc);
        fields.extend(&r.wa);
        let row: Vec<String> = fields.into_iter().map(fmt_g12).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_csv(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<()> {
    let text = render_csv(log)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Header names and numeric rows of a CSV file; `#` lines are skipped.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#'));
    let header = match lines.next() {
        Some((_, h)) => h.split(',').map(String::from).collect::<Vec<_>>(),
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let row = line
            .split(',')
            .map(|f| match f {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => f.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("`{f}` is not a number"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn render_summary(rows: &[(f64, RunMetrics)]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvariantViolation(
            "cannot write an empty sweep summary".into(),
        ));
    }
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (k, m) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_g12(*k),
            fmt_g12(m.total_cost),
            fmt_g12(m.peak_control),
            fmt_g12(m.min_margin),
            fmt_g12(m.actor_error),
            m.safety_violated
        );
    }
    for (k, cost, peak) in REFERENCE_SWEEP {
        let _ = writeln!(out, "#ref,{k},{cost},{peak}");
    }
    Ok(out)
}

/// Writes the sweep table followed by the `#ref,` rows. Nothing is written
/// for an empty sweep.
pub fn emit_summary(rows: &[(f64, RunMetrics)], path: impl AsRef<Path>) -> Result<()> {
    let text = render_summary(rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// One line per labelled run with every metric.
pub fn render_metrics(rows: &[(&str, &RunMetrics)]) -> String {
    let mut out = String::from(
        "run,total_cost,peak_control,min_margin,actor_error,safety_violated,final_norm,max_abs_td,pe_level\n",
    );
    for (label, m) in rows {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{},{},{},{}",
            fmt_g12(m.total_cost),
            fmt_g12(m.peak_control),
            fmt_g12(m.min_margin),
            fmt_g12(m.actor_error),
            m.safety_violated,
            fmt_g12(m.final_norm),
            fmt_g12(m.max_abs_td),
            fmt_g12(m.pe_level)
        );
    }
    out
}

/// Human-readable oracle printout.
pub fn render_oracle(sol: &RiccatiSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "P =\n{}", sol.p);
    let _ = writeln!(out, "W_a = {}", join(sol.wa.as_slice()));
    let _ = writeln!(out, "W_c = {}", join(&sol.wc));
    let _ = writeln!(out, "ARE residual = {:e}", sol.residual);
    let _ = writeln!(out, "Kleinman iterations = {}", sol.iterations);
    out
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_g12(*x)).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::StepRecord;

    fn one_step_log() -> TrajectoryLog {
        TrajectoryLog {
            n: 2,
            m: 1,
            records: vec![StepRecord {
                t: 0.0,
                x: vec![1.0, 1.0],
                u: vec![-2304.5],
                norm_x: std::f64::consts::SQRT_2,
                b_s: 64.0,
                e_c: None,
                margin: 1.5 - std::f64::consts::SQRT_2,
                wc: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.05],
                wa: vec![0.0, 0.0],
            }],
        }
    }

    #[test]
    fn g12_formatting() {
        assert_eq!(fmt_g12(0.0), "0");
        assert_eq!(fmt_g12(1.0), "1");
        assert_eq!(fmt_g12(-2.5), "-2.5");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(1152.0), "1152");
        assert_eq!(fmt_g12(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g12(2.0e13), "2e+13");
        assert_eq!(fmt_g12(123456789012.0), "123456789012");
        assert_eq!(fmt_g12(f64::NAN), "NaN");
        assert_eq!(fmt_g12(0.99999999999999), "1");
    }

    #[test]
    fn header_schema() {
        let log = one_step_log();
        let header = csv_header(&log);
        assert_eq!(
            header,
            "t,x1,x2,u1,norm_x,B_s,e_c,margin,Wc_1,Wc_2,Wc_3,Wc_4,Wc_5,Wc_6,Wa_11,Wa_21"
        );
        assert_eq!(header.split(',').count(), 1 + 2 + 1 + 4 + 6 + 2);
    }

    #[test]
    fn one_step_two_lines() {
        let text = render_csv(&one_step_log()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn empty_log_rejected() {
        let log = TrajectoryLog {
            n: 2,
            m: 1,
            records: vec![],
        };
        assert!(render_csv(&log).is_err());
        assert!(render_summary(&[]).is_err());
    }

    #[test]
    fn summary_reference_rows() {
        let m = RunMetrics::default();
        let rows: Vec<_> = [0.01, 0.1, 0.2, 0.3, 0.5].iter().map(|&k| (k, m)).collect();
        let text = render_summary(&rows).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 6 + 5);
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert!(lines.contains(&"#ref,0.2,40.021,18.39"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("#ref,")).count(), 5);
    }
}
