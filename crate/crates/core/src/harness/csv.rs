//! Trace and matrix CSV output.
//!
//! Reals are written with 17 significant digits, infinities as `inf`, and
//! absent values as empty fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::optim::{Trace, TraceRow};

pub const TRACE_HEADER: &str = "t,fval,accuracy,grad_norm_sq,gnorm_weighted,nu_min,nu_max,diverged";

pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            fmt_real(r.fval),
            fmt_opt(r.accuracy),
            fmt_real(r.grad_norm_sq),
            fmt_opt(r.gnorm_weighted),
            fmt_opt(r.nu_min),
            fmt_opt(r.nu_max),
            r.diverged
        );
    }
    out
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    std::fs::write(path, trace_csv(&trace.rows))?;
    Ok(())
}

/// Row-wise arithmetic mean over the longest common prefix of logged steps.
/// Optional fields are averaged only when present in every trace; a row is
/// flagged diverged when any trace's row is.
pub fn mean_rows(traces: &[Trace]) -> Vec<TraceRow> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    let mut out = Vec::new();
    for (i, row) in first.rows.iter().enumerate() {
        let rows: Option<Vec<&TraceRow>> = traces
            .iter()
            .map(|tr| tr.rows.get(i).filter(|r| r.t == row.t))
            .collect();
        let Some(rows) = rows else { break };
        let mean = |f: &dyn Fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        let mean_opt = |f: &dyn Fn(&TraceRow) -> Option<f64>| {
            let vals: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
            vals.map(|v| v.iter().sum::<f64>() / n)
        };
        out.push(TraceRow {
            t: row.t,
            fval: mean(&|r| r.fval),
            accuracy: mean_opt(&|r| r.accuracy),
            grad_norm_sq: mean(&|r| r.grad_norm_sq),
            gnorm_weighted: mean_opt(&|r| r.gnorm_weighted),
            nu_min: mean_opt(&|r| r.nu_min),
            nu_max: mean_opt(&|r| r.nu_max),
            diverged: rows.iter().any(|r| r.diverged),
        });
    }
    out
}

/// `key,<col>,<col>,…` matrix with one row per key.
pub fn matrix_csv(corner: &str, columns: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(corner);
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (key, vals) in rows {
        out.push_str(key);
        for v in vals {
            out.push(',');
            out.push_str(&fmt_real(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::Vector;

    fn row(t: usize, fval: f64, acc: Option<f64>) -> TraceRow {
        TraceRow {
            t,
            fval,
            accuracy: acc,
            grad_norm_sq: 1.0,
            gnorm_weighted: None,
            nu_min: None,
            nu_max: None,
            diverged: false,
        }
    }

    fn trace(rows: Vec<TraceRow>) -> Trace {
        Trace {
            optimizer: "kate".into(),
            rows,
            diverged: false,
            final_w: Vector::zeros(1),
        }
    }

    #[test]
    fn reals_have_17_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn header_and_empty_fields() {
        let csv = trace_csv(&[row(0, 0.5, None)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(lines.next().unwrap(), "0,5.0000000000000000e-1,,1.0000000000000000e0,,,,false");
    }

    #[test]
    fn mean_over_common_prefix() {
        let a = trace(vec![row(0, 1.0, Some(0.5)), row(10, 3.0, Some(1.0))]);
        let b = trace(vec![row(0, 2.0, None), row(10, 5.0, Some(0.0)), row(20, 1.0, None)]);
        let m = mean_rows(&[a, b]);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].fval, m[0].accuracy), (1.5, None));
        assert_eq!((m[1].fval, m[1].accuracy), (4.0, Some(0.5)));
    }

    #[test]
    fn matrix_layout() {
        let csv = matrix_csv("delta", &["kate".into()], &[("1e-8".into(), vec![f64::INFINITY])]);
        assert_eq!(csv, "delta,kate\n1e-8,inf\n");
    }
}
