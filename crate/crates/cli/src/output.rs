//! Artifact writers: CSV tables, the text report and the two SVG panels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fkvx_core::validation::{ComparisonReport, OracleCheck};

use crate::plot::{Chart, Series};
use crate::{CheckLine, CliError};

pub const SOLUTION_HEADER: [&str; 5] = ["x", "u_pde", "u_sde_mean", "u_sde_stderr", "abs_error"];

/// 17 significant digits: enough to round-trip every `f64`.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_solution_csv(path: &Path, report: &ComparisonReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SOLUTION_HEADER)?;
    for (i, &x) in report.x().iter().enumerate() {
        let e = &report.mc[i];
        w.write_record([
            fmt(x),
            fmt(report.u_pde[i]),
            fmt(e.mean),
            fmt(e.std_error),
            fmt(report.pointwise_error[i]),
        ])?;
    }
    w.flush().map_err(io(path))
}

/// Rows of a `solution.csv`, in file order.
pub fn read_solution_csv(path: &Path) -> Result<Vec<[f64; 5]>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SOLUTION_HEADER {
        return Err(CliError::Config {
            source_name: path.display().to_string(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let mut row = [0.0; 5];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| CliError::Config {
                source_name: path.display().to_string(),
                message: format!("row {}: `{field}` is not a number", line + 2),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_oracle_csv(
    path: &Path,
    report: &ComparisonReport,
    check: &OracleCheck,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "x",
        "u_oracle",
        "u_pde",
        "pde_abs_error",
        "u_sde_mean",
        "u_sde_stderr",
        "sde_abs_error",
        "in_window",
    ])?;
    for (i, &x) in report.x().iter().enumerate() {
        let o = check.oracle[i];
        let e = &report.mc[i];
        w.write_record([
            fmt(x),
            fmt(o),
            fmt(report.u_pde[i]),
            fmt((report.u_pde[i] - o).abs()),
            fmt(e.mean),
            fmt(e.std_error),
            fmt((e.mean - o).abs()),
            (check.in_window[i] as u8).to_string(),
        ])?;
    }
    w.flush().map_err(io(path))
}

pub fn render_report(
    report: &ComparisonReport,
    oracle: Option<&OracleCheck>,
    checks: &[CheckLine],
) -> String {
    let mut s = report.render_text();
    if let Some(o) = oracle {
        let _ = writeln!(s, "[oracle]");
        let _ = writeln!(s, "pde_window_error = {:e}", o.pde_window_error);
        let _ = writeln!(s, "pde_max_error = {:e}", o.pde_max_error);
        let _ = writeln!(s, "em_bias_allowance = {:e}", o.calibration.allowance);
        let _ = writeln!(s, "mc_worst_ratio = {:.4}", o.mc_worst_ratio);
    }
    let _ = writeln!(s, "[checks]");
    for c in checks {
        let _ = writeln!(s, "{}", c);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io(path))
}

pub fn comparison_svg(report: &ComparisonReport) -> String {
    let mc: Vec<f64> = report.mc.iter().map(|e| e.mean).collect();
    Chart {
        title: &format!("{}: u(x, T), PDE vs Monte Carlo", report.label),
        y_label: "u(x, T)",
        log_y: false,
        x: report.x(),
        series: vec![
            Series {
                name: "Crank–Nicolson",
                color: "#1f4e9c",
                dashed: false,
                y: &report.u_pde,
            },
            Series {
                name: "Monte Carlo mean",
                color: "#c0392b",
                dashed: true,
                y: &mc,
            },
        ],
    }
    .render()
}

pub fn error_svg(report: &ComparisonReport) -> String {
    let two_se: Vec<f64> = report.mc.iter().map(|e| 2.0 * e.std_error).collect();
    Chart {
        title: &format!("{}: absolute difference", report.label),
        y_label: "|u_PDE − u_MC|",
        log_y: true,
        x: report.x(),
        series: vec![
            Series {
                name: "absolute error",
                color: "#1f4e9c",
                dashed: false,
                y: &report.pointwise_error,
            },
            Series {
                name: "2 × std. error",
                color: "#7f8c8d",
                dashed: true,
                y: &two_se,
            },
        ],
    }
    .render()
}
