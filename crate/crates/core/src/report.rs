//! File outputs: `steady_state.csv`, `summary.json` and `curves.csv`.
//!
//! Numbers are written with 17 significant digits; missing values (for
//! example simulation columns of a theory-only run) are empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::MetricsReport;
use crate::sim::EnsembleResult;

pub const STEADY_STATE_HEADER: &str = "node,msd_theory_db,msd_sim_db,emse_theory_db,emse_sim_db,mse_theory_db,mse_sim_db,bias_norm_theory,bias_norm_sim,delta_msd_db,delta_emse_db,delta_mse_db";
pub const CURVES_HEADER: &str = "iter,node,msd,emse,mse";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn steady_state_csv(report: &MetricsReport) -> String {
    let mut out = String::with_capacity(256 * (report.nodes.len() + 1));
    out.push_str(STEADY_STATE_HEADER);
    out.push('\n');
    for row in &report.nodes {
        let t = row.theory_db;
        let s = row.sim_db;
        let d = row.delta_db;
        let fields = [
            opt(t.map(|x| x.msd)),
            opt(s.map(|x| x.msd)),
            opt(t.map(|x| x.emse)),
            opt(s.map(|x| x.emse)),
            opt(t.map(|x| x.mse)),
            opt(s.map(|x| x.mse)),
            opt(row.bias_norm_theory),
            opt(row.bias_norm_sim),
            opt(d.map(|x| x.msd)),
            opt(d.map(|x| x.emse)),
            opt(d.map(|x| x.mse)),
        ];
        let _ = writeln!(out, "{},{}", row.node, fields.join(","));
    }
    out
}

pub fn curves_csv(res: &EnsembleResult) -> String {
    let n = res.nodes();
    let t_len = res.iterations();
    let mut out = String::with_capacity(80 * n * t_len + 32);
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for i in 0..t_len {
        for k in 0..n {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                k + 1,
                fmt_num(res.msd_curve[k][i]),
                fmt_num(res.emse_curve[k][i]),
                fmt_num(res.mse_curve[k][i])
            );
        }
    }
    out
}

pub fn summary_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the report (and optionally the learning curves) into `output_dir`,
/// creating it if needed. Returns the written paths.
pub fn emit_report(report: &MetricsReport, curves: Option<&EnsembleResult>, output_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    let steady = output_dir.join("steady_state.csv");
    write(&steady, &steady_state_csv(report))?;
    written.push(steady);
    let summary = output_dir.join("summary.json");
    write(&summary, &summary_json(report))?;
    written.push(summary);
    if let Some(res) = curves {
        let path = output_dir.join("curves.csv");
        write(&path, &curves_csv(res))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NodeMetrics;

    #[test]
    fn one_node_report_has_one_row() {
        let t = [NodeMetrics { msd: 1e-3, emse: 1e-4, mse: 1e-2 }];
        let r = MetricsReport::new(1, Some(&t), Some(&t), 1.0).unwrap();
        let csv = steady_state_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], STEADY_STATE_HEADER);
        assert!(lines[1].starts_with("1,-3.0000000000000000e1,"));
    }

    #[test]
    fn theory_only_leaves_sim_columns_empty() {
        let t = [NodeMetrics { msd: 1e-3, emse: 1e-4, mse: 1e-2 }];
        let r = MetricsReport::new(1, Some(&t), None, 1.0).unwrap();
        let csv = steady_state_csv(&r);
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields.len(), 12);
        for idx in [2, 4, 6, 8, 9, 10, 11] {
            assert_eq!(fields[idx], "", "column {idx}");
        }
        assert!(!fields[1].is_empty());
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
