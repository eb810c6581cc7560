//! Deterministic text export: trajectory and rate-table CSV with RFC-4180
//! quoting, LF line endings, and fixed-width float rendering so identical
//! runs produce identical bytes.

use crate::dynamics::Trajectory;
use crate::showcase::RateRow;

/// 17 significant decimal digits: round-trips every f64.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    let quoted: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    let mut row = quoted.join(",");
    row.push('\n');
    row
}

/// Columns: n, alpha_n, beta_n, err_norm, then one column per coordinate.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut header: Vec<String> = vec![
        "n".into(),
        "alpha_n".into(),
        "beta_n".into(),
        "err_norm".into(),
    ];
    for i in 0..d {
        header.push(format!("x{i}"));
    }
    let mut out = csv_row(&header);
    for (n, p) in traj.points.iter().enumerate() {
        let mut fields: Vec<String> = vec![
            n.to_string(),
            fmt_real(traj.alphas[n]),
            fmt_real(traj.betas[n]),
            fmt_real(traj.err_norms[n]),
        ];
        for c in p.coords() {
            fields.push(fmt_real(*c));
        }
        out.push_str(&csv_row(&fields));
    }
    out
}

/// Columns: rate_name, k, g, value_decimal.
pub fn rates_csv(rows: &[RateRow]) -> String {
    let mut out = csv_row(&[
        "rate_name".into(),
        "k".into(),
        "g".into(),
        "value_decimal".into(),
    ]);
    for r in rows {
        out.push_str(&csv_row(&[
            r.rate.clone(),
            r.k.to_string(),
            r.arg.clone(),
            r.value.to_string(),
        ]));
    }
    out
}

/// Plot-ready residual export: n, residual, log10_n, log10_residual.
pub fn residuals_csv(residuals: &[f64]) -> String {
    let mut out = csv_row(&[
        "n".into(),
        "residual".into(),
        "log10_n".into(),
        "log10_residual".into(),
    ]);
    for (n, r) in residuals.iter().enumerate() {
        out.push_str(&csv_row(&[
            n.to_string(),
            fmt_real(*r),
            fmt_real((n.max(1) as f64).log10()),
            fmt_real(r.max(f64::MIN_POSITIVE).log10()),
        ]));
    }
    out
}
