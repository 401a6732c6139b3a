//! Diagnostics and sweep tables as comma-separated text. Floats are written
//! with 17 significant digits so they parse back bit for bit.

use crate::audit::{DiagnosticsRecord, CSV_COLUMNS};
use crate::error::{Error, Result};
use crate::harness::{RefinementRow, SweepResult};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt).collect::<Vec<_>>().join(",")
}

pub fn emit_diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&row(r.to_row()));
        out.push('\n');
    }
    out
}

pub fn parse_diagnostics_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config {
        key: "csv".into(),
        reason: "empty file".into(),
    })?;
    if header.split(',').ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Config {
            key: "csv.header".into(),
            reason: format!("expected `{}`", CSV_COLUMNS.join(",")),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |reason: String| Error::Config {
                key: format!("csv.row{}", i + 1),
                reason,
            };
            let vals = l
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let arr: [f64; 13] =
                vals.try_into().map_err(|v: Vec<f64>| bad(format!("{} columns, expected 13", v.len())))?;
            Ok(DiagnosticsRecord::from_row(&arr))
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "eps",
    "penalty_avg",
    "max_unit_defect",
    "grad_diff_avg",
    "grad_diff_good_avg",
    "bound_rhs",
    "mech_sup",
    "mech_sup_with_dissipation",
    "theta_l32",
    "grad_theta_l65",
    "refinement_diff",
    "failed",
];

/// One row per ε, then the limit run with `eps = 0`.
pub fn emit_sweep_csv(result: &SweepResult) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for m in &result.members {
        let r = &m.run;
        out.push_str(&row([
            m.eps,
            m.penalty_avg,
            m.max_unit_defect,
            m.grad_diff_avg,
            m.grad_diff_good_avg,
            m.bound_rhs,
            m.mech_sup,
            m.mech_sup_with_dissipation,
            r.theta_l32,
            r.grad_theta_l65,
            m.refinement_diff.unwrap_or(f64::NAN),
            if r.failure.is_some() { 1.0 } else { 0.0 },
        ]));
        out.push('\n');
    }
    let l = &result.limit;
    out.push_str(&row([
        0.0,
        0.0,
        l.max_unit_defect,
        0.0,
        0.0,
        l.bound_rhs(),
        l.mech_sup(),
        l.mech_sup_with_dissipation(result.dt),
        l.theta_l32,
        l.grad_theta_l65,
        f64::NAN,
        if l.failure.is_some() { 1.0 } else { 0.0 },
    ]));
    out.push('\n');
    out
}

pub fn emit_refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("m,diff,envelope_excess_m,envelope_excess_2m,failed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.m,
            fmt(r.diff),
            fmt(r.envelope_excess_m),
            fmt(r.envelope_excess_2m),
            u8::from(r.failure.is_some())
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_columns_and_exact_round_trip() {
        let rec = DiagnosticsRecord {
            t: 0.1,
            e_kin: 1.0 / 3.0,
            e_total: std::f64::consts::PI,
            min_theta: 5e-300,
            div_u_max: f64::MIN_POSITIVE,
            ..Default::default()
        };
        let text = emit_diagnostics_csv(&[rec, DiagnosticsRecord::default()]);
        for l in text.lines() {
            assert_eq!(l.split(',').count(), 13);
        }
        assert_eq!(parse_diagnostics_csv(&text).unwrap(), vec![rec, DiagnosticsRecord::default()]);
    }

    #[test]
    fn malformed_rows_are_reported() {
        let mut text = emit_diagnostics_csv(&[DiagnosticsRecord::default()]);
        text.push_str("1,2,3\n");
        assert!(matches!(parse_diagnostics_csv(&text), Err(Error::Config { key, .. }) if key == "csv.row2"));
        assert!(parse_diagnostics_csv("t,e_kin\n").is_err());
        assert!(parse_diagnostics_csv("").is_err());
    }
}
