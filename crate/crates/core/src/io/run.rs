//! Run directories: a run writes its config, diagnostics table and field
//! snapshots to one directory, and [`audit_dir`] re-checks them later.
//!
//! ```text
//! <dir>/config.toml
//! <dir>/diagnostics.csv
//! <dir>/snapshots/step_00000000/{u,p,d,theta}.bin
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::audit::{max_principle_monitor, record_diagnostics, DiagnosticsRecord, MAX_PRINCIPLE_SLACK};
use crate::constitutive::entropy_production;
use crate::error::{Error, Result};
use crate::harness::{run_scenario_params, RunOutput};

use super::config::{emit_config, parse_config, RunConfig};
use super::csv::{emit_diagnostics_csv, parse_diagnostics_csv};
use super::snapshot::{read_state, write_state};

pub const CONFIG_FILE: &str = "config.toml";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

fn step_dir(root: &Path, n: usize) -> PathBuf {
    root.join(SNAPSHOT_DIR).join(format!("step_{n:08}"))
}

/// Outcome of [`execute_run`]; `violations` lists broken maximum principles
/// and a failed step, if any.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub output: RunOutput,
    pub dir: PathBuf,
    pub snapshots: usize,
    pub violations: Vec<String>,
}

/// Runs `cfg` into `dir`, snapshotting the initial state, every
/// `snapshot_stride` steps and the final state.
pub fn execute_run(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), emit_config(cfg)?)?;
    let params = cfg.step_params();
    let n_steps = cfg.scenario.n_steps();
    let mut snapshots = 1;
    write_state(&step_dir(dir, 0), &cfg.scenario.initial_state()?)?;
    let output = run_scenario_params(&cfg.scenario, &params, |ev| {
        let n = ev.n + 1;
        if n % cfg.snapshot_stride == 0 || n == n_steps {
            write_state(&step_dir(dir, n), ev.next)?;
            snapshots += 1;
        }
        Ok(())
    })?;
    fs::write(dir.join(DIAGNOSTICS_FILE), emit_diagnostics_csv(&output.records))?;
    let mut violations = max_principle_monitor(&output.records).violations;
    if let Some(f) = &output.failure {
        violations.push(format!("step failed: {f}"));
    }
    Ok(RunReport {
        output,
        dir: dir.to_path_buf(),
        snapshots,
        violations,
    })
}

/// One audited invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub snapshots: usize,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &'static str, failures: Vec<String>, ok_detail: String) -> AuditCheck {
    AuditCheck {
        name,
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            ok_detail
        } else {
            failures.join("; ")
        },
    }
}

/// Re-checks a run directory: snapshot integrity, maximum principles,
/// solenoidality, pointwise entropy production, mechanical energy decay
/// between snapshots and agreement with the stored diagnostics.
///
/// Errors are reserved for a directory that cannot be read as a run at all;
/// damaged snapshots are reported as a failed check.
pub fn audit_dir(dir: &Path) -> Result<AuditReport> {
    let text = fs::read_to_string(dir.join(CONFIG_FILE))?;
    let cfg = parse_config(&text)?;
    let grid = cfg.scenario.grid.build()?;
    let coeffs = cfg.scenario.coefficients.build()?;
    let mut steps: Vec<(usize, PathBuf)> = fs::read_dir(dir.join(SNAPSHOT_DIR))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let n = name.strip_prefix("step_")?.parse().ok()?;
            Some((n, e.path()))
        })
        .collect();
    steps.sort();
    if steps.is_empty() {
        return Err(Error::Snapshot(format!("no snapshots under {}", dir.display())));
    }

    let mut integrity = Vec::new();
    let mut states = Vec::new();
    for (n, path) in &steps {
        match read_state(path, &grid) {
            Ok(s) if s.eps != cfg.scenario.eps => {
                integrity.push(format!("step {n}: eps {:?} differs from the config", s.eps))
            }
            Ok(s) => states.push((*n, s)),
            Err(e) => integrity.push(format!("step {n}: {e}")),
        }
    }
    let mut checks = vec![check("snapshot integrity", integrity, format!("{} snapshots read", steps.len()))];

    let mut records = Vec::new();
    let mut admissible = Vec::new();
    for (n, s) in &states {
        match s.check_admissible().and_then(|_| record_diagnostics(s, &coeffs)) {
            Ok(r) => records.push((*n, r)),
            Err(e) => admissible.push(format!("step {n}: {e}")),
        }
    }
    checks.push(check("admissible states", admissible, "all fields finite, θ > 0".into()));

    let recs: Vec<DiagnosticsRecord> = records.iter().map(|(_, r)| *r).collect();
    let mp = max_principle_monitor(&recs);
    checks.push(check(
        "maximum principles",
        mp.violations.clone(),
        format!("max|d| {:.6e}, min d3 {:.6e}, min θ {:.6e}", mp.max_norm_d, mp.min_d3, mp.min_theta),
    ));

    let div_tol = 1e3 * cfg.step_params().projection_tol;
    let div: Vec<String> = records
        .iter()
        .filter(|(_, r)| !(r.div_u_max <= div_tol))
        .map(|(n, r)| format!("step {n}: max |div u| = {:.3e}", r.div_u_max))
        .collect();
    checks.push(check("solenoidal velocity", div, format!("max |div u| <= {div_tol:.1e}")));

    let mut production = Vec::new();
    for (n, s) in &states {
        if let Ok(p) = entropy_production(s, &coeffs) {
            if let Some(v) = p.values().iter().find(|v| !(**v >= 0.0)) {
                production.push(format!("step {n}: production {v:e}"));
            }
        }
    }
    checks.push(check("entropy production nonnegative", production, "every cell".into()));

    let energy: Vec<String> = records
        .windows(2)
        .filter(|w| !(w[1].1.e_mech() <= w[0].1.e_mech() * (1.0 + 1e-12) + MAX_PRINCIPLE_SLACK))
        .map(|w| format!("steps {}..{}: {:.17e} -> {:.17e}", w[0].0, w[1].0, w[0].1.e_mech(), w[1].1.e_mech()))
        .collect();
    checks.push(check("mechanical energy nonincreasing", energy, "between consecutive snapshots".into()));

    let mut agree = Vec::new();
    match fs::read_to_string(dir.join(DIAGNOSTICS_FILE)).map_err(Error::from).and_then(|t| parse_diagnostics_csv(&t)) {
        Ok(table) => {
            for (n, r) in &records {
                match table.iter().find(|row| row.t == r.t) {
                    Some(row) => {
                        let (a, b) = (row.to_row(), r.to_row());
                        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-10 * (1.0 + y.abs())) {
                            agree.push(format!("step {n}: table row at t = {} differs from the snapshot", r.t));
                        }
                    }
                    None if n % cfg.csv_stride() == 0 => agree.push(format!("step {n}: no table row at t = {}", r.t)),
                    None => {}
                }
            }
        }
        Err(e) => agree.push(format!("{DIAGNOSTICS_FILE}: {e}")),
    }
    checks.push(check("diagnostics match snapshots", agree, "recomputed records agree".into()));

    Ok(AuditReport {
        snapshots: steps.len(),
        checks,
    })
}
