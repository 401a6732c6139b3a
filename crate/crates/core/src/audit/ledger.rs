//! Energy-law residuals and maximum-principle monitoring on recorded series.

use crate::error::{Error, Result};

use super::DiagnosticsRecord;

/// Per-step residuals of the mechanical energy law and of total energy
/// conservation.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLawResiduals {
    /// `[2E(n+1) - 2E(n)]/dt + 2 D(n+1)` with `E = e_kin + e_elastic +
    /// e_penalty` and `D` the mechanical dissipation.
    pub r_mech: Vec<f64>,
    /// `[e_total(n+1) - e_total(n)]/dt`
    pub r_total: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl EnergyLawResiduals {
    pub fn max_mech(&self) -> f64 {
        max_abs(&self.r_mech)
    }
    pub fn mean_mech(&self) -> f64 {
        mean(&self.r_mech)
    }
    pub fn max_total(&self) -> f64 {
        max_abs(&self.r_total)
    }
    pub fn mean_total(&self) -> f64 {
        mean(&self.r_total)
    }
    /// `Σ r_mech dt`, the accumulated defect of the mechanical energy law.
    pub fn integrated_mech(&self, dt: f64) -> f64 {
        self.r_mech.iter().sum::<f64>() * dt
    }
}

/// Residuals between consecutive records, which must be `dt` apart.
pub fn energy_law_residual(records: &[DiagnosticsRecord], dt: f64) -> Result<EnergyLawResiduals> {
    if records.len() < 2 {
        return Err(Error::param("trajectory", "needs at least two records"));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    for w in records.windows(2) {
        let gap = w[1].t - w[0].t;
        if (gap - dt).abs() > 1e-9 * dt.max(w[1].t.abs()) {
            return Err(Error::param("trajectory", format!("records at t = {} and {} are not dt = {dt} apart", w[0].t, w[1].t)));
        }
    }
    let r_mech = records
        .windows(2)
        .map(|w| 2.0 * (w[1].e_mech() - w[0].e_mech()) / dt + 2.0 * w[1].dissipation_mech)
        .collect();
    let r_total = records.windows(2).map(|w| (w[1].e_total - w[0].e_total) / dt).collect();
    Ok(EnergyLawResiduals { r_mech, r_total })
}

/// Slack allowed on every maximum-principle bound.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-10;

/// Extremes over a run and every record exceeding a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    pub max_norm_d: f64,
    pub min_d3: f64,
    pub min_theta: f64,
    /// Initial temperature minimum the bound refers to.
    pub theta_floor: f64,
    pub violations: Vec<String>,
}

impl MaxPrincipleReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `|d| <= 1` (when it holds initially), `d³ >= 0` (when the initial
/// director lies in the upper hemisphere) and `θ >= min θ₀` on every record.
pub fn max_principle_monitor(records: &[DiagnosticsRecord]) -> MaxPrincipleReport {
    let mut rep = MaxPrincipleReport {
        max_norm_d: f64::NEG_INFINITY,
        min_d3: f64::INFINITY,
        min_theta: f64::INFINITY,
        theta_floor: f64::NAN,
        violations: Vec::new(),
    };
    let Some(first) = records.first() else {
        return rep;
    };
    rep.theta_floor = first.min_theta;
    let check_norm = first.max_norm_d <= 1.0 + MAX_PRINCIPLE_SLACK;
    let check_hemi = first.min_d3 >= -MAX_PRINCIPLE_SLACK;
    for r in records {
        rep.max_norm_d = rep.max_norm_d.max(r.max_norm_d);
        rep.min_d3 = rep.min_d3.min(r.min_d3);
        rep.min_theta = rep.min_theta.min(r.min_theta);
        if check_norm && !(r.max_norm_d <= 1.0 + MAX_PRINCIPLE_SLACK) {
            rep.violations.push(format!("t = {}: max |d| = {:.17e} exceeds 1", r.t, r.max_norm_d));
        }
        if check_hemi && !(r.min_d3 >= -MAX_PRINCIPLE_SLACK) {
            rep.violations.push(format!("t = {}: min d3 = {:.17e} is negative", r.t, r.min_d3));
        }
        if !(r.min_theta >= first.min_theta - MAX_PRINCIPLE_SLACK) {
            rep.violations.push(format!(
                "t = {}: min θ = {:.17e} below the initial minimum {:.17e}",
                r.t, r.min_theta, first.min_theta
            ));
        }
    }
    rep
}
