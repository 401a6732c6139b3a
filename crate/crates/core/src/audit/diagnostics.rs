use crate::constitutive::{director_potential, entropy_production, penalty_density, CoefficientSet};
use crate::error::Result;
use crate::grid::{director_grad_sq, integrate, vector_inner, ScalarField};
use crate::ops;
use crate::state::{check_theta, State};

/// Per-time-level energy and entropy ledger.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_kin: f64,
    pub e_elastic: f64,
    pub e_penalty: f64,
    pub e_thermal: f64,
    pub e_total: f64,
    pub dissipation_mech: f64,
    pub entropy_total: f64,
    pub production_total: f64,
    pub min_theta: f64,
    pub max_norm_d: f64,
    pub min_d3: f64,
    pub div_u_max: f64,
}

impl DiagnosticsRecord {
    /// Mechanical energy `e_kin + e_elastic + e_penalty`.
    pub fn e_mech(&self) -> f64 {
        self.e_kin + self.e_elastic + self.e_penalty
    }

    /// Values in CSV column order.
    pub fn to_row(&self) -> [f64; 13] {
        [
            self.t,
            self.e_kin,
            self.e_elastic,
            self.e_penalty,
            self.e_thermal,
            self.e_total,
            self.dissipation_mech,
            self.entropy_total,
            self.production_total,
            self.min_theta,
            self.max_norm_d,
            self.min_d3,
            self.div_u_max,
        ]
    }

    pub fn from_row(r: &[f64; 13]) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t: r[0],
            e_kin: r[1],
            e_elastic: r[2],
            e_penalty: r[3],
            e_thermal: r[4],
            e_total: r[5],
            dissipation_mech: r[6],
            entropy_total: r[7],
            production_total: r[8],
            min_theta: r[9],
            max_norm_d: r[10],
            min_d3: r[11],
            div_u_max: r[12],
        }
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "t",
    "e_kin",
    "e_elastic",
    "e_penalty",
    "e_thermal",
    "e_total",
    "dissipation_mech",
    "entropy_total",
    "production_total",
    "min_theta",
    "max_norm_d",
    "min_d3",
    "div_u_max",
];

/// Mechanical dissipation density `mu(theta)|grad u|^2 + |potential(d)|^2`.
pub fn dissipation_density(state: &State, coeffs: &CoefficientSet) -> ScalarField {
    let mu = coeffs.mu_field(&state.theta);
    let visc = ops::viscous_density(&state.u, &mu);
    let m = director_potential(&state.d, state.eps);
    let v = (0..state.grid().len())
        .map(|c| {
            let mc = m.at(c);
            visc.values()[c] + mc[0] * mc[0] + mc[1] * mc[1] + mc[2] * mc[2]
        })
        .collect();
    ScalarField::from_values(state.grid(), v).expect("cell count")
}

pub fn record_diagnostics(state: &State, coeffs: &CoefficientSet) -> Result<DiagnosticsRecord> {
    check_theta(&state.theta)?;
    let e_kin = 0.5 * vector_inner(&state.u, &state.u)?;
    let e_elastic = 0.5 * integrate(&director_grad_sq(&state.d));
    let e_penalty = integrate(&penalty_density(&state.d, state.eps));
    let e_thermal = integrate(&state.theta);
    let dissipation_mech = integrate(&dissipation_density(state, coeffs));
    let entropy_total = integrate(&state.theta.map(|t| 1.0 + t.ln()));
    let production_total = integrate(&entropy_production(state, coeffs)?);
    Ok(DiagnosticsRecord {
        t: state.t,
        e_kin,
        e_elastic,
        e_penalty,
        e_thermal,
        e_total: e_kin + e_elastic + e_penalty + e_thermal,
        dissipation_mech,
        entropy_total,
        production_total,
        min_theta: state.theta.min(),
        max_norm_d: state.d.max_norm(),
        min_d3: state.d.min_third(),
        div_u_max: state.div_u_max(),
    })
}
