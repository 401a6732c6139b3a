//! First-order semi-implicit time stepping of the coupled system.
//!
//! One coupled step runs, in order,
//!
//! 1. the director update, transported by the old velocity,
//! 2. the momentum update with implicit variable viscosity, driven by the
//!    elastic force of the new director, followed by projection,
//! 3. the temperature update, transported by the new velocity, with the
//!    new dissipation as source.
//!
//! Coefficients are lagged at the old temperature unless `max_picard > 1`.

mod director;
mod heat;
mod momentum;

pub use director::{default_stabilization, director_step, director_step_with_potential, limit_director_step};
pub use heat::{heat_sources, heat_step, HeatOperator};
pub use momentum::{momentum_step, momentum_step_with_force, project_divergence_free, Projection};

use crate::constitutive::{director_potential, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{DirectorField, ScalarField};
use crate::linalg::SolveOptions;
use crate::state::{Regularization, State};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    /// Director stabilization constant; `None` picks [`default_stabilization`].
    pub stabilization: Option<f64>,
    /// Relative residual target of the pressure Poisson solve.
    pub projection_tol: f64,
    /// Relative residual target of every other linear solve.
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Number of passes re-evaluating the coefficients at the newest temperature.
    pub max_picard: usize,
}

impl StepParams {
    pub fn new(dt: f64) -> StepParams {
        StepParams {
            dt,
            stabilization: None,
            projection_tol: 1e-12,
            solver_tol: 1e-12,
            max_iter: 20_000,
            max_picard: 1,
        }
    }

    pub fn validate(&self, eps: Regularization) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.max_picard == 0 {
            return Err(Error::param("max_picard", "must be at least 1"));
        }
        if !(self.projection_tol > 0.0 && self.solver_tol > 0.0) {
            return Err(Error::param("tolerance", "solver tolerances must be positive"));
        }
        if let (Some(s), Regularization::Finite(e)) = (self.stabilization, eps) {
            if s < 1.0 / (e * e) {
                return Err(Error::param("stabilization", format!("S = {s} is below 1/eps^2 = {}", 1.0 / (e * e))));
            }
        }
        Ok(())
    }

    pub(crate) fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.solver_tol,
            max_iter: self.max_iter,
        }
    }

    pub(crate) fn projection_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.projection_tol,
            max_iter: self.max_iter,
        }
    }
}

/// Intermediate quantities of one coupled step, for audits.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Chemical potential the director step actually used; it drives the
    /// elastic force.
    pub potential: DirectorField,
    /// Heat source `mu(theta^n)|grad u^{n+1}|^2 + |potential(d^{n+1})|^2`.
    pub heat_source: ScalarField,
    /// Viscosity at cell centres the momentum and heat steps used.
    pub mu_lag: Vec<f64>,
    /// Temperature the coefficients were frozen at.
    pub theta_lag: ScalarField,
}

/// Advances the state by one step.
pub fn coupled_step(state: &State, coeffs: &CoefficientSet, params: &StepParams) -> Result<State> {
    coupled_step_detailed(state, coeffs, params).map(|(s, _)| s)
}

pub fn coupled_step_detailed(
    state: &State,
    coeffs: &CoefficientSet,
    params: &StepParams,
) -> Result<(State, StepRecord)> {
    state.check_admissible()?;
    params.validate(state.eps)?;
    let (d_new, potential) = match state.eps {
        Regularization::Finite(_) => director_step_with_potential(state, &state.u, params)?,
        Regularization::Limit => {
            let d = limit_director_step(state, &state.u, params)?;
            let m = director_potential(&d, Regularization::Limit);
            (d, m)
        }
    };
    let mut theta_lag = state.theta.clone();
    let mut out = None;
    for _ in 0..params.max_picard {
        let mu_lag = coeffs.mu_field(&theta_lag);
        let mid = State {
            d: d_new.clone(),
            ..state.clone()
        };
        let (u_new, p_new) = momentum_step_with_force(&mid, &potential, &mu_lag, params)?;
        let source = heat_sources(&u_new, &d_new, &mu_lag, state.eps);
        let theta_new = heat::heat_step_lagged(state, &theta_lag, &u_new, &d_new, &source, coeffs, params)?;
        let next = State {
            u: u_new,
            p: p_new,
            d: d_new.clone(),
            theta: theta_new,
            t: state.t + params.dt,
            eps: state.eps,
        };
        let record = StepRecord {
            potential: potential.clone(),
            heat_source: source,
            mu_lag,
            theta_lag: theta_lag.clone(),
        };
        theta_lag = next.theta.clone();
        out = Some((next, record));
    }
    Ok(out.expect("max_picard >= 1"))
}
