use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{divergence, DirectorField, Grid, ScalarField, VectorField};

/// Temperatures at or below this are treated as inadmissible.
pub const THETA_FLOOR: f64 = 1e-300;

/// Regularization parameter of the director equation: a finite
/// Ginzburg-Landau width, or the unit-length limit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    Finite(f64),
    Limit,
}

impl Regularization {
    pub fn finite(self) -> Option<f64> {
        match self {
            Regularization::Finite(e) => Some(e),
            Regularization::Limit => None,
        }
    }
    pub fn is_limit(self) -> bool {
        matches!(self, Regularization::Limit)
    }
    /// Value stored in snapshot headers; the limit is encoded as 0.
    pub fn as_header_value(self) -> f64 {
        self.finite().unwrap_or(0.0)
    }
}

/// One time level of the coupled system. Velocity is staggered.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: VectorField,
    pub p: ScalarField,
    pub d: DirectorField,
    pub theta: ScalarField,
    pub t: f64,
    pub eps: Regularization,
}

impl State {
    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    /// The global equilibrium: fluid at rest, constant director and temperature.
    pub fn equilibrium(grid: &Grid, d: [f64; 3], theta: f64, eps: Regularization) -> State {
        State {
            u: VectorField::zeros(grid, true),
            p: ScalarField::zeros(grid),
            d: DirectorField::constant(grid, d),
            theta: ScalarField::constant(grid, theta),
            t: 0.0,
            eps,
        }
    }

    pub fn div_u_max(&self) -> f64 {
        divergence(&self.u).max_abs()
    }

    /// Checks the structural requirements every step relies on.
    pub fn check_admissible(&self) -> Result<()> {
        let g = self.grid();
        if self.u.grid() != g || self.p.grid() != g || self.d.grid() != g {
            return Err(Error::FieldMismatch("state fields live on different grids".into()));
        }
        if !self.u.staggered() {
            return Err(Error::Inadmissible("velocity must use the staggered layout".into()));
        }
        check_theta(&self.theta)?;
        if let Regularization::Finite(e) = self.eps {
            if !(e > 0.0) {
                return Err(Error::param("eps", format!("must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_theta(theta: &ScalarField) -> Result<()> {
    let m = theta.min();
    if !(m > THETA_FLOOR) {
        return Err(Error::Inadmissible(format!("temperature must be positive, min is {m:e}")));
    }
    Ok(())
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    Ok(())
}
