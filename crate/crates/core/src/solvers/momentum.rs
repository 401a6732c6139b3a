use crate::constitutive::{director_potential, penalty_density, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{director_grad_sq, DirectorField, ScalarField, VectorField};
use crate::linalg::{pcg, SolveOptions};
use crate::ops::{self, Stencil, ViscousOp};
use crate::state::State;

use super::StepParams;

/// Result of a discrete Leray projection.
#[derive(Clone, Debug)]
pub struct Projection {
    pub u: VectorField,
    /// Potential whose face gradient was removed; mean free.
    pub phi: ScalarField,
}

/// `u = u* - G φ` with `D G φ = D u*`: the discrete Leray projection onto
/// fields with zero backward-difference divergence.
pub fn project_divergence_free(u_star: &VectorField, opts: SolveOptions) -> Result<Projection> {
    if !u_star.staggered() {
        return Err(Error::FieldMismatch("projection needs a staggered velocity".into()));
    }
    let g = *u_star.grid();
    let st = Stencil::new(&g);
    for a in 0..st.dims {
        let comp = u_star.comp(a);
        for c in 0..st.n {
            if st.wall[a][c] && comp[c] != 0.0 {
                return Err(Error::Inadmissible(format!(
                    "velocity has normal component {:.3e} on a wall face; net boundary flux must vanish",
                    comp[c]
                )));
            }
        }
    }
    let div = ops::face_divergence(&st, u_star);
    let rhs: Vec<f64> = div.iter().map(|v| -v).collect();
    let diag: Vec<f64> = ops::laplacian_diagonal(&st).iter().map(|v| -v).collect();
    let mut phi = vec![0.0; st.n];
    let apply = |x: &[f64], y: &mut [f64]| {
        ops::laplacian(&st, x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    };
    pcg("pressure poisson", apply, &diag, &rhs, &mut phi, true, opts)?;
    let gphi = ops::face_gradient(&st, &phi);
    let u = u_star.axpy(-1.0, &gphi);
    Ok(Projection {
        u,
        phi: ScalarField::from_values(&g, phi)?,
    })
}

/// Momentum step with the elastic force computed from the state's director
/// and its chemical potential `Δd - f_eps(d)` (or the limit potential).
pub fn momentum_step(state: &State, coeffs: &CoefficientSet, params: &StepParams) -> Result<(VectorField, ScalarField)> {
    state.check_admissible()?;
    params.validate(state.eps)?;
    let m = director_potential(&state.d, state.eps);
    let mu = coeffs.mu_field(&state.theta);
    momentum_step_with_force(state, &m, &mu, params)
}

/// `(u* - u)/dt + C(u) u = V(mu) u* - (∇d)ᵀ m`, then projection. Returns the
/// new velocity and the physical pressure `φ/dt - ½|∇d|² - F_eps(d)`.
pub fn momentum_step_with_force(
    state: &State,
    m: &DirectorField,
    mu_cell: &[f64],
    params: &StepParams,
) -> Result<(VectorField, ScalarField)> {
    let g = *state.grid();
    let st = Stencil::new(&g);
    let dt = params.dt;
    let u = &state.u;
    let force = ops::elastic_force(&st, &state.d, m);
    let conv = ops::convect(&st, u, u);
    let visc = ViscousOp::new(&st, mu_cell);
    let mut u_star = VectorField::zeros(&g, true);
    for j in 0..st.dims {
        let (uj, fj, cj) = (u.comp(j), force.comp(j), conv.comp(j));
        let rhs: Vec<f64> = (0..st.n)
            .map(|c| if st.is_dof(j, c) { uj[c] + dt * (fj[c] - cj[c]) } else { 0.0 })
            .collect();
        let diag: Vec<f64> = visc.diagonal(j).iter().map(|v| 1.0 - dt * v).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            visc.apply(j, x, y);
            for i in 0..x.len() {
                y[i] = x[i] - dt * y[i];
            }
        };
        let x = u_star.comp_mut(j);
        x.copy_from_slice(&rhs);
        pcg("viscous", apply, &diag, &rhs, x, false, params.solve_options())?;
        for c in 0..st.n {
            if !st.is_dof(j, c) {
                x[c] = 0.0;
            }
        }
    }
    let proj = project_divergence_free(&u_star, params.projection_options())?;
    let gs = director_grad_sq(&state.d);
    let pen = penalty_density(&state.d, state.eps);
    let p: Vec<f64> = (0..st.n)
        .map(|c| proj.phi.values()[c] / dt - 0.5 * gs.values()[c] - pen.values()[c])
        .collect();
    Ok((proj.u, ScalarField::from_values(&g, p)?))
}
