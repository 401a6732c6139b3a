use crate::constitutive::gl_force_at;
use crate::error::{Error, Result};
use crate::grid::{director_grad_sq, DirectorField, VectorField};
use crate::linalg::jacobi;
use crate::ops::{self, Stencil};
use crate::state::{Regularization, State};

use super::StepParams;

/// Smallest stabilization for which both the energy estimate (`S >= 1/eps^2`)
/// and the monotonicity of the explicit pointwise update
/// (`S >= 2/eps^2 - 1/dt`) hold.
pub fn default_stabilization(eps: f64, dt: f64) -> f64 {
    let e2 = 1.0 / (eps * eps);
    e2.max(2.0 * e2 - 1.0 / dt)
}

fn check_peclet(st: &Stencil, w: &VectorField) -> Result<()> {
    let pe = ops::cell_peclet(st, w);
    if pe > 1.0 {
        return Err(Error::StepTooLarge(format!(
            "cell Peclet number {pe:.3} of the transporting velocity exceeds 1; refine the grid"
        )));
    }
    Ok(())
}

/// Solves `(a I - dt Δ + dt T(w)) x = b` for every director component.
fn solve_components(
    st: &Stencil,
    w: &VectorField,
    a: f64,
    rhs: &[Vec<f64>; 3],
    guess: &DirectorField,
    params: &StepParams,
) -> Result<DirectorField> {
    let dt = params.dt;
    let lap_diag = ops::laplacian_diagonal(st);
    let diag: Vec<f64> = lap_diag.iter().map(|l| a - dt * l).collect();
    let mut out = guess.clone();
    let apply = |x: &[f64], y: &mut [f64]| {
        let mut lap = vec![0.0; x.len()];
        let mut tr = vec![0.0; x.len()];
        ops::laplacian(st, x, &mut lap);
        ops::transport(st, w, x, &mut tr);
        for i in 0..x.len() {
            y[i] = a * x[i] - dt * lap[i] + dt * tr[i];
        }
    };
    for k in 0..3 {
        jacobi("director", apply, &diag, &rhs[k], out.comp_mut(k), params.solve_options())?;
    }
    Ok(out)
}

/// One stabilized semi-implicit step of the regularized director equation,
///
/// `(d' - d)/dt + T(w) d' = Δd' - f_eps(d) - S (d' - d)`,
///
/// returning `d'`.
pub fn director_step(state: &State, w: &VectorField, params: &StepParams) -> Result<DirectorField> {
    director_step_with_potential(state, w, params).map(|(d, _)| d)
}

/// Like [`director_step`], also returning the chemical potential
/// `Δd' - f_eps(d) - S (d' - d)` of the step.
pub fn director_step_with_potential(
    state: &State,
    w: &VectorField,
    params: &StepParams,
) -> Result<(DirectorField, DirectorField)> {
    let eps = state.eps.finite().ok_or_else(|| Error::param("eps", "finite director step needs a finite eps"))?;
    crate::state::check_eps(eps)?;
    params.validate(state.eps)?;
    let g = *state.grid();
    if w.grid() != &g || !w.staggered() {
        return Err(Error::FieldMismatch("transport velocity must be staggered on the state grid".into()));
    }
    let st = Stencil::new(&g);
    check_peclet(&st, w)?;
    let dt = params.dt;
    let s = params.stabilization.unwrap_or_else(|| default_stabilization(eps, dt));
    let a = 1.0 + dt * s;
    let d = &state.d;
    let mut rhs = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for c in 0..g.len() {
        let dc = d.at(c);
        let f = gl_force_at(dc, eps);
        for k in 0..3 {
            rhs[k][c] = a * dc[k] - dt * f[k];
        }
    }
    let d_new = solve_components(&st, w, a, &rhs, d, params)?;
    let mut m = DirectorField::constant(&g, [0.0; 3]);
    let mut tr = vec![0.0; g.len()];
    for k in 0..3 {
        ops::transport(&st, w, d_new.comp(k), &mut tr);
        let (dn, d0) = (d_new.comp(k), d.comp(k));
        let mk = m.comp_mut(k);
        for c in 0..g.len() {
            mk[c] = (dn[c] - d0[c]) / dt + tr[c];
        }
    }
    Ok((d_new, m))
}

/// One step of the unit-length limit, `d_t + T(w) d = Δd + |∇d|² d`, with
/// the nonlinearity lagged and the result renormalized cellwise.
pub fn limit_director_step(state: &State, w: &VectorField, params: &StepParams) -> Result<DirectorField> {
    if dt_invalid(params.dt) {
        return Err(Error::param("dt", format!("must be positive, got {}", params.dt)));
    }
    let g = *state.grid();
    if w.grid() != &g || !w.staggered() {
        return Err(Error::FieldMismatch("transport velocity must be staggered on the state grid".into()));
    }
    if state.eps != Regularization::Limit {
        return Err(Error::param("eps", "limit director step needs the limit regularization"));
    }
    let st = Stencil::new(&g);
    check_peclet(&st, w)?;
    let dt = params.dt;
    let d = &state.d;
    let gs = director_grad_sq(d);
    let mut rhs = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for c in 0..g.len() {
        let dc = d.at(c);
        let s = 1.0 + dt * gs.values()[c];
        for k in 0..3 {
            rhs[k][c] = s * dc[k];
        }
    }
    let mut out = solve_components(&st, w, 1.0, &rhs, d, params)?;
    for c in 0..g.len() {
        let v = out.at(c);
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n >= 0.5) {
            return Err(Error::StepTooLarge(format!(
                "|d| dropped to {n:.3e} before renormalization at cell {c}"
            )));
        }
        out.set(c, [v[0] / n, v[1] / n, v[2] / n]);
    }
    Ok(out)
}

fn dt_invalid(dt: f64) -> bool {
    !(dt > 0.0 && dt.is_finite())
}
