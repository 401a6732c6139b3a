use crate::constitutive::{heat_flux, penalty_density, sigma_flux, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{central_gradient, director_gradient, divergence, DirectorField, ScalarField};
use crate::state::State;

/// Total energy density `½|u|² + ½|∇d|² + F(d) + θ` at cell centres, with
/// cell-centred velocity and central director gradients.
fn total_energy_density(state: &State) -> ScalarField {
    let g = *state.grid();
    let uc = state.u.to_cell_centers();
    let gd = director_gradient(&state.d);
    let pen = penalty_density(&state.d, state.eps);
    let v = (0..g.len())
        .map(|c| {
            let mut s = 0.0;
            for a in 0..g.dims() {
                s += 0.5 * uc.comp(a)[c] * uc.comp(a)[c];
                for k in 0..3 {
                    s += 0.5 * gd.entry(a, k)[c] * gd.entry(a, k)[c];
                }
            }
            s + pen.values()[c] + state.theta.values()[c]
        })
        .collect();
    ScalarField::from_values(&g, v).expect("cell count")
}

/// Pointwise residual of `D e_total/Dt + ∇·(Σ + q) = 0` between two states
/// `dt` apart, evaluated at the newer one with central differences. The
/// values in cells touching a wall use one-sided closures and are only
/// meaningful in the interior.
pub fn first_law_pointwise_residual(prev: &State, next: &State, coeffs: &CoefficientSet, dt: f64) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if prev.grid() != next.grid() {
        return Err(Error::FieldMismatch("states live on different grids".into()));
    }
    let g = *next.grid();
    let dims = g.dims();
    let e0 = total_energy_density(prev);
    let e1 = total_energy_density(next);
    let ge = central_gradient(&e1);
    let uc = next.u.to_cell_centers();
    let gd = director_gradient(&next.d);
    let mut dm = DirectorField::constant(&g, [0.0; 3]);
    for c in 0..g.len() {
        let (a, b) = (prev.d.at(c), next.d.at(c));
        let mut v = [0.0; 3];
        for k in 0..3 {
            v[k] = (b[k] - a[k]) / dt + (0..dims).map(|j| uc.comp(j)[c] * gd.entry(j, k)[c]).sum::<f64>();
        }
        dm.set(c, v);
    }
    let sigma = sigma_flux(next, &dm, coeffs)?;
    let q = heat_flux(&next.theta, &next.d, coeffs)?;
    let div = divergence(&sigma.axpy(1.0, &q));
    let v = (0..g.len())
        .map(|c| {
            let adv: f64 = (0..dims).map(|j| uc.comp(j)[c] * ge.comp(j)[c]).sum();
            (e1.values()[c] - e0.values()[c]) / dt + adv + div.values()[c]
        })
        .collect();
    ScalarField::from_values(&g, v)
}
