use crate::constitutive::{director_potential, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{DirectorField, ScalarField, VectorField};
use crate::linalg::jacobi;
use crate::ops::{self, Stencil, NONE};
use crate::state::{check_theta, Regularization, State};

use super::StepParams;

/// The implicit temperature operator `I + dt (upwind transport) - dt div(D ∇)`.
///
/// The anisotropic diffusion `D = k I + h d⊗d` is split over axis and
/// diagonal edges with nonnegative weights, so the matrix is an M-matrix:
/// its rows sum to one (minimum principle) and its columns sum to one
/// (exact heat balance). Edges leaving a walled box are dropped, which is
/// the discrete statement that the full flux `q·ν` vanishes there.
#[derive(Clone, Debug)]
pub struct HeatOperator {
    pub dt: f64,
    /// `(c, n, gamma)`: conductance between cells `c` and `n`.
    pub edges: Vec<(usize, usize, f64)>,
    /// `(c, f, flux)`: volume flux per unit cell volume from `c` to its
    /// forward neighbour `f`, i.e. face velocity over spacing.
    pub faces: Vec<(usize, usize, f64)>,
    diag: Vec<f64>,
}

/// Pointwise conductivity tensor `k I + h d⊗d`.
fn conductivity(k: f64, h: f64, d: [f64; 3], dims: usize) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for a in 0..dims {
        for b in 0..dims {
            m[a][b] = h * d[a] * d[b] + if a == b { k } else { 0.0 };
        }
    }
    m
}

impl HeatOperator {
    pub fn new(
        theta_lag: &ScalarField,
        u: &VectorField,
        d: &DirectorField,
        coeffs: &CoefficientSet,
        dt: f64,
    ) -> Result<HeatOperator> {
        let g = *theta_lag.grid();
        let st = Stencil::new(&g);
        let dims = st.dims;
        let n = st.n;
        let h = st.h;
        // per-cell weights: axis[a], diagonal[(a,b)] for the +/+ and +/- directions
        let mut axis = vec![[0.0f64; 3]; n];
        let mut diag_pp = vec![[[0.0f64; 3]; 3]; n];
        let mut diag_pm = vec![[[0.0f64; 3]; 3]; n];
        for c in 0..n {
            let t = theta_lag.values()[c];
            let dm = conductivity(coeffs.k_of(t), coeffs.h_of(t), d.at(c), dims);
            for a in 0..dims {
                let mut off = 0.0;
                for b in 0..dims {
                    if b != a {
                        off += dm[a][b].abs() * h[a] / h[b];
                    }
                }
                let w = dm[a][a] - off;
                if w < -1e-12 * dm[a][a] {
                    return Err(Error::param(
                        "k",
                        format!(
                            "conductivity k = {} is too small against h = {} for a monotone anisotropic stencil at cell {c}",
                            coeffs.k_of(t),
                            coeffs.h_of(t)
                        ),
                    ));
                }
                axis[c][a] = w.max(0.0) / (h[a] * h[a]);
                for b in 0..dims {
                    if b != a {
                        diag_pp[c][a][b] = dm[a][b].max(0.0) / (h[a] * h[b]);
                        diag_pm[c][a][b] = (-dm[a][b]).max(0.0) / (h[a] * h[b]);
                    }
                }
            }
        }
        let mut edges = Vec::new();
        for c in 0..n {
            for a in 0..dims {
                let f = st.fwd[a][c];
                if f == NONE {
                    continue;
                }
                let gm = 0.5 * (axis[c][a] + axis[f][a]);
                if gm > 0.0 {
                    edges.push((c, f, gm));
                }
                for b in (a + 1)..dims {
                    let up = st.fwd[b][f];
                    if up != NONE {
                        let gm = 0.5 * (diag_pp[c][a][b] + diag_pp[up][a][b]);
                        if gm > 0.0 {
                            edges.push((c, up, gm));
                        }
                    }
                    let down = st.bwd[b][f];
                    if down != NONE {
                        let gm = 0.5 * (diag_pm[c][a][b] + diag_pm[down][a][b]);
                        if gm > 0.0 {
                            edges.push((c, down, gm));
                        }
                    }
                }
            }
        }
        let mut faces = Vec::new();
        for a in 0..dims {
            let comp = u.comp(a);
            for c in 0..n {
                let f = st.fwd[a][c];
                if f != NONE && st.is_dof(a, c) && comp[c] != 0.0 {
                    faces.push((c, f, comp[c] / h[a]));
                }
            }
        }
        let mut diag = vec![1.0; n];
        for &(c, m, gm) in &edges {
            diag[c] += dt * gm;
            diag[m] += dt * gm;
        }
        for &(c, f, w) in &faces {
            if w > 0.0 {
                diag[c] += dt * w;
            } else {
                diag[f] -= dt * w;
            }
        }
        Ok(HeatOperator { dt, edges, faces, diag })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        let dt = self.dt;
        for &(c, m, gm) in &self.edges {
            let q = dt * gm * (x[c] - x[m]);
            y[c] += q;
            y[m] -= q;
        }
        for &(c, f, w) in &self.faces {
            let q = dt * w * if w > 0.0 { x[c] } else { x[f] };
            y[c] += q;
            y[f] -= q;
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Discrete `div(D ∇x)` (the diffusion part only), per unit volume.
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for &(c, m, gm) in &self.edges {
            let q = gm * (x[m] - x[c]);
            y[c] += q;
            y[m] -= q;
        }
        y
    }
}

/// Heat source `mu |grad u|^2 + |chemical potential of d|^2` at cell centres.
pub fn heat_sources(u: &VectorField, d: &DirectorField, mu_cell: &[f64], eps: Regularization) -> ScalarField {
    let visc = ops::viscous_density(u, mu_cell);
    let m = director_potential(d, eps);
    let v = (0..u.grid().len())
        .map(|c| {
            let mc = m.at(c);
            visc.values()[c] + mc[0] * mc[0] + mc[1] * mc[1] + mc[2] * mc[2]
        })
        .collect();
    ScalarField::from_values(u.grid(), v).expect("cell count")
}

/// Implicit temperature step with coefficients frozen at `θⁿ`.
pub fn heat_step(
    state: &State,
    u_new: &VectorField,
    d_new: &DirectorField,
    coeffs: &CoefficientSet,
    params: &StepParams,
) -> Result<ScalarField> {
    check_theta(&state.theta)?;
    let mu = coeffs.mu_field(&state.theta);
    let source = heat_sources(u_new, d_new, &mu, state.eps);
    heat_step_lagged(state, &state.theta, u_new, d_new, &source, coeffs, params)
}

pub(crate) fn heat_step_lagged(
    state: &State,
    theta_lag: &ScalarField,
    u_new: &VectorField,
    d_new: &DirectorField,
    source: &ScalarField,
    coeffs: &CoefficientSet,
    params: &StepParams,
) -> Result<ScalarField> {
    check_theta(&state.theta)?;
    let dt = params.dt;
    let op = HeatOperator::new(theta_lag, u_new, d_new, coeffs, dt)?;
    let rhs: Vec<f64> = state
        .theta
        .values()
        .iter()
        .zip(source.values())
        .map(|(t, s)| t + dt * s)
        .collect();
    let mut x = state.theta.values().to_vec();
    jacobi("heat", |a, b| op.apply(a, b), op.diagonal(), &rhs, &mut x, params.solve_options())?;
    let theta = ScalarField::from_values(state.grid(), x)?;
    let (lo, now) = (state.theta.min(), theta.min());
    if now < lo - 1e-10 * lo.abs().max(1.0) {
        return Err(Error::Violation(format!("temperature minimum fell from {lo:e} to {now:e}")));
    }
    check_theta(&theta)?;
    Ok(theta)
}
