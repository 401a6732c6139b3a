//! Space-time weak forms of the momentum and director equations against a
//! finite catalog of smooth test functions.
//!
//! Velocity form: `∫∫ u·∂tφ + (u⊗u):∇φ - (μ∇u - ∇d⊙∇d):∇φ + ∫ u₀·φ(0)`.
//! Director form: `∫∫ d·∂tψ + (u⊗d):∇ψ - ∇d:∇ψ - f·ψ + ∫ d₀·ψ(0)`, with
//! `f = f_ε(d)` or `-|∇d|² d` in the limit. Both vanish for exact solutions.
//! Time integrals use the midpoint rule between consecutive states, space
//! integrals the cell-centre rule with central differences.

use std::f64::consts::{PI, TAU};

use crate::constitutive::{gl_force_at, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{central_gradient, director_gradient, BcMode, Grid, ScalarField};
use crate::state::{Regularization, State};

/// Smooth time cutoff `(1 - t/T)³` on `[0, T)`, with its derivative.
fn cutoff(t: f64, horizon: f64) -> (f64, f64) {
    if t >= horizon {
        (0.0, 0.0)
    } else {
        let s = 1.0 - t / horizon;
        (s * s * s, -3.0 * s * s / horizon)
    }
}

/// Wave numbers of the catalog: full periods on the torus, half periods
/// between walls so stream functions vanish on the boundary.
fn base_wavenumbers(grid: &Grid) -> [f64; 3] {
    let mut k = [0.0; 3];
    for a in 0..grid.dims() {
        k[a] = match grid.bc_mode() {
            BcMode::Periodic => TAU / grid.extent()[a],
            BcMode::Walls => PI / grid.extent()[a],
        };
    }
    k
}

/// Divergence-free test field `φ = b(t) (∂yψ, -∂xψ, 0)` for the stream
/// function `ψ = sin(m kx x) sin(n ky y)`; normal components vanish on walls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityTestFn {
    pub m: f64,
    pub n: f64,
    pub k: [f64; 3],
    pub horizon: f64,
}

impl VelocityTestFn {
    /// `(φ, ∇φ, ∂tφ)` with `grad[i][j] = ∂j φ_i`.
    pub fn eval(&self, x: [f64; 3], t: f64) -> ([f64; 3], [[f64; 3]; 3], [f64; 3]) {
        let (b, db) = cutoff(t, self.horizon);
        let (a, c) = (self.m * self.k[0], self.n * self.k[1]);
        let (sx, cx) = (a * x[0]).sin_cos();
        let (sy, cy) = (c * x[1]).sin_cos();
        let f = [c * sx * cy, -a * cx * sy, 0.0];
        let mut g = [[0.0; 3]; 3];
        g[0][0] = a * c * cx * cy;
        g[0][1] = -c * c * sx * sy;
        g[1][0] = a * a * sx * sy;
        g[1][1] = -a * c * cx * cy;
        let mut gs = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gs[i][j] = b * g[i][j];
            }
        }
        ([b * f[0], b * f[1], 0.0], gs, [db * f[0], db * f[1], 0.0])
    }
}

/// Vector test field `ψ = b(t) (cos(p kx x), sin(q ky y), r cos(kx x) cos(ky y))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectorTestFn {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub k: [f64; 3],
    pub horizon: f64,
}

impl DirectorTestFn {
    /// `(ψ, ∇ψ, ∂tψ)` with `grad[k][j] = ∂j ψ_k`.
    pub fn eval(&self, x: [f64; 3], t: f64) -> ([f64; 3], [[f64; 3]; 3], [f64; 3]) {
        let (b, db) = cutoff(t, self.horizon);
        let (a, c) = (self.p * self.k[0], self.q * self.k[1]);
        let (sx, cx) = (a * x[0]).sin_cos();
        let (sy, cy) = (c * x[1]).sin_cos();
        let (s1, c1) = (self.k[0] * x[0]).sin_cos();
        let (s2, c2) = (self.k[1] * x[1]).sin_cos();
        let f = [cx, sy, self.r * c1 * c2];
        let mut g = [[0.0; 3]; 3];
        g[0][0] = -a * sx;
        g[1][1] = c * cy;
        g[2][0] = -self.r * self.k[0] * s1 * c2;
        g[2][1] = -self.r * self.k[1] * c1 * s2;
        let mut gs = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gs[i][j] = b * g[i][j];
            }
        }
        ([b * f[0], b * f[1], b * f[2]], gs, [db * f[0], db * f[1], db * f[2]])
    }
}

/// The finite catalog of weak-form test functions for one grid and horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFieldSet {
    pub velocity: Vec<VelocityTestFn>,
    pub director: Vec<DirectorTestFn>,
}

impl TestFieldSet {
    /// Trigonometric test functions of degree at most 3, vanishing at `horizon`.
    pub fn catalog(grid: &Grid, horizon: f64) -> TestFieldSet {
        let k = base_wavenumbers(grid);
        let v = |m: f64, n: f64| VelocityTestFn { m, n, k, horizon };
        let d = |p: f64, q: f64, r: f64| DirectorTestFn { p, q, r, k, horizon };
        TestFieldSet {
            velocity: vec![v(1.0, 1.0), v(2.0, 1.0), v(1.0, 2.0)],
            director: vec![d(1.0, 1.0, 0.0), d(2.0, 1.0, 1.0), d(1.0, 3.0, -0.5)],
        }
    }

    /// Confirms every velocity field is solenoidal and tangential on walls.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for (i, phi) in self.velocity.iter().enumerate() {
            for c in 0..grid.len() {
                let (_, g, _) = phi.eval(grid.center(c), 0.0);
                let div: f64 = (0..grid.dims()).map(|a| g[a][a]).sum();
                if div.abs() > 1e-12 * (1.0 + g[0][0].abs()) {
                    return Err(Error::param("testset", format!("velocity test function {i} is not divergence free")));
                }
            }
            if grid.bc_mode() == BcMode::Walls {
                for a in 0..grid.dims() {
                    for c in 0..grid.len() {
                        if grid.is_wall_face(a, c) {
                            let (v, _, _) = phi.eval(grid.face_center(a, c), 0.0);
                            if v[a].abs() > 1e-12 {
                                return Err(Error::param("testset", format!("velocity test function {i} crosses a wall")));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fields and their first derivatives at one quadrature point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointFields {
    pub u: [f64; 3],
    /// `grad_u[i][j] = ∂j u_i`
    pub grad_u: [[f64; 3]; 3],
    pub d: [f64; 3],
    /// `grad_d[j][k] = ∂j d^k`
    pub grad_d: [[f64; 3]; 3],
    pub mu: f64,
}

/// Velocity weak-form integrand at one point.
pub fn velocity_integrand(dims: usize, p: &PointFields, grad_phi: [[f64; 3]; 3], phi_t: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..dims {
        s += p.u[i] * phi_t[i];
        for j in 0..dims {
            let ericksen: f64 = (0..3).map(|k| p.grad_d[i][k] * p.grad_d[j][k]).sum();
            s += (p.u[i] * p.u[j] - p.mu * p.grad_u[i][j] + ericksen) * grad_phi[i][j];
        }
    }
    s
}

/// Director weak-form integrand at one point; `f` is the bulk force.
pub fn director_integrand(
    dims: usize,
    p: &PointFields,
    f: [f64; 3],
    psi: [f64; 3],
    grad_psi: [[f64; 3]; 3],
    psi_t: [f64; 3],
) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        s += p.d[k] * psi_t[k] - f[k] * psi[k];
        for j in 0..dims {
            s += (p.u[j] * p.d[k] - p.grad_d[j][k]) * grad_psi[k][j];
        }
    }
    s
}

/// Bulk director force `f_ε(d)`, or `-|∇d|² d` for the limit system.
pub fn bulk_force(p: &PointFields, eps: Regularization) -> [f64; 3] {
    match eps {
        Regularization::Finite(e) => gl_force_at(p.d, e),
        Regularization::Limit => {
            let g2: f64 = p.grad_d.iter().flatten().map(|v| v * v).sum();
            [-g2 * p.d[0], -g2 * p.d[1], -g2 * p.d[2]]
        }
    }
}

/// Point fields at every cell centre of a state, with central differences.
pub fn sample_point_fields(state: &State, coeffs: &CoefficientSet) -> Vec<PointFields> {
    let g = *state.grid();
    let dims = g.dims();
    let uc = state.u.to_cell_centers();
    let cg = g.with_staggering(false);
    let grads: Vec<_> = (0..dims)
        .map(|i| central_gradient(&ScalarField::from_values(&cg, uc.comp(i).to_vec()).expect("cell count")))
        .collect();
    let gd = director_gradient(&state.d);
    (0..g.len())
        .map(|c| {
            let mut p = PointFields {
                d: state.d.at(c),
                mu: coeffs.mu_of(state.theta.values()[c]),
                ..Default::default()
            };
            for i in 0..dims {
                p.u[i] = uc.comp(i)[c];
                for j in 0..dims {
                    p.grad_u[i][j] = grads[i].comp(j)[c];
                }
            }
            for j in 0..dims {
                for k in 0..3 {
                    p.grad_d[j][k] = gd.entry(j, k)[c];
                }
            }
            p
        })
        .collect()
}

fn average(a: &[PointFields], b: &[PointFields]) -> Vec<PointFields> {
    let mid = |x: f64, y: f64| 0.5 * (x + y);
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let mut r = PointFields {
                mu: mid(p.mu, q.mu),
                ..Default::default()
            };
            for i in 0..3 {
                r.u[i] = mid(p.u[i], q.u[i]);
                r.d[i] = mid(p.d[i], q.d[i]);
                for j in 0..3 {
                    r.grad_u[i][j] = mid(p.grad_u[i][j], q.grad_u[i][j]);
                    r.grad_d[i][j] = mid(p.grad_d[i][j], q.grad_d[i][j]);
                }
            }
            r
        })
        .collect()
}

/// Weak residual of every test function.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakResiduals {
    pub velocity: Vec<f64>,
    pub director: Vec<f64>,
}

impl WeakResiduals {
    pub fn max_abs(&self) -> f64 {
        self.velocity.iter().chain(&self.director).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Streaming weak-residual evaluation. Point fields may come from a state
/// ([`WeakAccumulator::push_state`]) or from any other source, such as
/// analytic fields in a manufactured-solution study.
#[derive(Clone, Debug)]
pub struct WeakAccumulator {
    grid: Grid,
    set: TestFieldSet,
    eps: Regularization,
    last: Option<(f64, Vec<PointFields>)>,
    acc: WeakResiduals,
}

impl WeakAccumulator {
    pub fn new(grid: &Grid, set: TestFieldSet, eps: Regularization) -> Result<WeakAccumulator> {
        set.validate(grid)?;
        let acc = WeakResiduals {
            velocity: vec![0.0; set.velocity.len()],
            director: vec![0.0; set.director.len()],
        };
        Ok(WeakAccumulator {
            grid: *grid,
            set,
            eps,
            last: None,
            acc,
        })
    }

    pub fn push_state(&mut self, state: &State, coeffs: &CoefficientSet) {
        let pf = sample_point_fields(state, coeffs);
        self.push_points(state.t, pf);
    }

    /// Adds the time level `t`; the first call contributes the initial-data terms.
    pub fn push_points(&mut self, t: f64, pf: Vec<PointFields>) {
        let g = self.grid;
        let vol = g.cell_volume();
        let dims = g.dims();
        match self.last.take() {
            None => {
                for c in 0..g.len() {
                    let x = g.center(c);
                    for (r, phi) in self.acc.velocity.iter_mut().zip(&self.set.velocity) {
                        let (v, _, _) = phi.eval(x, t);
                        *r += vol * (0..dims).map(|i| pf[c].u[i] * v[i]).sum::<f64>();
                    }
                    for (r, psi) in self.acc.director.iter_mut().zip(&self.set.director) {
                        let (v, _, _) = psi.eval(x, t);
                        *r += vol * (0..3).map(|k| pf[c].d[k] * v[k]).sum::<f64>();
                    }
                }
            }
            Some((t0, prev)) => {
                let dt = t - t0;
                let tm = 0.5 * (t0 + t);
                let mid = average(&prev, &pf);
                for (c, p) in mid.iter().enumerate() {
                    let x = g.center(c);
                    for (r, phi) in self.acc.velocity.iter_mut().zip(&self.set.velocity) {
                        let (_, gv, tv) = phi.eval(x, tm);
                        *r += dt * vol * velocity_integrand(dims, p, gv, tv);
                    }
                    let f = bulk_force(p, self.eps);
                    for (r, psi) in self.acc.director.iter_mut().zip(&self.set.director) {
                        let (v, gv, tv) = psi.eval(x, tm);
                        *r += dt * vol * director_integrand(dims, p, f, v, gv, tv);
                    }
                }
            }
        }
        self.last = Some((t, pf));
    }

    pub fn finish(&self) -> WeakResiduals {
        self.acc.clone()
    }
}

/// Weak residuals of a stored trajectory.
pub fn weak_residuals(trajectory: &[State], coeffs: &CoefficientSet, set: &TestFieldSet) -> Result<WeakResiduals> {
    let first = trajectory.first().ok_or_else(|| Error::param("trajectory", "is empty"))?;
    let mut acc = WeakAccumulator::new(first.grid(), set.clone(), first.eps)?;
    for s in trajectory {
        acc.push_state(s, coeffs);
    }
    Ok(acc.finish())
}
