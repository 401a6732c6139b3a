//! Dense reference implementation of one coupled step.
//!
//! Every operator is assembled as a dense matrix from explicit index
//! arithmetic on cell coordinates (no shared stencil tables), written in
//! operator form: the face gradient `G`, the divergence `-Gᵀ`, the compact
//! Laplacian `-GᵀG`, transport `½ Pᵀ diag(w) G` with `P` the face-to-cell
//! incidence, viscosity `-Σ QᵀWQ` over difference quotients. Linear systems
//! are solved by LU, the singular Poisson problem with a rank-one mean
//! constraint.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{BcMode, DirectorField, Grid, ScalarField, VectorField};
use crate::solvers::{coupled_step, StepParams};
use crate::state::{Regularization, State};

/// Largest discrepancy the comparison tolerates.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

struct Lattice {
    dims: usize,
    n: [usize; 3],
    h: [f64; 3],
    periodic: bool,
    len: usize,
}

impl Lattice {
    fn new(g: &Grid) -> Lattice {
        let dims = g.dims();
        let mut n = [1; 3];
        let mut h = [1.0; 3];
        n[..dims].copy_from_slice(g.resolution());
        h[..dims].copy_from_slice(g.spacing());
        Lattice {
            dims,
            n,
            h,
            periodic: g.bc_mode() == BcMode::Periodic,
            len: n[0] * n[1] * n[2],
        }
    }

    fn coords(&self, i: usize) -> [usize; 3] {
        [i % self.n[0], (i / self.n[0]) % self.n[1], i / (self.n[0] * self.n[1])]
    }

    fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.n[0] * (c[1] + self.n[1] * c[2])
    }

    /// Cell `s` steps away along `a`, if inside the domain.
    fn shift(&self, i: usize, a: usize, s: i64) -> Option<usize> {
        let mut c = self.coords(i);
        let m = self.n[a] as i64;
        let v = c[a] as i64 + s;
        if self.periodic {
            c[a] = v.rem_euclid(m) as usize;
        } else if v < 0 || v >= m {
            return None;
        } else {
            c[a] = v as usize;
        }
        Some(self.index(c))
    }

    /// The forward face of cell `i` along `a` carries an unknown.
    fn dof(&self, a: usize, i: usize) -> bool {
        self.periodic || self.coords(i)[a] + 1 < self.n[a]
    }

    /// Face gradient along `a`: row `i` is the forward face of cell `i`.
    fn gradient(&self, a: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.len, self.len);
        for i in 0..self.len {
            if self.dof(a, i) {
                let f = self.shift(i, a, 1).expect("dof face has a forward cell");
                g[(i, f)] += 1.0 / self.h[a];
                g[(i, i)] -= 1.0 / self.h[a];
            }
        }
        g
    }

    /// Incidence of faces along `a` onto their two cells.
    fn incidence(&self, a: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.len, self.len);
        for i in 0..self.len {
            if self.dof(a, i) {
                p[(i, i)] = 1.0;
                p[(i, self.shift(i, a, 1).unwrap())] = 1.0;
            }
        }
        p
    }
}

struct Operators {
    lat: Lattice,
    grad: Vec<DMatrix<f64>>,
    inc: Vec<DMatrix<f64>>,
    lap: DMatrix<f64>,
}

impl Operators {
    fn new(g: &Grid) -> Operators {
        let lat = Lattice::new(g);
        let grad: Vec<_> = (0..lat.dims).map(|a| lat.gradient(a)).collect();
        let inc: Vec<_> = (0..lat.dims).map(|a| lat.incidence(a)).collect();
        let mut lap = DMatrix::zeros(lat.len, lat.len);
        for ga in &grad {
            lap -= ga.transpose() * ga;
        }
        Operators { lat, grad, inc, lap }
    }

    fn transport(&self, w: &[DVector<f64>]) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.lat.len, self.lat.len);
        for a in 0..self.lat.dims {
            t += 0.5 * self.inc[a].transpose() * DMatrix::from_diagonal(&w[a]) * &self.grad[a];
        }
        t
    }

    fn grad_sq(&self, d: &[DVector<f64>; 3]) -> DVector<f64> {
        let mut s = DVector::zeros(self.lat.len);
        for a in 0..self.lat.dims {
            for dk in d {
                let q = &self.grad[a] * dk;
                s += 0.5 * self.inc[a].transpose() * q.component_mul(&q);
            }
        }
        s
    }

    fn potential(&self, d: &[DVector<f64>; 3], eps: f64) -> [DVector<f64>; 3] {
        let n2 = d[0].component_mul(&d[0]) + d[1].component_mul(&d[1]) + d[2].component_mul(&d[2]);
        let s = n2.map(|v| (v - 1.0) / (eps * eps));
        [0, 1, 2].map(|k| &self.lap * &d[k] - s.component_mul(&d[k]))
    }

    /// `-(∇d)ᵀ m` on faces.
    fn elastic_force(&self, d: &[DVector<f64>; 3], m: &[DVector<f64>; 3]) -> Vec<DVector<f64>> {
        (0..self.lat.dims)
            .map(|a| {
                let mut f = DVector::zeros(self.lat.len);
                for k in 0..3 {
                    f -= (&self.grad[a] * &d[k]).component_mul(&(0.5 * &self.inc[a] * &m[k]));
                }
                f
            })
            .collect()
    }

    /// Conservative central momentum flux divergence.
    fn convection(&self, u: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let lat = &self.lat;
        let face = |a: usize, i: Option<usize>| match i {
            Some(i) if lat.dof(a, i) => u[a][i],
            _ => 0.0,
        };
        (0..lat.dims)
            .map(|j| {
                let mut out = DVector::zeros(lat.len);
                // flux through the cell centre between faces bwd(i) and i
                let normal = |i: usize| {
                    let (l, r) = (face(j, lat.shift(i, j, -1)), face(j, Some(i)));
                    0.5 * (l + r) * 0.5 * (l + r)
                };
                for i in 0..lat.len {
                    if !lat.dof(j, i) {
                        continue;
                    }
                    let f = lat.shift(i, j, 1).unwrap();
                    let mut acc = (normal(f) - normal(i)) / lat.h[j];
                    for l in (0..lat.dims).filter(|&l| l != j) {
                        // flux on the edge between faces i and fwd_l(i)
                        let edge = |c: Option<usize>| match c {
                            None => 0.0,
                            Some(c) => {
                                let w = 0.5 * (face(l, Some(c)) + face(l, lat.shift(c, j, 1)));
                                w * 0.5 * (face(j, Some(c)) + face(j, lat.shift(c, l, 1)))
                            }
                        };
                        acc += (edge(Some(i)) - edge(lat.shift(i, l, -1))) / lat.h[l];
                    }
                    out[i] = acc;
                }
                out
            })
            .collect()
    }

    /// Difference quotients of component `j`: (row, viscosity, cell shares).
    fn quotients(&self, j: usize, mu: &[f64]) -> Vec<(Vec<(usize, f64)>, f64, Vec<(usize, f64)>)> {
        let lat = &self.lat;
        let mut out = Vec::new();
        let hj = lat.h[j];
        for c in 0..lat.len {
            let mut row = Vec::new();
            if lat.dof(j, c) {
                row.push((c, 1.0 / hj));
            }
            if let Some(b) = lat.shift(c, j, -1) {
                if lat.dof(j, b) {
                    row.push((b, -1.0 / hj));
                }
            }
            out.push((row, mu[c], vec![(c, 1.0)]));
        }
        for c in 0..lat.len {
            if !lat.dof(j, c) {
                continue;
            }
            let cj = lat.shift(c, j, 1).unwrap();
            let pair = 0.5 * (mu[c] + mu[cj]);
            for l in (0..lat.dims).filter(|&l| l != j) {
                let hl = lat.h[l];
                match lat.shift(c, l, 1) {
                    Some(p) => {
                        let pj = lat.shift(p, j, 1).unwrap();
                        let m = 0.25 * (mu[c] + mu[cj] + mu[p] + mu[pj]);
                        out.push((
                            vec![(p, 1.0 / hl), (c, -1.0 / hl)],
                            m,
                            vec![(c, 0.25), (cj, 0.25), (p, 0.25), (pj, 0.25)],
                        ));
                    }
                    None => out.push((vec![(c, 2.0 / hl)], pair, vec![(c, 0.25), (cj, 0.25)])),
                }
                if lat.shift(c, l, -1).is_none() {
                    out.push((vec![(c, 2.0 / hl)], pair, vec![(c, 0.25), (cj, 0.25)]));
                }
            }
        }
        out
    }

    fn viscous_matrix(&self, j: usize, mu: &[f64]) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.lat.len, self.lat.len);
        for (row, m, shares) in self.quotients(j, mu) {
            let w = m * shares.iter().map(|s| s.1).sum::<f64>();
            for &(a, qa) in &row {
                for &(b, qb) in &row {
                    v[(a, b)] -= w * qa * qb;
                }
            }
        }
        v
    }

    fn viscous_density(&self, u: &[DVector<f64>], mu: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.lat.len);
        for j in 0..self.lat.dims {
            for (row, m, shares) in self.quotients(j, mu) {
                let q: f64 = row.iter().map(|&(i, v)| v * u[j][i]).sum();
                for (c, s) in shares {
                    out[c] += s * m * q * q;
                }
            }
        }
        out
    }

    /// `I + dt (upwind transport) - dt div(D ∇)` with the monotone edge split.
    fn heat_matrix(&self, theta: &[f64], u: &[DVector<f64>], d: &[DVector<f64>; 3], coeffs: &CoefficientSet, dt: f64) -> Result<DMatrix<f64>> {
        let lat = &self.lat;
        let dims = lat.dims;
        let h = lat.h;
        let n = lat.len;
        let mut axis = vec![[0.0; 3]; n];
        let mut plus = vec![[[0.0; 3]; 3]; n];
        let mut minus = vec![[[0.0; 3]; 3]; n];
        for c in 0..n {
            let (k, hh) = (coeffs.k_of(theta[c]), coeffs.h_of(theta[c]));
            let dc = [d[0][c], d[1][c], d[2][c]];
            let tensor = |a: usize, b: usize| hh * dc[a] * dc[b] + if a == b { k } else { 0.0 };
            for a in 0..dims {
                let off: f64 = (0..dims).filter(|&b| b != a).map(|b| tensor(a, b).abs() * h[a] / h[b]).sum();
                let w = tensor(a, a) - off;
                if w < -1e-12 * tensor(a, a) {
                    return Err(Error::param("k", "anisotropic stencil is not monotone"));
                }
                axis[c][a] = w.max(0.0) / (h[a] * h[a]);
                for b in (0..dims).filter(|&b| b != a) {
                    plus[c][a][b] = tensor(a, b).max(0.0) / (h[a] * h[b]);
                    minus[c][a][b] = (-tensor(a, b)).max(0.0) / (h[a] * h[b]);
                }
            }
        }
        let mut m = DMatrix::identity(n, n);
        let mut couple = |i: usize, j: usize, g: f64| {
            m[(i, i)] += dt * g;
            m[(j, j)] += dt * g;
            m[(i, j)] -= dt * g;
            m[(j, i)] -= dt * g;
        };
        for c in 0..n {
            for a in 0..dims {
                let Some(f) = lat.shift(c, a, 1) else { continue };
                couple(c, f, 0.5 * (axis[c][a] + axis[f][a]));
                for b in (a + 1)..dims {
                    if let Some(up) = lat.shift(f, b, 1) {
                        couple(c, up, 0.5 * (plus[c][a][b] + plus[up][a][b]));
                    }
                    if let Some(down) = lat.shift(f, b, -1) {
                        couple(c, down, 0.5 * (minus[c][a][b] + minus[down][a][b]));
                    }
                }
            }
        }
        for a in 0..dims {
            for c in 0..n {
                if !lat.dof(a, c) {
                    continue;
                }
                let f = lat.shift(c, a, 1).unwrap();
                let w = u[a][c] / h[a];
                let up = if w > 0.0 { c } else { f };
                m[(c, up)] += dt * w;
                m[(f, up)] -= dt * w;
            }
        }
        Ok(m)
    }

    /// Mean-free solution of `GᵀG φ = Gᵀ u`, returned as `(φ, u - Gφ)`.
    fn project(&self, u: &[DVector<f64>]) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        let n = self.lat.len;
        let mut a = DMatrix::from_element(n, n, 1.0 / n as f64);
        let mut rhs = DVector::zeros(n);
        for (ga, ua) in self.grad.iter().zip(u) {
            a += ga.transpose() * ga;
            rhs += ga.transpose() * ua;
        }
        let phi = solve(a, &rhs, "dense projection")?;
        let v = self.grad.iter().zip(u).map(|(ga, ua)| ua - ga * &phi).collect();
        Ok((phi, v))
    }
}

fn solve(a: DMatrix<f64>, b: &DVector<f64>, name: &'static str) -> Result<DVector<f64>> {
    a.lu().solve(b).ok_or(Error::NoConvergence {
        solver: name,
        iterations: 0,
        residual: f64::INFINITY,
        tolerance: 0.0,
    })
}

fn stabilization(eps: f64, dt: f64) -> f64 {
    let e2 = 1.0 / (eps * eps);
    e2.max(2.0 * e2 - 1.0 / dt)
}

/// One coupled step computed with dense matrices. Only the finite
/// regularization with default solver parameters is supported.
pub fn dense_coupled_step(state: &State, coeffs: &CoefficientSet, params: &StepParams) -> Result<State> {
    let eps = state.eps.finite().ok_or_else(|| Error::param("eps", "the dense oracle needs a finite eps"))?;
    if params.max_picard != 1 {
        return Err(Error::param("max_picard", "the dense oracle lags coefficients once"));
    }
    let g = *state.grid();
    let ops = Operators::new(&g);
    let lat = &ops.lat;
    let (n, dims, dt) = (lat.len, lat.dims, params.dt);
    let vec = |v: &[f64]| DVector::from_column_slice(v);
    let u: Vec<DVector<f64>> = (0..dims).map(|a| vec(state.u.comp(a))).collect();
    let d = [0, 1, 2].map(|k| vec(state.d.comp(k)));
    let theta = state.theta.values();

    // director
    let s = params.stabilization.unwrap_or_else(|| stabilization(eps, dt));
    let a = 1.0 + dt * s;
    let t_old = ops.transport(&u);
    let mat = DMatrix::identity(n, n) * a - &ops.lap * dt + &t_old * dt;
    let lu = mat.lu();
    let n2 = d[0].component_mul(&d[0]) + d[1].component_mul(&d[1]) + d[2].component_mul(&d[2]);
    let mut d_new = d.clone();
    for k in 0..3 {
        let rhs = DVector::from_fn(n, |c, _| a * d[k][c] - dt * (n2[c] - 1.0) / (eps * eps) * d[k][c]);
        d_new[k] = lu.solve(&rhs).ok_or_else(|| Error::param("director", "singular dense matrix"))?;
    }
    let m = [0, 1, 2].map(|k| (&d_new[k] - &d[k]) / dt + &t_old * &d_new[k]);

    // momentum
    let mu: Vec<f64> = theta.iter().map(|&t| coeffs.mu_of(t)).collect();
    let force = ops.elastic_force(&d_new, &m);
    let conv = ops.convection(&u);
    let mut u_star = Vec::new();
    for j in 0..dims {
        let mat = DMatrix::identity(n, n) - ops.viscous_matrix(j, &mu) * dt;
        let rhs = DVector::from_fn(n, |c, _| if lat.dof(j, c) { u[j][c] + dt * (force[j][c] - conv[j][c]) } else { 0.0 });
        u_star.push(solve(mat, &rhs, "dense viscous")?);
    }
    let (phi, u_new) = ops.project(&u_star)?;
    let gs = ops.grad_sq(&d_new);
    let p = DVector::from_fn(n, |c, _| {
        let s = d_new[0][c].powi(2) + d_new[1][c].powi(2) + d_new[2][c].powi(2) - 1.0;
        phi[c] / dt - 0.5 * gs[c] - s * s / (4.0 * eps * eps)
    });

    // temperature
    let pot = ops.potential(&d_new, eps);
    let visc = ops.viscous_density(&u_new, &mu);
    let source = DVector::from_fn(n, |c, _| visc[c] + pot[0][c].powi(2) + pot[1][c].powi(2) + pot[2][c].powi(2));
    let hm = ops.heat_matrix(theta, &u_new, &d_new, coeffs, dt)?;
    let th_new = solve(hm, &DVector::from_fn(n, |c, _| theta[c] + dt * source[c]), "dense heat")?;

    Ok(State {
        u: VectorField::from_components(&g, u_new.iter().map(|v| v.as_slice().to_vec()).collect(), true)?,
        p: ScalarField::from_values(&g, p.as_slice().to_vec())?,
        d: DirectorField::from_components(&g, d_new.map(|v| v.as_slice().to_vec()))?,
        theta: ScalarField::from_values(&g, th_new.as_slice().to_vec())?,
        t: state.t + dt,
        eps: state.eps,
    })
}

/// Largest discrepancies between the production step and the dense oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleReport {
    pub velocity: f64,
    pub pressure: f64,
    pub director: f64,
    pub temperature: f64,
}

impl OracleReport {
    pub fn max(&self) -> f64 {
        self.velocity.max(self.pressure).max(self.director).max(self.temperature)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs one step both ways from `state` and reports the discrepancies.
pub fn oracle_compare_state(state: &State, coeffs: &CoefficientSet, params: &StepParams) -> Result<OracleReport> {
    if state.grid().resolution().iter().any(|&n| n > 16) {
        return Err(Error::param("grid", "the dense oracle is limited to 16 cells per axis"));
    }
    let fast = coupled_step(state, coeffs, params)?;
    let dense = dense_coupled_step(state, coeffs, params)?;
    let dims = state.grid().dims();
    Ok(OracleReport {
        velocity: (0..dims).map(|a| max_diff(fast.u.comp(a), dense.u.comp(a))).fold(0.0, f64::max),
        pressure: max_diff(fast.p.values(), dense.p.values()),
        director: (0..3).map(|k| max_diff(fast.d.comp(k), dense.d.comp(k))).fold(0.0, f64::max),
        temperature: max_diff(fast.theta.values(), dense.theta.values()),
    })
}

/// Oracle comparison from a scenario's initial state; a discrepancy above
/// [`ORACLE_TOLERANCE`] is an error.
pub fn oracle_compare(sc: &super::Scenario) -> Result<OracleReport> {
    let state = sc.initial_state()?;
    let coeffs = sc.coefficients.build()?;
    let rep = oracle_compare_state(&state, &coeffs, &sc.step_params())?;
    if !(rep.max() < ORACLE_TOLERANCE) {
        return Err(Error::Violation(format!("dense oracle disagrees by {:.3e}: {rep:?}", rep.max())));
    }
    Ok(rep)
}

/// Random admissible state: projected random velocity, director in the
/// closed upper half of the unit ball, temperature in `[0.5, 1.5]`.
pub fn random_admissible_state(grid: &Grid, amplitude: f64, seed: u64) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = Operators::new(grid);
    let n = grid.len();
    let raw: Vec<DVector<f64>> = (0..grid.dims())
        .map(|a| DVector::from_fn(n, |c, _| if ops.lat.dof(a, c) { rng.gen_range(-amplitude..amplitude) } else { 0.0 }))
        .collect();
    let (_, u) = ops.project(&raw)?;
    let mut d = DirectorField::constant(grid, [0.0; 3]);
    for c in 0..n {
        let z: f64 = rng.gen_range(0.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r: f64 = rng.gen_range(0.6..1.0);
        let s = (1.0 - z * z).sqrt();
        d.set(c, [r * s * phi.cos(), r * s * phi.sin(), r * z]);
    }
    let theta = ScalarField::from_values(grid, (0..n).map(|_| rng.gen_range(0.5..1.5)).collect())?;
    Ok(State {
        u: VectorField::from_components(grid, u.iter().map(|v| v.as_slice().to_vec()).collect(), true)?,
        p: ScalarField::zeros(grid),
        d,
        theta,
        t: 0.0,
        eps: Regularization::Finite(0.25),
    })
}
