//! Faedo-Galerkin construction on the periodic box: discrete solenoidal
//! Fourier modes as the Stokes eigenbasis, the ODE system for the velocity
//! coefficients and its RK4 integration.
//!
//! A mode is `a cos(k·x)` or `a sin(k·x)` sampled at the staggered velocity
//! positions, with `a` orthogonal to the discrete symbol
//! `s_j = 2 sin(k_j h_j / 2) / h_j`. Such a field has zero backward-difference
//! divergence and is an exact eigenvector of the componentwise compact
//! Laplacian with eigenvalue `-|s|^2`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::constitutive::{director_potential, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{vector_inner, DirectorField, Grid, ScalarField, VectorField};
use crate::ops::{self, Stencil, ViscousOp};

#[derive(Clone, Debug)]
pub struct SpectralMode {
    pub field: VectorField,
    pub lambda: f64,
    /// Integer wave numbers of the generating Fourier mode.
    pub wavenumber: [i64; 3],
}

#[derive(Clone, Debug)]
pub struct SpectralBasis {
    grid: Grid,
    modes: Vec<SpectralMode>,
}

impl SpectralBasis {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn modes(&self) -> &[SpectralMode] {
        &self.modes
    }
    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// `<φ_i, φ_j>` for all pairs.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        let mut out = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                let v = vector_inner(&self.modes[i].field, &self.modes[j].field).expect("same grid");
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }

    /// Coefficients `g_i = <u, φ_i>` of the orthogonal projection.
    pub fn project(&self, u: &VectorField) -> Result<Vec<f64>> {
        self.modes.iter().map(|m| vector_inner(u, &m.field)).collect()
    }

    /// `Σ g_i φ_i`.
    pub fn reconstruct(&self, g: &[f64]) -> Result<VectorField> {
        if g.len() != self.len() {
            return Err(Error::FieldMismatch(format!(
                "{} coefficients for a basis of {} modes",
                g.len(),
                self.len()
            )));
        }
        let mut u = VectorField::zeros(&self.grid, true);
        for (gi, mode) in g.iter().zip(&self.modes) {
            for a in 0..self.grid.dims() {
                for (x, y) in u.comp_mut(a).iter_mut().zip(mode.field.comp(a)) {
                    *x += gi * y;
                }
            }
        }
        Ok(u)
    }
}

/// Orthonormal complement of `s` in `R^dims` (empty when `s` is zero).
fn complement(s: [f64; 3], dims: usize) -> Vec<[f64; 3]> {
    let ns = (0..dims).map(|a| s[a] * s[a]).sum::<f64>().sqrt();
    if ns == 0.0 {
        return (0..dims)
            .map(|a| {
                let mut e = [0.0; 3];
                e[a] = 1.0;
                e
            })
            .collect();
    }
    let u = [s[0] / ns, s[1] / ns, s[2] / ns];
    if dims == 2 {
        return vec![[-u[1], u[0], 0.0]];
    }
    // two orthonormal vectors orthogonal to u
    let pick = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = pick[0] * u[0] + pick[1] * u[1] + pick[2] * u[2];
    let mut a = [pick[0] - dot * u[0], pick[1] - dot * u[1], pick[2] - dot * u[2]];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    a = [a[0] / na, a[1] / na, a[2] / na];
    let b = [
        u[1] * a[2] - u[2] * a[1],
        u[2] * a[0] - u[0] * a[2],
        u[0] * a[1] - u[1] * a[0],
    ];
    vec![a, b]
}

/// All discrete solenoidal modes, including the constant flows when
/// `with_mean` is set, sorted by eigenvalue.
fn enumerate_modes(grid: &Grid, with_mean: bool, limit: Option<usize>) -> Result<Vec<SpectralMode>> {
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid("the Galerkin basis needs a periodic grid".into()));
    }
    if !grid.staggered() {
        return Err(Error::InvalidGrid("the Galerkin basis lives on the staggered layout".into()));
    }
    let dims = grid.dims();
    let res = grid.resolution();
    let h = grid.spacing();
    let ext = grid.extent();
    // wave numbers n_a in (-N/2, N/2]
    let range = |a: usize| -> Vec<i64> {
        if a >= dims {
            return vec![0];
        }
        let n = res[a] as i64;
        ((-(n - 1) / 2)..=(n / 2)).collect()
    };
    let wrap = |a: usize, v: i64| -> i64 {
        if a >= dims {
            return 0;
        }
        let n = res[a] as i64;
        let mut w = v.rem_euclid(n);
        if w > n / 2 {
            w -= n;
        }
        w
    };
    let mut groups: BTreeMap<(u64, [i64; 3]), Vec<[i64; 3]>> = BTreeMap::new();
    let mut lambda_of = BTreeMap::new();
    for n0 in range(0) {
        for n1 in range(1) {
            for n2 in range(2) {
                let n = [n0, n1, n2];
                let neg = [wrap(0, -n0), wrap(1, -n1), wrap(2, -n2)];
                let key_n = if n <= neg { n } else { neg };
                let mut s = [0.0; 3];
                for a in 0..dims {
                    let k = 2.0 * std::f64::consts::PI * n[a] as f64 / ext[a];
                    s[a] = 2.0 * (k * h[a] / 2.0).sin() / h[a];
                }
                let lambda: f64 = s.iter().map(|v| v * v).sum();
                if lambda == 0.0 && !with_mean {
                    continue;
                }
                let key = (lambda.to_bits(), key_n);
                let e = groups.entry(key).or_default();
                if !e.contains(&n) {
                    e.push(n);
                }
                lambda_of.insert(key, lambda);
            }
        }
    }
    // order groups by eigenvalue, then wave number
    let mut keys: Vec<_> = groups.keys().cloned().collect();
    keys.sort_by(|x, y| {
        let (lx, ly) = (lambda_of[x], lambda_of[y]);
        lx.partial_cmp(&ly).unwrap().then(x.1.cmp(&y.1))
    });
    let mut modes: Vec<SpectralMode> = Vec::new();
    for key in keys {
        if let Some(l) = limit {
            if modes.len() >= l {
                break;
            }
        }
        let lambda = lambda_of[&key];
        let mut accepted: Vec<VectorField> = Vec::new();
        for n in &groups[&key] {
            let k: Vec<f64> = (0..dims)
                .map(|a| 2.0 * std::f64::consts::PI * n[a] as f64 / ext[a])
                .collect();
            let mut s = [0.0; 3];
            for a in 0..dims {
                s[a] = 2.0 * (k[a] * h[a] / 2.0).sin() / h[a];
            }
            for a_vec in complement(s, dims) {
                for cosine in [true, false] {
                    let mut f = VectorField::from_fn(grid, true, |_| [0.0; 3]);
                    for j in 0..dims {
                        for c in 0..grid.len() {
                            let x = grid.face_center(j, c);
                            let ph: f64 = (0..dims).map(|a| k[a] * x[a]).sum();
                            f.comp_mut(j)[c] = a_vec[j] * if cosine { ph.cos() } else { ph.sin() };
                        }
                    }
                    for q in &accepted {
                        let p = vector_inner(&f, q)?;
                        f = f.axpy(-p, q);
                    }
                    let nrm = vector_inner(&f, &f)?.sqrt();
                    if nrm > 1e-8 * grid.volume().sqrt() {
                        f = f.scaled(1.0 / nrm);
                        // second pass for orthogonality to round-off
                        for q in &accepted {
                            let p = vector_inner(&f, q)?;
                            f = f.axpy(-p, q);
                        }
                        let nrm = vector_inner(&f, &f)?.sqrt();
                        accepted.push(f.scaled(1.0 / nrm));
                    }
                }
            }
        }
        for f in accepted {
            modes.push(SpectralMode {
                field: f,
                lambda,
                wavenumber: key.1,
            });
        }
    }
    Ok(modes)
}

/// First `m` nonconstant solenoidal modes ordered by eigenvalue.
pub fn build_basis(grid: &Grid, m: usize) -> Result<SpectralBasis> {
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let mut modes = enumerate_modes(grid, false, Some(m))?;
    if modes.len() < m {
        let all = enumerate_modes(grid, false, None)?.len();
        return Err(Error::param("m", format!("{m} modes requested but the grid carries only {all}")));
    }
    modes.truncate(m);
    Ok(SpectralBasis { grid: *grid, modes })
}

/// Every discrete solenoidal mode of the grid, constant flows included:
/// an orthonormal basis of the discretely divergence-free fields.
pub fn build_full_basis(grid: &Grid) -> Result<SpectralBasis> {
    Ok(SpectralBasis {
        grid: *grid,
        modes: enumerate_modes(grid, true, None)?,
    })
}

/// The coefficient ODE `g' = A(g, g) + B g + C`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub basis: SpectralBasis,
    /// `a[i][j][k] = -<C(φ_j) φ_k, φ_i>`.
    pub a: Vec<Vec<Vec<f64>>>,
    /// `b[i][j] = <V(mu) φ_j, φ_i> = -<mu ∇φ_j, ∇φ_i>`.
    pub b: Vec<Vec<f64>>,
    /// `c[i] = <φ_i, -(∇d)ᵀ(Δd - f(d))>`.
    pub c: Vec<f64>,
}

fn convection_tensor(basis: &SpectralBasis) -> Result<Vec<Vec<Vec<f64>>>> {
    let st = Stencil::new(&basis.grid);
    let m = basis.len();
    let mut a = vec![vec![vec![0.0; m]; m]; m];
    for j in 0..m {
        for k in 0..m {
            let ck = ops::convect(&st, &basis.modes[j].field, &basis.modes[k].field);
            for i in 0..m {
                a[i][j][k] = -vector_inner(&ck, &basis.modes[i].field)?;
            }
        }
    }
    Ok(a)
}

fn viscous_matrix(basis: &SpectralBasis, mu: &[f64]) -> Result<Vec<Vec<f64>>> {
    let st = Stencil::new(&basis.grid);
    let op = ViscousOp::new(&st, mu);
    let m = basis.len();
    let mut b = vec![vec![0.0; m]; m];
    for j in 0..m {
        let v = op.apply_field(&basis.modes[j].field);
        for i in 0..m {
            b[i][j] = vector_inner(&v, &basis.modes[i].field)?;
        }
    }
    Ok(b)
}

/// `C_i = <φ_i, -(∇d)ᵀ m>` for a given chemical potential `m`.
pub fn forcing_vector(basis: &SpectralBasis, d: &DirectorField, m: &DirectorField) -> Result<Vec<f64>> {
    let st = Stencil::new(&basis.grid);
    let f = ops::elastic_force(&st, d, m);
    basis.project(&f)
}

/// Assembles `A`, `B(θ_m)` and `C(d_m)`.
pub fn assemble_ode(
    basis: &SpectralBasis,
    d_m: &DirectorField,
    theta_m: &ScalarField,
    coeffs: &CoefficientSet,
    eps: crate::state::Regularization,
) -> Result<GalerkinSystem> {
    if d_m.grid() != &basis.grid || theta_m.grid() != &basis.grid {
        return Err(Error::FieldMismatch("director and temperature must live on the basis grid".into()));
    }
    let a = convection_tensor(basis)?;
    let mut sys = GalerkinSystem {
        basis: basis.clone(),
        a,
        b: Vec::new(),
        c: Vec::new(),
    };
    sys.refresh(d_m, theta_m, coeffs, eps)?;
    Ok(sys)
}

impl GalerkinSystem {
    pub fn m(&self) -> usize {
        self.basis.len()
    }

    /// Re-assembles `B` and `C` from new director and temperature fields.
    pub fn refresh(
        &mut self,
        d_m: &DirectorField,
        theta_m: &ScalarField,
        coeffs: &CoefficientSet,
        eps: crate::state::Regularization,
    ) -> Result<()> {
        self.set_viscosity(theta_m, coeffs)?;
        let pot = director_potential(d_m, eps);
        self.set_forcing(d_m, &pot)
    }

    /// `B` from the viscosity at `θ`.
    pub fn set_viscosity(&mut self, theta: &ScalarField, coeffs: &CoefficientSet) -> Result<()> {
        self.b = viscous_matrix(&self.basis, &coeffs.mu_field(theta))?;
        Ok(())
    }

    /// `C` from a director and a given chemical potential.
    pub fn set_forcing(&mut self, d: &DirectorField, m: &DirectorField) -> Result<()> {
        self.c = forcing_vector(&self.basis, d, m)?;
        Ok(())
    }

    /// `A(g, g)_i = Σ_jk a[i][j][k] g_j g_k`.
    pub fn convection(&self, g: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|ai| {
                ai.iter()
                    .zip(g)
                    .map(|(aij, gj)| gj * aij.iter().zip(g).map(|(x, y)| x * y).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    pub fn rhs(&self, g: &[f64]) -> Vec<f64> {
        let conv = self.convection(g);
        (0..self.m())
            .map(|i| conv[i] + self.b[i].iter().zip(g).map(|(x, y)| x * y).sum::<f64>() + self.c[i])
            .collect()
    }

    /// One classical RK4 step.
    pub fn rk4_step(&self, g: &[f64], dt: f64) -> Vec<f64> {
        let add = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k1 = self.rhs(g);
        let k2 = self.rhs(&add(g, &k1, dt / 2.0));
        let k3 = self.rhs(&add(g, &k2, dt / 2.0));
        let k4 = self.rhs(&add(g, &k3, dt));
        (0..g.len())
            .map(|i| g[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// The semi-implicit step mirroring the grid momentum step:
    /// `(I - dt B) g' = g + dt (A(g, g) + C)`.
    pub fn imex_step(&self, g: &[f64], dt: f64) -> Result<Vec<f64>> {
        let m = self.m();
        let mat = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - dt * self.b[i][j]);
        let conv = self.convection(g);
        let rhs = DVector::from_fn(m, |i, _| g[i] + dt * (conv[i] + self.c[i]));
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence {
                solver: "galerkin imex",
                iterations: 0,
                residual: f64::INFINITY,
                tolerance: 0.0,
            })?;
        Ok(sol.iter().cloned().collect())
    }
}

/// Galerkin trajectory and its growth monitoring.
#[derive(Clone, Debug)]
pub struct GalerkinTrajectory {
    pub times: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    /// Largest `Σ|g|^2 - (|g(0)| + ∫|C|)^2` over the run; nonpositive when
    /// the a-priori envelope holds.
    pub envelope_excess: f64,
}

/// RK4 integration of the coefficient ODE. Before each step `refresh` may
/// update `B` and `C` (it receives the step index, time and current
/// coefficients).
pub fn integrate_galerkin(
    system: &mut GalerkinSystem,
    g0: &[f64],
    dt: f64,
    n_steps: usize,
    mut refresh: impl FnMut(usize, f64, &[f64], &mut GalerkinSystem) -> Result<()>,
) -> Result<GalerkinTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if g0.len() != system.m() {
        return Err(Error::FieldMismatch("initial coefficients do not match the basis".into()));
    }
    let norm = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>();
    let mut g = g0.to_vec();
    let mut times = vec![0.0];
    let mut coefficients = vec![g.clone()];
    let mut c_int = 0.0;
    let g0n = norm(g0).sqrt();
    let mut excess = f64::NEG_INFINITY;
    for n in 0..n_steps {
        let t = n as f64 * dt;
        refresh(n, t, &g, system)?;
        c_int += dt * norm(&system.c).sqrt();
        g = system.rk4_step(&g, dt);
        let e = norm(&g);
        if !(e <= 1e12) {
            return Err(Error::BlowUp { t: t + dt, energy: e });
        }
        let env = (g0n + c_int).powi(2);
        excess = excess.max(e - env);
        times.push(t + dt);
        coefficients.push(g.clone());
    }
    Ok(GalerkinTrajectory {
        times,
        coefficients,
        envelope_excess: excess,
    })
}

/// Reconstructs the velocity `Σ g_i φ_i` of a system.
pub fn reconstruct_velocity(system: &GalerkinSystem, g: &[f64]) -> Result<VectorField> {
    system.basis.reconstruct(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, BcMode};
    use crate::ops::laplacian;
    use std::f64::consts::TAU;

    #[test]
    fn lowest_modes_are_unit_shears() {
        let g = Grid::new(&[TAU, TAU], &[16, 16], BcMode::Periodic, true).unwrap();
        let b = build_basis(&g, 4).unwrap();
        let h = g.spacing()[0];
        let s = 2.0 * (h / 2.0).sin() / h;
        for mode in b.modes() {
            assert!((mode.lambda - s * s).abs() < 1e-14);
            assert!(divergence(&mode.field).max_abs() < 1e-12);
            // one component vanishes: (f(y), 0) or (0, f(x))
            let zero = mode.field.comp(0).iter().all(|v| v.abs() < 1e-14) || mode.field.comp(1).iter().all(|v| v.abs() < 1e-14);
            assert!(zero);
            let st = Stencil::new(&g);
            for j in 0..2 {
                let mut out = vec![0.0; g.len()];
                laplacian(&st, mode.field.comp(j), &mut out);
                for c in 0..g.len() {
                    assert!((out[c] + mode.lambda * mode.field.comp(j)[c]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn full_basis_spans_solenoidal_fields() {
        let g = Grid::new(&[TAU, TAU], &[6, 6], BcMode::Periodic, true).unwrap();
        let b = build_full_basis(&g).unwrap();
        // 2 N^2 face unknowns minus N^2 - 1 independent divergence constraints
        for m in b.modes() {
            assert!(divergence(&m.field).max_abs() < 1e-12);
        }
        assert_eq!(b.len(), 36 + 1);
        let gram = b.gram();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - e).abs() < 1e-12);
            }
        }
        let g3 = Grid::new(&[1.0, 1.0, 1.0], &[4, 4, 4], BcMode::Periodic, true).unwrap();
        assert_eq!(build_full_basis(&g3).unwrap().len(), 3 * 64 - 63);
    }

    #[test]
    fn rejects_walls_and_oversized_m() {
        let g = Grid::new(&[1.0, 1.0], &[4, 4], BcMode::Walls, true).unwrap();
        assert!(build_basis(&g, 2).is_err());
        let g = Grid::new(&[1.0, 1.0], &[4, 4], BcMode::Periodic, true).unwrap();
        assert!(build_basis(&g, 100).is_err());
    }
}
