//! Manufactured-solution order verification.
//!
//! Smooth periodic fields are sampled onto grids of increasing resolution and
//! the discrete residuals are compared with their exact continuous values,
//! obtained by forward-mode differentiation in `(x, y, z, t)`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use crate::audit::{first_law_pointwise_residual, PointFields, TestFieldSet, WeakAccumulator};
use crate::constitutive::{gl_force_at, gl_potential_at, CoefficientSet, CoefficientSpec};
use crate::error::{Error, Result};
use crate::grid::{BcMode, DirectorField, Grid, ScalarField, VectorField};
use crate::state::{Regularization, State};

/// Value and gradient in `(x, y, z, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: [f64; 4],
}

/// Value, gradient and Hessian in `(x, y, z, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 4],
    pub h: [[f64; 4]; 4],
}

impl Jet1 {
    pub fn constant(v: f64) -> Jet1 {
        Jet1 { v, g: [0.0; 4] }
    }

    /// `f(self)` given `f` and `f'` at `self.v`.
    pub fn chain(self, f: f64, df: f64) -> Jet1 {
        Jet1 {
            v: f,
            g: self.g.map(|x| df * x),
        }
    }

    pub fn scale(self, s: f64) -> Jet1 {
        Jet1 {
            v: s * self.v,
            g: self.g.map(|x| s * x),
        }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        Jet1 {
            v: self.v + o.v,
            g: std::array::from_fn(|i| self.g[i] + o.g[i]),
        }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, o: Jet1) -> Jet1 {
        self + (-o)
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        self.scale(-1.0)
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        Jet1 {
            v: self.v * o.v,
            g: std::array::from_fn(|i| self.v * o.g[i] + o.v * self.g[i]),
        }
    }
}

impl Jet2 {
    pub fn constant(v: f64) -> Jet2 {
        Jet2 {
            v,
            ..Default::default()
        }
    }

    /// The coordinate `x_i` itself.
    pub fn variable(value: f64, i: usize) -> Jet2 {
        let mut j = Jet2::constant(value);
        j.g[i] = 1.0;
        j
    }

    /// `f(self)` given `f`, `f'` and `f''` at `self.v`.
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Jet2 {
        Jet2 {
            v: f,
            g: self.g.map(|x| df * x),
            h: std::array::from_fn(|i| std::array::from_fn(|j| df * self.h[i][j] + d2f * self.g[i] * self.g[j])),
        }
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Jet2 {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn scale(self, s: f64) -> Jet2 {
        self.chain(s * self.v, s, 0.0)
    }

    pub fn shift(self, s: f64) -> Jet2 {
        Jet2 { v: self.v + s, ..self }
    }

    /// Value and gradient.
    pub fn first(&self) -> Jet1 {
        Jet1 { v: self.v, g: self.g }
    }

    /// `∂_i` of the field, as a first-order jet.
    pub fn partial(&self, i: usize) -> Jet1 {
        Jet1 {
            v: self.g[i],
            g: self.h[i],
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            g: std::array::from_fn(|i| self.g[i] + o.g[i]),
            h: std::array::from_fn(|i| std::array::from_fn(|j| self.h[i][j] + o.h[i][j])),
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + o.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            g: std::array::from_fn(|i| self.v * o.g[i] + o.v * self.g[i]),
            h: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    self.v * o.h[i][j] + o.v * self.h[i][j] + self.g[i] * o.g[j] + self.g[j] * o.g[i]
                })
            }),
        }
    }
}

/// Jets of all fields at one space-time point.
#[derive(Clone, Copy, Debug)]
pub struct FieldJets {
    pub u: [Jet2; 3],
    pub p: Jet2,
    pub d: [Jet2; 3],
    pub theta: Jet2,
}

/// A smooth, divergence-free, doubly periodic state on `[0, L]²` with a
/// nonunit director and a positive temperature. It solves nothing; the
/// residuals it produces are known exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedFields {
    pub extent: f64,
    pub eps: f64,
}

impl ManufacturedFields {
    pub fn new(extent: f64, eps: f64) -> ManufacturedFields {
        ManufacturedFields { extent, eps }
    }

    pub fn jets(&self, x: [f64; 3], t: f64) -> FieldJets {
        let k = TAU / self.extent;
        let (xs, ys, ts) = (Jet2::variable(x[0], 0), Jet2::variable(x[1], 1), Jet2::variable(t, 3));
        let kx = xs.scale(k);
        let ky = ys.scale(k);
        let decay = ts.scale(-0.5).exp();
        // Stream function a(t) sin(kx) sin(ky), differentiated by hand.
        let amp = decay.scale(0.4 * k);
        let u0 = amp * kx.sin() * ky.cos();
        let u1 = (amp * kx.cos() * ky.sin()).scale(-1.0);
        let p = (kx + ky).cos().scale(0.5) + (kx.scale(2.0) - ts).sin().scale(0.1);
        let phase = kx + ts.scale(0.7);
        let d0 = phase.cos().scale(0.3) * ky.sin().shift(2.0).scale(0.5);
        let d1 = (ky - ts.scale(0.3)).sin().scale(0.25);
        let d2 = (kx.cos() * ky.cos()).scale(0.15).shift(0.9) + ts.scale(0.2).sin().scale(0.05);
        let theta = (kx.sin() * (ky + ts).cos() * decay).scale(0.3).shift(1.0);
        FieldJets {
            u: [u0, u1, Jet2::constant(0.0)],
            p,
            d: [d0, d1, d2],
            theta,
        }
    }

    /// The fields sampled onto a periodic staggered grid at time `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<State> {
        if grid.dims() != 2 || grid.bc_mode() != BcMode::Periodic || !grid.staggered() {
            return Err(Error::param("grid", "manufactured fields need a staggered periodic 2D grid"));
        }
        if grid.extent().iter().any(|&l| (l - self.extent).abs() > 1e-12 * self.extent) {
            return Err(Error::param("grid", format!("extent must be {} on both axes", self.extent)));
        }
        let mut comps = vec![vec![0.0; grid.len()]; 2];
        for (a, comp) in comps.iter_mut().enumerate() {
            for (c, v) in comp.iter_mut().enumerate() {
                *v = self.jets(grid.face_center(a, c), t).u[a].v;
            }
        }
        let u = VectorField::from_components(grid, comps, true)?;
        let p = ScalarField::from_fn(grid, |x| self.jets(x, t).p.v);
        let theta = ScalarField::from_fn(grid, |x| self.jets(x, t).theta.v);
        let d = DirectorField::from_fn(grid, |x| self.jets(x, t).d.map(|j| j.v));
        Ok(State {
            u,
            p,
            d,
            theta,
            t,
            eps: Regularization::Finite(self.eps),
        })
    }

    /// Exact `D e_total/Dt + ∇·(Σ + q)` at `(x, t)`.
    pub fn first_law_residual(&self, x: [f64; 3], t: f64, coeffs: &CoefficientSet) -> f64 {
        let f = self.jets(x, t);
        let dims = 2;
        let u: Vec<Jet1> = (0..dims).map(|i| f.u[i].first()).collect();
        let du = |i: usize, j: usize| f.u[i].partial(j);
        let dd = |j: usize, k: usize| f.d[k].partial(j);
        let theta = f.theta.first();
        let coef = |s: &CoefficientSpec| theta.chain(s.eval(theta.v), s.derivative(theta.v));

        let dv = f.d.map(|j| j.v);
        let force = gl_force_at(dv, self.eps);
        let mut e = theta;
        let mut pen = Jet1::constant(gl_potential_at(dv, self.eps));
        for k in 0..3 {
            pen.g = std::array::from_fn(|i| pen.g[i] + force[k] * f.d[k].g[i]);
        }
        e = e + pen;
        for i in 0..dims {
            e = e + (u[i] * u[i]).scale(0.5);
            for k in 0..3 {
                e = e + (dd(i, k) * dd(i, k)).scale(0.5);
            }
        }
        let de_dt = e.g[3] + (0..dims).map(|j| u[j].v * e.g[j]).sum::<f64>();

        let mat_d: Vec<Jet1> = (0..3)
            .map(|k| (0..dims).fold(f.d[k].partial(3), |s, i| s + u[i] * dd(i, k)))
            .collect();
        let (mu, kc, hc) = (coef(&coeffs.mu), coef(&coeffs.k), coef(&coeffs.h));
        let grad_theta: Vec<Jet1> = (0..dims).map(|j| f.theta.partial(j)).collect();
        let gd = (0..dims).fold(Jet1::constant(0.0), |s, a| s + grad_theta[a] * f.d[a].first());
        let mut div = 0.0;
        for j in 0..dims {
            let mut s = f.p.first() * u[j];
            let half_grad_u2 = (0..dims).fold(Jet1::constant(0.0), |s, i| s + u[i] * du(i, j));
            s = s - mu * half_grad_u2;
            for i in 0..dims {
                let gij = (0..3).fold(Jet1::constant(0.0), |s, k| s + dd(j, k) * dd(i, k));
                s = s + gij * u[i];
            }
            for k in 0..3 {
                s = s - dd(j, k) * mat_d[k];
            }
            let q = -(kc * grad_theta[j]) - hc * gd * f.d[j].first();
            div += (s + q).g[j];
        }
        de_dt + div
    }

    /// Exact point fields for the weak-form integrands.
    pub fn point_fields(&self, x: [f64; 3], t: f64, coeffs: &CoefficientSet) -> PointFields {
        let f = self.jets(x, t);
        let mut p = PointFields {
            mu: coeffs.mu_of(f.theta.v),
            d: f.d.map(|j| j.v),
            ..Default::default()
        };
        for i in 0..2 {
            p.u[i] = f.u[i].v;
            for j in 0..2 {
                p.grad_u[i][j] = f.u[i].g[j];
            }
        }
        for j in 0..2 {
            for k in 0..3 {
                p.grad_d[j][k] = f.d[k].g[j];
            }
        }
        p
    }
}

/// Errors of the discrete residuals against their exact values on one grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedErrors {
    pub n: usize,
    /// Max over cells of the first-law residual error.
    pub first_law: f64,
    /// Max over test functions of the weak residual error.
    pub weak: f64,
}

/// Settings of a manufactured refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedOptions {
    pub extent: f64,
    pub eps: f64,
    /// Time of the first-law evaluation.
    pub t0: f64,
    /// Step of the first-law difference quotient; small so time error is negligible.
    pub first_law_dt: f64,
    pub weak_dt: f64,
    pub weak_horizon: f64,
}

impl Default for ManufacturedOptions {
    fn default() -> Self {
        ManufacturedOptions {
            extent: 1.0,
            eps: 0.5,
            t0: 0.1,
            first_law_dt: 1e-6,
            weak_dt: 1e-3,
            weak_horizon: 0.1,
        }
    }
}

pub fn manufactured_errors(n: usize, coeffs: &CoefficientSet, opts: &ManufacturedOptions) -> Result<ManufacturedErrors> {
    let fields = ManufacturedFields::new(opts.extent, opts.eps);
    let grid = Grid::new(&[opts.extent; 2], &[n, n], BcMode::Periodic, true)?;

    let t1 = opts.t0 + opts.first_law_dt;
    let prev = fields.sample(&grid, opts.t0)?;
    let next = fields.sample(&grid, t1)?;
    let r = first_law_pointwise_residual(&prev, &next, coeffs, opts.first_law_dt)?;
    let first_law = (0..grid.len())
        .map(|c| (r.values()[c] - fields.first_law_residual(grid.center(c), t1, coeffs)).abs())
        .fold(0.0, f64::max);

    let steps = (opts.weak_horizon / opts.weak_dt).round() as usize;
    if steps == 0 {
        return Err(Error::param("weak_horizon", "must cover at least one step"));
    }
    let set = TestFieldSet::catalog(&grid, opts.weak_horizon);
    let eps = Regularization::Finite(opts.eps);
    let mut discrete = WeakAccumulator::new(&grid, set.clone(), eps)?;
    let mut exact = WeakAccumulator::new(&grid, set, eps)?;
    for s in 0..=steps {
        let t = s as f64 * opts.weak_dt;
        discrete.push_state(&fields.sample(&grid, t)?, coeffs);
        exact.push_points(t, (0..grid.len()).map(|c| fields.point_fields(grid.center(c), t, coeffs)).collect());
    }
    let (a, b) = (discrete.finish(), exact.finish());
    let weak = a
        .velocity
        .iter()
        .zip(&b.velocity)
        .chain(a.director.iter().zip(&b.director))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(ManufacturedErrors { n, first_law, weak })
}

/// Error ratios between consecutive resolutions of `ns`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderStudy {
    pub errors: Vec<ManufacturedErrors>,
}

impl OrderStudy {
    pub fn first_law_ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0].first_law / w[1].first_law).collect()
    }
    pub fn weak_ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0].weak / w[1].weak).collect()
    }
}

pub fn manufactured_order_study(ns: &[usize], coeffs: &CoefficientSet, opts: &ManufacturedOptions) -> Result<OrderStudy> {
    let errors = ns.iter().map(|&n| manufactured_errors(n, coeffs, opts)).collect::<Result<_>>()?;
    Ok(OrderStudy { errors })
}
