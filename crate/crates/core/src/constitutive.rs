//! Pointwise constitutive laws: material coefficients, the Ginzburg-Landau
//! potential and force, Fourier heat flux, entropy and free energy, the
//! entropy production and the energy flux.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    central_gradient, director_grad_sq, director_gradient, director_laplacian, DirectorField, ScalarField,
    VectorField,
};
use crate::ops;
use crate::state::{check_eps, check_theta, Regularization, State};

/// A concrete temperature dependence for one material coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    /// `clamp(a + b theta, lo, hi)`
    AffineClamped { a: f64, b: f64, lo: f64, hi: f64 },
    /// `c0 + c1 / (1 + theta)`
    Rational { c0: f64, c1: f64 },
}

impl CoefficientSpec {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            CoefficientSpec::Constant { value } => value,
            CoefficientSpec::AffineClamped { a, b, lo, hi } => (a + b * theta).clamp(lo, hi),
            CoefficientSpec::Rational { c0, c1 } => c0 + c1 / (1.0 + theta),
        }
    }

    /// `d/dθ` of [`eval`](Self::eval); one-sided at the clamp corners.
    pub fn derivative(&self, theta: f64) -> f64 {
        match *self {
            CoefficientSpec::Constant { .. } => 0.0,
            CoefficientSpec::AffineClamped { a, b, lo, hi } => {
                let v = a + b * theta;
                if v > lo && v < hi {
                    b
                } else {
                    0.0
                }
            }
            CoefficientSpec::Rational { c1, .. } => -c1 / ((1.0 + theta) * (1.0 + theta)),
        }
    }

    /// Exact range over `theta > 0`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            CoefficientSpec::Constant { value } => (value, value),
            CoefficientSpec::AffineClamped { a, b, lo, hi } => {
                let at0 = (a).clamp(lo, hi);
                let far = if b > 0.0 {
                    hi
                } else if b < 0.0 {
                    lo
                } else {
                    at0
                };
                (at0.min(far), at0.max(far))
            }
            CoefficientSpec::Rational { c0, c1 } => ((c0).min(c0 + c1), (c0).max(c0 + c1)),
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let ok = match *self {
            CoefficientSpec::Constant { value } => value.is_finite(),
            CoefficientSpec::AffineClamped { a, b, lo, hi } => {
                a.is_finite() && b.is_finite() && lo.is_finite() && hi.is_finite() && lo <= hi
            }
            CoefficientSpec::Rational { c0, c1 } => c0.is_finite() && c1.is_finite(),
        };
        if !ok {
            return Err(Error::param(name, format!("malformed coefficient {self:?}")));
        }
        let (lo, _) = self.range();
        if !(lo > 0.0) {
            return Err(Error::param(name, format!("coefficient must stay positive, lower bound is {lo}")));
        }
        Ok(())
    }
}

/// The material functions `mu`, `k`, `h` of temperature together with
/// their certified bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientSet {
    pub mu: CoefficientSpec,
    pub k: CoefficientSpec,
    pub h: CoefficientSpec,
    pub mu_low: f64,
    pub mu_high: f64,
    pub k_low: f64,
    pub k_high: f64,
}

/// Sample temperatures used to certify the bounds.
fn sample_thetas() -> impl Iterator<Item = f64> {
    (0..=1200).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 1200.0))
}

impl CoefficientSet {
    /// Builds the set, deriving the bounds and checking them by sampling
    /// `theta` on `[1e-6, 1e6]`.
    pub fn new(mu: CoefficientSpec, k: CoefficientSpec, h: CoefficientSpec) -> Result<Self> {
        mu.validate("mu")?;
        k.validate("k")?;
        h.validate("h")?;
        let (mu_low, mu_high) = mu.range();
        let (kl, kh) = k.range();
        let (hl, hh) = h.range();
        let set = CoefficientSet {
            mu,
            k,
            h,
            mu_low,
            mu_high,
            k_low: kl.min(hl),
            k_high: kh.max(hh),
        };
        set.verify()?;
        Ok(set)
    }

    pub fn constant(mu: f64, k: f64, h: f64) -> Result<Self> {
        CoefficientSet::new(
            CoefficientSpec::Constant { value: mu },
            CoefficientSpec::Constant { value: k },
            CoefficientSpec::Constant { value: h },
        )
    }

    /// Re-checks the declared bounds on the sampling grid.
    pub fn verify(&self) -> Result<()> {
        if !(self.mu_low > 0.0 && self.k_low > 0.0) {
            return Err(Error::param("coefficients", "bounds must be strictly positive"));
        }
        let tol = 1e-14;
        for t in sample_thetas() {
            let m = self.mu.eval(t);
            if !(m >= self.mu_low * (1.0 - tol) && m <= self.mu_high * (1.0 + tol)) {
                return Err(Error::param("mu", format!("mu({t:e}) = {m} outside [{}, {}]", self.mu_low, self.mu_high)));
            }
            for (name, v) in [("k", self.k.eval(t)), ("h", self.h.eval(t))] {
                if !(v >= self.k_low * (1.0 - tol) && v <= self.k_high * (1.0 + tol)) {
                    return Err(Error::param(
                        name,
                        format!("{name}({t:e}) = {v} outside [{}, {}]", self.k_low, self.k_high),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn mu_of(&self, theta: f64) -> f64 {
        self.mu.eval(theta)
    }
    pub fn k_of(&self, theta: f64) -> f64 {
        self.k.eval(theta)
    }
    pub fn h_of(&self, theta: f64) -> f64 {
        self.h.eval(theta)
    }

    pub fn mu_field(&self, theta: &ScalarField) -> Vec<f64> {
        theta.values().iter().map(|&t| self.mu.eval(t)).collect()
    }
}

#[inline]
pub fn gl_potential_at(d: [f64; 3], eps: f64) -> f64 {
    let s = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0;
    s * s / (4.0 * eps * eps)
}

#[inline]
pub fn gl_force_at(d: [f64; 3], eps: f64) -> [f64; 3] {
    let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0) / (eps * eps);
    [s * d[0], s * d[1], s * d[2]]
}

/// `F_eps(d) = (|d|^2 - 1)^2 / (4 eps^2)`
pub fn gl_potential(d: &DirectorField, eps: f64) -> Result<ScalarField> {
    check_eps(eps)?;
    let g = d.grid();
    let v = (0..g.len()).map(|c| gl_potential_at(d.at(c), eps)).collect();
    ScalarField::from_values(g, v)
}

/// `f_eps(d) = (|d|^2 - 1) d / eps^2`
pub fn gl_force(d: &DirectorField, eps: f64) -> Result<DirectorField> {
    check_eps(eps)?;
    let g = d.grid();
    let mut out = DirectorField::constant(g, [0.0; 3]);
    for c in 0..g.len() {
        out.set(c, gl_force_at(d.at(c), eps));
    }
    Ok(out)
}

/// Penalty energy density, identically zero for the limit system.
pub fn penalty_density(d: &DirectorField, eps: Regularization) -> ScalarField {
    match eps {
        Regularization::Finite(e) => gl_potential(d, e).unwrap_or_else(|_| ScalarField::zeros(d.grid())),
        Regularization::Limit => ScalarField::zeros(d.grid()),
    }
}

/// Director chemical potential: `Δd − f_eps(d)`, or `Δd + |∇d|² d` in the
/// limit. With the face-split `|∇d|²` the limit potential is exactly
/// orthogonal to `d` wherever `|d| = 1`.
pub fn director_potential(d: &DirectorField, eps: Regularization) -> DirectorField {
    let mut m = director_laplacian(d);
    let g = d.grid();
    match eps {
        Regularization::Finite(e) => {
            for c in 0..g.len() {
                let f = gl_force_at(d.at(c), e);
                let l = m.at(c);
                m.set(c, [l[0] - f[0], l[1] - f[1], l[2] - f[2]]);
            }
        }
        Regularization::Limit => {
            let gs = director_grad_sq(d);
            for c in 0..g.len() {
                let dc = d.at(c);
                let l = m.at(c);
                let s = gs.values()[c];
                m.set(c, [l[0] + s * dc[0], l[1] + s * dc[1], l[2] + s * dc[2]]);
            }
        }
    }
    m
}

/// Generalized Fourier law `q = -k(θ)∇θ - h(θ)(∇θ·d)d` at cell centres.
pub fn heat_flux(theta: &ScalarField, d: &DirectorField, coeffs: &CoefficientSet) -> Result<VectorField> {
    check_theta(theta)?;
    if theta.grid() != d.grid() {
        return Err(Error::FieldMismatch("theta and d live on different grids".into()));
    }
    let g = *theta.grid();
    let grad = central_gradient(&theta);
    let dims = g.dims();
    let mut comps = vec![vec![0.0; g.len()]; dims];
    for c in 0..g.len() {
        let t = theta.values()[c];
        let (k, h) = (coeffs.k_of(t), coeffs.h_of(t));
        let dc = d.at(c);
        let gd: f64 = (0..dims).map(|a| grad.comp(a)[c] * dc[a]).sum();
        for a in 0..dims {
            comps[a][c] = -k * grad.comp(a)[c] - h * gd * dc[a];
        }
    }
    VectorField::from_components(&g, comps, false)
}

/// Entropy flux `g = q / θ`.
pub fn entropy_flux(theta: &ScalarField, q: &VectorField) -> Result<VectorField> {
    check_theta(theta)?;
    let mut out = q.clone();
    for a in 0..q.dims() {
        for (v, t) in out.comp_mut(a).iter_mut().zip(theta.values()) {
            *v /= t;
        }
    }
    Ok(out)
}

/// Entropy production
/// `(1/θ)(μ|∇u|² + |μ_d|² + k|∇θ|² + h(∇θ·d)²)` with `μ_d` the director
/// chemical potential, assembled term by term so it is nonnegative by
/// construction.
pub fn entropy_production(state: &State, coeffs: &CoefficientSet) -> Result<ScalarField> {
    check_theta(&state.theta)?;
    let g = *state.grid();
    let mu = coeffs.mu_field(&state.theta);
    let visc = ops::viscous_density(&state.u, &mu);
    let m = director_potential(&state.d, state.eps);
    let grad = central_gradient(&state.theta);
    let mut out = vec![0.0; g.len()];
    for c in 0..g.len() {
        let t = state.theta.values()[c];
        let mc = m.at(c);
        let dc = state.d.at(c);
        let mut g2 = 0.0;
        let mut gd = 0.0;
        for a in 0..g.dims() {
            let ga = grad.comp(a)[c];
            g2 += ga * ga;
            gd += ga * dc[a];
        }
        let s = visc.values()[c]
            + (mc[0] * mc[0] + mc[1] * mc[1] + mc[2] * mc[2])
            + coeffs.k_of(t) * g2
            + coeffs.h_of(t) * gd * gd;
        out[c] = s / t;
    }
    ScalarField::from_values(&g, out)
}

/// `η = 1 + ln θ`
pub fn entropy_density(theta: &ScalarField) -> Result<ScalarField> {
    check_theta(theta)?;
    Ok(theta.map(|t| 1.0 + t.ln()))
}

/// Free energy, internal energy and entropy densities at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermoPointState {
    pub psi: ScalarField,
    pub e_int: ScalarField,
    pub eta: ScalarField,
}

pub fn free_energy_density(state: &State) -> Result<ThermoPointState> {
    let eta = entropy_density(&state.theta)?;
    let mech = {
        let gs = director_grad_sq(&state.d);
        let pen = penalty_density(&state.d, state.eps);
        let v: Vec<f64> = gs.values().iter().zip(pen.values()).map(|(a, b)| 0.5 * a + b).collect();
        v
    };
    let g = state.grid();
    let th = state.theta.values();
    let psi: Vec<f64> = mech.iter().zip(th).map(|(m, &t)| m - t * t.ln()).collect();
    let e_int: Vec<f64> = mech.iter().zip(th).map(|(m, &t)| m + t).collect();
    Ok(ThermoPointState {
        psi: ScalarField::from_values(g, psi)?,
        e_int: ScalarField::from_values(g, e_int)?,
        eta,
    })
}

/// Energy flux `Σ = P u − μ ∇(|u|²/2) + (∇d ⊙ ∇d) u − (∇d)ᵀ Dd/Dt` at cell
/// centres, one component per axis.
pub fn sigma_flux(state: &State, d_material_derivative: &DirectorField, coeffs: &CoefficientSet) -> Result<VectorField> {
    let g = *state.grid();
    let dims = g.dims();
    let uc = state.u.to_cell_centers();
    let mut u2 = vec![0.0; g.len()];
    for a in 0..dims {
        for (s, v) in u2.iter_mut().zip(uc.comp(a)) {
            *s += v * v;
        }
    }
    let cg = g.with_staggering(false);
    let grad_u2 = central_gradient(&ScalarField::from_values(&cg, u2)?);
    let gd = director_gradient(&state.d);
    let mut comps = vec![vec![0.0; g.len()]; dims];
    for c in 0..g.len() {
        let mu = coeffs.mu_of(state.theta.values()[c]);
        let p = state.p.values()[c];
        let dm = d_material_derivative.at(c);
        for j in 0..dims {
            let mut s = p * uc.comp(j)[c] - mu * 0.5 * grad_u2.comp(j)[c];
            for i in 0..dims {
                let gij: f64 = (0..3).map(|k| gd.entry(j, k)[c] * gd.entry(i, k)[c]).sum();
                s += gij * uc.comp(i)[c];
            }
            s -= (0..3).map(|k| gd.entry(j, k)[c] * dm[k]).sum::<f64>();
            comps[j][c] = s;
        }
    }
    VectorField::from_components(&g, comps, false)
}
