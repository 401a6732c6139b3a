//! Weak entropy inequalities for concave test functions of temperature.
//!
//! With the Fourier flux `q = -k∇θ - h(∇θ·d)d` the inequality reads
//!
//! `∫∫ H ∂tψ + (H u + H' q)·∇ψ + [H' S + H'' q·∇θ] ψ + ∫ H(θ₀) ψ(0) ≤ 0`
//!
//! for `ψ ≥ 0` vanishing at the final time, with `S` the dissipative heat
//! source. The accumulator evaluates every term in the form the discrete
//! heat step satisfies: edge fluxes of the heat operator, upwind face values
//! for transport, and Abel summation in time. The residual is then
//! nonpositive up to linear-solver error for any concave nondecreasing `H`
//! (concavity gap and upwind entropy dissipation are the neglected
//! nonnegative parts), and vanishes for `H(θ) = θ`.

use crate::constitutive::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::solvers::{heat_sources, HeatOperator};
use crate::state::{check_theta, State};

/// Nondecreasing concave test function of temperature, shifted so `H(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConcaveTestFn {
    Identity,
    /// `(1 + θ)^α - 1`, `0 < α < 1`.
    Power { alpha: f64 },
    /// `ln(1 + θ)`
    Log,
}

impl ConcaveTestFn {
    pub fn h(&self, t: f64) -> f64 {
        match *self {
            ConcaveTestFn::Identity => t,
            ConcaveTestFn::Power { alpha } => (1.0 + t).powf(alpha) - 1.0,
            ConcaveTestFn::Log => t.ln_1p(),
        }
    }
    pub fn dh(&self, t: f64) -> f64 {
        match *self {
            ConcaveTestFn::Identity => 1.0,
            ConcaveTestFn::Power { alpha } => alpha * (1.0 + t).powf(alpha - 1.0),
            ConcaveTestFn::Log => 1.0 / (1.0 + t),
        }
    }
    pub fn d2h(&self, t: f64) -> f64 {
        match *self {
            ConcaveTestFn::Identity => 0.0,
            ConcaveTestFn::Power { alpha } => alpha * (alpha - 1.0) * (1.0 + t).powf(alpha - 2.0),
            ConcaveTestFn::Log => -1.0 / ((1.0 + t) * (1.0 + t)),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ConcaveTestFn::Identity => "identity".into(),
            ConcaveTestFn::Power { alpha } => format!("power({alpha})"),
            ConcaveTestFn::Log => "log".into(),
        }
    }

    /// Checks `H' >= 0` and `H'' <= 0` on sampled temperatures.
    pub fn verify(&self) -> Result<()> {
        if let ConcaveTestFn::Power { alpha } = *self {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
            }
        }
        for i in 0..=400 {
            let t = 10f64.powf(-6.0 + 12.0 * i as f64 / 400.0);
            if self.dh(t) < 0.0 || self.d2h(t) > 0.0 {
                return Err(Error::param("H", format!("{} is not nondecreasing and concave at θ = {t:e}", self.name())));
            }
        }
        Ok(())
    }
}

/// The concave functions checked by default: square root and logarithm.
pub const CONCAVE_CATALOG: [ConcaveTestFn; 2] = [ConcaveTestFn::Power { alpha: 0.5 }, ConcaveTestFn::Log];

/// Spatial profile of a nonnegative test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialWeight {
    One,
    /// `1 + cos(2π x₀ / L₀)`
    CosX,
    /// `1 + sin(2π x₀ / L₀) cos(2π x₁ / L₁)`
    SinCos,
}

/// `ψ(x, t) = w(x) (1 - t / horizon)³` for `t < horizon`, zero afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psi2 {
    pub weight: SpatialWeight,
    pub horizon: f64,
    pub scale: f64,
}

impl Psi2 {
    pub fn new(weight: SpatialWeight, horizon: f64) -> Psi2 {
        Psi2 {
            weight,
            horizon,
            scale: 1.0,
        }
    }

    pub fn scaled(self, c: f64) -> Psi2 {
        Psi2 {
            scale: self.scale * c,
            ..self
        }
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            (1.0 - t / self.horizon).powi(3)
        }
    }

    pub fn spatial(&self, grid: &Grid, x: [f64; 3]) -> f64 {
        let ext = grid.extent();
        let w = std::f64::consts::TAU;
        match self.weight {
            SpatialWeight::One => 1.0,
            SpatialWeight::CosX => 1.0 + (w * x[0] / ext[0]).cos(),
            SpatialWeight::SinCos => 1.0 + (w * x[0] / ext[0]).sin() * (w * x[1] / ext[1]).cos(),
        }
    }

    /// Cell-centre samples at time `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let b = self.scale * self.time_factor(t);
        (0..grid.len()).map(|c| b * self.spatial(grid, grid.center(c))).collect()
    }
}

/// Three nonnegative test functions supported in `[0, horizon)`.
pub fn psi2_catalog(horizon: f64) -> [Psi2; 3] {
    [
        Psi2::new(SpatialWeight::One, horizon),
        Psi2::new(SpatialWeight::CosX, horizon),
        Psi2::new(SpatialWeight::SinCos, horizon),
    ]
}

/// Accumulated terms of one entropy inequality.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EntropyResidual {
    /// `∫∫ H ∂tψ - ∫ H(θ(T))ψ(T)`; the last part vanishes once the run
    /// reaches the support of `ψ`.
    pub time_term: f64,
    /// `∫ H(θ₀)ψ(0)`
    pub initial_term: f64,
    /// `∫∫ H'(θ) S ψ`
    pub source_term: f64,
    /// `∫∫ H u·∇ψ`
    pub convective_term: f64,
    /// `∫∫ H' q·∇ψ`
    pub flux_term: f64,
    /// `∫∫ H'' q·∇θ ψ`, nonnegative
    pub curvature_term: f64,
}

impl EntropyResidual {
    /// Left minus right side; nonpositive when the inequality holds.
    pub fn residual(&self) -> f64 {
        self.time_term + self.initial_term + self.source_term + self.convective_term + self.flux_term + self.curvature_term
    }
    /// Magnitude of the largest term.
    pub fn scale(&self) -> f64 {
        [
            self.time_term,
            self.initial_term,
            self.source_term,
            self.convective_term,
            self.flux_term,
            self.curvature_term,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }
    /// `residual <= rel_tol * scale`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.residual() <= rel_tol * self.scale()
    }
}

/// Streaming evaluation of one (H, ψ) entropy inequality along a run.
#[derive(Clone, Debug)]
pub struct EntropyAccumulator {
    pub h: ConcaveTestFn,
    pub psi: Psi2,
    acc: EntropyResidual,
    started: bool,
    tail: f64,
}

impl EntropyAccumulator {
    pub fn new(h: ConcaveTestFn, psi: Psi2) -> Result<EntropyAccumulator> {
        h.verify()?;
        if !(psi.scale >= 0.0) {
            return Err(Error::param("psi2", "test function must be nonnegative"));
        }
        Ok(EntropyAccumulator {
            h,
            psi,
            acc: EntropyResidual::default(),
            started: false,
            tail: 0.0,
        })
    }

    /// Adds one step with coefficients frozen at `prev.theta`.
    pub fn step(&mut self, prev: &State, next: &State, coeffs: &CoefficientSet, dt: f64) -> Result<()> {
        self.step_lagged(prev, next, &prev.theta, coeffs, dt)
    }

    /// Adds one step whose heat operator froze the coefficients at `theta_lag`.
    pub fn step_lagged(
        &mut self,
        prev: &State,
        next: &State,
        theta_lag: &ScalarField,
        coeffs: &CoefficientSet,
        dt: f64,
    ) -> Result<()> {
        check_theta(&prev.theta)?;
        check_theta(&next.theta)?;
        let g = *prev.grid();
        let vol = g.cell_volume();
        let h = self.h;
        let th0 = prev.theta.values();
        let th1 = next.theta.values();
        let psi0 = self.psi.sample(&g, prev.t);
        let psi1 = self.psi.sample(&g, next.t);
        if !self.started {
            self.acc.initial_term = vol * th0.iter().zip(&psi0).map(|(t, p)| h.h(*t) * p).sum::<f64>();
            self.started = true;
        }
        self.acc.time_term += vol * th0.iter().zip(psi0.iter().zip(&psi1)).map(|(t, (a, b))| h.h(*t) * (b - a)).sum::<f64>();
        self.tail = vol * th1.iter().zip(&psi1).map(|(t, p)| h.h(*t) * p).sum::<f64>();

        let mu = coeffs.mu_field(theta_lag);
        let source = heat_sources(&next.u, &next.d, &mu, next.eps);
        let op = HeatOperator::new(theta_lag, &next.u, &next.d, coeffs, dt)?;
        let dh: Vec<f64> = th1.iter().map(|t| h.dh(*t)).collect();
        self.acc.source_term += dt * vol * (0..g.len()).map(|c| dh[c] * source.values()[c] * psi1[c]).sum::<f64>();
        let mut conv = 0.0;
        for &(c, f, w) in &op.faces {
            let up = if w > 0.0 { c } else { f };
            conv += w * h.h(th1[up]) * (psi1[f] - psi1[c]);
        }
        self.acc.convective_term += dt * vol * conv;
        let (mut flux, mut curv) = (0.0, 0.0);
        for &(c, n, gm) in &op.edges {
            let dth = th1[n] - th1[c];
            flux -= gm * dth * 0.5 * (dh[c] + dh[n]) * (psi1[n] - psi1[c]);
            curv -= gm * dth * (dh[n] - dh[c]) * 0.5 * (psi1[c] + psi1[n]);
        }
        self.acc.flux_term += dt * vol * flux;
        self.acc.curvature_term += dt * vol * curv;
        Ok(())
    }

    /// Terms so far, closing the time sum at the last state added.
    pub fn finish(&self) -> EntropyResidual {
        let mut r = self.acc;
        r.time_term -= self.tail;
        r
    }
}

/// Entropy inequality over a stored trajectory of states spaced `dt` apart,
/// coefficients frozen at the older state of each step.
pub fn entropy_inequality_residual(
    trajectory: &[State],
    h: ConcaveTestFn,
    psi: Psi2,
    coeffs: &CoefficientSet,
) -> Result<EntropyResidual> {
    if trajectory.len() < 2 {
        return Err(Error::param("trajectory", "needs at least two states"));
    }
    let mut acc = EntropyAccumulator::new(h, psi)?;
    for w in trajectory.windows(2) {
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) {
            return Err(Error::param("trajectory", "times must increase"));
        }
        acc.step(&w[0], &w[1], coeffs, dt)?;
    }
    Ok(acc.finish())
}
