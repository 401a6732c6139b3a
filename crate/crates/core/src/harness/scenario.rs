use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constitutive::{CoefficientSet, CoefficientSpec};
use crate::error::{Error, Result};
use crate::grid::{BcMode, DirectorField, Grid, ScalarField, VectorField};
use crate::linalg::SolveOptions;
use crate::solvers::{project_divergence_free, StepParams};
use crate::state::{Regularization, State};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extent: Vec<f64>,
    pub resolution: Vec<usize>,
    pub bc: BcMode,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(&self.extent, &self.resolution, self.bc, true)
    }
}

/// Initial velocity; every preset is projected onto discretely solenoidal fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityPreset {
    Zero,
    /// `A (sin x cos y, -cos x sin y)` in scaled coordinates (times `cos z` in 3D).
    TaylorGreen { amplitude: f64 },
    /// Curl of `A sin²(πx/Lx) sin²(πy/Ly)`; vanishes on the box boundary.
    WallVortex { amplitude: f64 },
    /// `A (sin y, 0)` in scaled coordinates.
    Shear { amplitude: f64 },
}

/// Initial director.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectorPreset {
    Constant { d: [f64; 3] },
    /// `(sin a cos b, sin a sin b, cos a)` with `a = base + amp sin x sin y`
    /// and `b = x + y` in scaled coordinates; in the upper hemisphere when
    /// `base + |amp| <= π/2`.
    TiltedHemisphere { base: f64, amp: f64 },
    /// `(cos α, sin α, 0)` with `α = amp sin x`: a map into the equator.
    Equator { amp: f64 },
}

/// Initial temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemperaturePreset {
    Constant { value: f64 },
    /// `base + amplitude cos x cos y` in scaled coordinates.
    Bump { base: f64, amplitude: f64 },
}

impl TemperaturePreset {
    /// Exact infimum of the preset.
    pub fn min(&self) -> f64 {
        match *self {
            TemperaturePreset::Constant { value } => value,
            TemperaturePreset::Bump { base, amplitude } => base - amplitude.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub velocity: VelocityPreset,
    pub director: DirectorPreset,
    pub temperature: TemperaturePreset,
    /// Declares that the director starts in the closed upper hemisphere.
    #[serde(default)]
    pub hemisphere: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSpec {
    pub mu: CoefficientSpec,
    pub k: CoefficientSpec,
    pub h: CoefficientSpec,
}

impl CoefficientsSpec {
    pub fn constant(mu: f64, k: f64, h: f64) -> CoefficientsSpec {
        CoefficientsSpec {
            mu: CoefficientSpec::Constant { value: mu },
            k: CoefficientSpec::Constant { value: k },
            h: CoefficientSpec::Constant { value: h },
        }
    }
    pub fn build(&self) -> Result<CoefficientSet> {
        CoefficientSet::new(self.mu, self.k, self.h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub coefficients: CoefficientsSpec,
    pub eps: Regularization,
    pub dt: f64,
    pub t_end: f64,
    /// Diagnostics are recorded every `output_stride` steps.
    pub output_stride: usize,
}

/// Map a physical coordinate on axis `a` to `[0, 2π)`.
fn scaled(x: [f64; 3], extent: &[f64]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for a in 0..extent.len() {
        s[a] = 2.0 * PI * x[a] / extent[a];
    }
    s
}

impl Scenario {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn step_params(&self) -> StepParams {
        StepParams::new(self.dt)
    }

    /// Checks the hypotheses on the initial data.
    pub fn validate(&self) -> Result<()> {
        let g = self.grid.build()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config {
                key: "time.dt".into(),
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config {
                key: "time.t_end".into(),
                reason: format!("must be nonnegative, got {}", self.t_end),
            });
        }
        if self.output_stride == 0 {
            return Err(Error::Config {
                key: "output.csv_stride".into(),
                reason: "must be at least 1".into(),
            });
        }
        if let Regularization::Finite(e) = self.eps {
            if !(e > 0.0) {
                return Err(Error::Config {
                    key: "time.eps".into(),
                    reason: format!("must be positive or \"limit\", got {e}"),
                });
            }
        }
        let tmin = self.initial.temperature.min();
        if !(tmin > 0.0) {
            return Err(Error::Config {
                key: "initial.temperature".into(),
                reason: format!("minimum {tmin} violates the hypothesis ess inf θ₀ > 0"),
            });
        }
        self.coefficients.build().map_err(|e| Error::Config {
            key: "coefficients".into(),
            reason: e.to_string(),
        })?;
        if matches!(self.initial.velocity, VelocityPreset::WallVortex { .. }) && g.bc_mode() != BcMode::Walls {
            return Err(Error::Config {
                key: "initial.velocity".into(),
                reason: "wall_vortex needs bc = \"walls\"".into(),
            });
        }
        if let DirectorPreset::TiltedHemisphere { base, amp } = self.initial.director {
            let reaches = base + amp.abs();
            if self.initial.hemisphere && (reaches > PI / 2.0 || base - amp.abs() < 0.0) {
                return Err(Error::Config {
                    key: "initial.hemisphere".into(),
                    reason: format!("tilt range [{}, {reaches}] leaves the upper hemisphere", base - amp.abs()),
                });
            }
        }
        if self.initial.hemisphere {
            let d = self.initial_director(&g);
            if d.min_third() < 0.0 {
                return Err(Error::Config {
                    key: "initial.hemisphere".into(),
                    reason: format!("director has third component {} < 0", d.min_third()),
                });
            }
        }
        Ok(())
    }

    pub fn initial_director(&self, g: &Grid) -> DirectorField {
        let ext = g.extent().to_vec();
        match self.initial.director {
            DirectorPreset::Constant { d } => DirectorField::constant(g, d),
            DirectorPreset::TiltedHemisphere { base, amp } => DirectorField::from_fn(g, |x| {
                let s = scaled(x, &ext);
                let a = base + amp * s[0].sin() * s[1].sin();
                let b = s[0] + s[1];
                [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
            }),
            DirectorPreset::Equator { amp } => DirectorField::from_fn(g, |x| {
                let al = amp * scaled(x, &ext)[0].sin();
                [al.cos(), al.sin(), 0.0]
            }),
        }
    }

    pub fn initial_state(&self) -> Result<State> {
        self.validate()?;
        let g = self.grid.build()?;
        let ext = g.extent().to_vec();
        let dims = g.dims();
        let u_raw = match self.initial.velocity {
            VelocityPreset::Zero => VectorField::zeros(&g, true),
            VelocityPreset::TaylorGreen { amplitude } => VectorField::from_fn(&g, true, |x| {
                let s = scaled(x, &ext);
                let z = if dims == 3 { s[2].cos() } else { 1.0 };
                [
                    amplitude * s[0].sin() * s[1].cos() * z,
                    -amplitude * s[0].cos() * s[1].sin() * z,
                    0.0,
                ]
            }),
            VelocityPreset::WallVortex { amplitude } => VectorField::from_fn(&g, true, |x| {
                let (kx, ky) = (PI / ext[0], PI / ext[1]);
                let (sx, sy) = ((kx * x[0]).sin(), (ky * x[1]).sin());
                let (cx, cy) = ((kx * x[0]).cos(), (ky * x[1]).cos());
                [
                    amplitude * sx * sx * 2.0 * ky * sy * cy,
                    -amplitude * sy * sy * 2.0 * kx * sx * cx,
                    0.0,
                ]
            }),
            VelocityPreset::Shear { amplitude } => {
                VectorField::from_fn(&g, true, |x| [amplitude * scaled(x, &ext)[1].sin(), 0.0, 0.0])
            }
        };
        let u = project_divergence_free(&u_raw, SolveOptions::default())?.u;
        let d = self.initial_director(&g);
        let theta = match self.initial.temperature {
            TemperaturePreset::Constant { value } => ScalarField::constant(&g, value),
            TemperaturePreset::Bump { base, amplitude } => ScalarField::from_fn(&g, |x| {
                let s = scaled(x, &ext);
                base + amplitude * s[0].cos() * s[1].cos()
            }),
        };
        let state = State {
            u,
            p: ScalarField::zeros(&g),
            d,
            theta,
            t: 0.0,
            eps: self.eps,
        };
        state.check_admissible()?;
        Ok(state)
    }

    /// Same scenario with another resolution per axis.
    pub fn with_resolution(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.grid.resolution = vec![n; s.grid.resolution.len()];
        s
    }

    pub fn with_eps(&self, eps: Regularization) -> Scenario {
        Scenario { eps, ..self.clone() }
    }

    pub fn with_time(&self, dt: f64, t_end: f64) -> Scenario {
        Scenario { dt, t_end, ..self.clone() }
    }
}

pub const SCENARIO_NAMES: [&str; 5] = [
    "equilibrium",
    "heated-shear-2d",
    "heated-shear-walls",
    "heated-shear-3d",
    "limit-shear-2d",
];

fn shear_coefficients() -> CoefficientsSpec {
    CoefficientsSpec {
        mu: CoefficientSpec::Rational { c0: 0.5, c1: 0.5 },
        k: CoefficientSpec::AffineClamped {
            a: 0.8,
            b: 0.2,
            lo: 0.8,
            hi: 1.5,
        },
        h: CoefficientSpec::Constant { value: 1.0 },
    }
}

fn shear_initial(velocity: VelocityPreset) -> InitialSpec {
    InitialSpec {
        velocity,
        director: DirectorPreset::TiltedHemisphere { base: 0.5, amp: 0.4 },
        temperature: TemperaturePreset::Bump {
            base: 0.75,
            amplitude: 0.25,
        },
        hemisphere: true,
    }
}

/// One of the shipped scenarios, by name.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let tau = 2.0 * PI;
    let s = match name {
        "equilibrium" => Scenario {
            name: name.into(),
            grid: GridSpec {
                extent: vec![1.0, 1.0],
                resolution: vec![16, 16],
                bc: BcMode::Walls,
            },
            initial: InitialSpec {
                velocity: VelocityPreset::Zero,
                director: DirectorPreset::Constant { d: [0.0, 0.0, 1.0] },
                temperature: TemperaturePreset::Constant { value: 1.0 },
                hemisphere: true,
            },
            coefficients: CoefficientsSpec::constant(1.0, 1.0, 1.0),
            eps: Regularization::Finite(0.25),
            dt: 1e-3,
            t_end: 0.1,
            output_stride: 1,
        },
        "heated-shear-2d" => Scenario {
            name: name.into(),
            grid: GridSpec {
                extent: vec![tau, tau],
                resolution: vec![64, 64],
                bc: BcMode::Periodic,
            },
            initial: shear_initial(VelocityPreset::TaylorGreen { amplitude: 1.0 }),
            coefficients: shear_coefficients(),
            eps: Regularization::Finite(0.25),
            dt: 1e-3,
            t_end: 1.0,
            output_stride: 1,
        },
        "heated-shear-walls" => Scenario {
            name: name.into(),
            grid: GridSpec {
                extent: vec![PI, PI],
                resolution: vec![48, 48],
                bc: BcMode::Walls,
            },
            initial: shear_initial(VelocityPreset::WallVortex { amplitude: 1.0 }),
            coefficients: shear_coefficients(),
            eps: Regularization::Finite(0.25),
            dt: 1e-3,
            t_end: 0.5,
            output_stride: 1,
        },
        "heated-shear-3d" => Scenario {
            name: name.into(),
            grid: GridSpec {
                extent: vec![tau, tau, tau],
                resolution: vec![16, 16, 16],
                bc: BcMode::Periodic,
            },
            initial: shear_initial(VelocityPreset::TaylorGreen { amplitude: 1.0 }),
            coefficients: shear_coefficients(),
            eps: Regularization::Finite(0.25),
            dt: 1e-3,
            t_end: 0.2,
            output_stride: 1,
        },
        "limit-shear-2d" => Scenario {
            name: name.into(),
            grid: GridSpec {
                extent: vec![tau, tau],
                resolution: vec![64, 64],
                bc: BcMode::Periodic,
            },
            initial: shear_initial(VelocityPreset::TaylorGreen { amplitude: 1.0 }),
            coefficients: shear_coefficients(),
            eps: Regularization::Limit,
            dt: 1e-3,
            t_end: 0.5,
            output_stride: 1,
        },
        other => {
            return Err(Error::Config {
                key: "scenario".into(),
                reason: format!("unknown scenario `{other}`; known: {}", SCENARIO_NAMES.join(", ")),
            })
        }
    };
    Ok(s)
}
