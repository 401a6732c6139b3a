//! TOML run configuration with sections `[grid]`, `[initial]`,
//! `[coefficients]`, `[time]` and `[output]`. Unknown keys are rejected.
//!
//! ```toml
//! name = "shear"
//!
//! [grid]
//! extent = [6.283185307179586, 6.283185307179586]
//! resolution = [64, 64]
//! bc = "periodic"
//!
//! [initial]
//! velocity = { kind = "taylor_green", amplitude = 1.0 }
//! director = { kind = "tilted_hemisphere", base = 0.5, amp = 0.4 }
//! temperature = { kind = "bump", base = 0.75, amplitude = 0.25 }
//! hemisphere = true
//!
//! [coefficients]
//! mu = 1.0
//! k = { kind = "affine_clamped", a = 0.8, b = 0.2, lo = 0.8, hi = 1.5 }
//! h = 1.0
//!
//! [time]
//! dt = 1e-3
//! t_end = 1.0
//! eps = 0.25
//!
//! [output]
//! dir = "out"
//! csv_stride = 1
//! snapshot_stride = 100
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::constitutive::CoefficientSpec;
use crate::error::{Error, Result};
use crate::harness::{CoefficientsSpec, GridSpec, InitialSpec, Scenario};
use crate::solvers::StepParams;
use crate::state::Regularization;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_EPS: f64 = 0.25;
pub const DEFAULT_T_END: f64 = 0.1;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 100;
pub const DEFAULT_OUTPUT_DIR: &str = "nemthsim-out";

/// Optional overrides of the solver settings in [`StepParams`], read from `[time]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ToleranceOverrides {
    pub stabilization: Option<f64>,
    pub solver_tol: Option<f64>,
    pub projection_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_picard: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// The run itself; `scenario.output_stride` is the CSV stride.
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
    /// Seed for randomly generated states (the `oracle` command).
    pub seed: u64,
    pub tolerances: ToleranceOverrides,
}

impl RunConfig {
    /// A config running `scenario` with default output settings.
    pub fn from_scenario(scenario: Scenario) -> RunConfig {
        RunConfig {
            scenario,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
            seed: 0,
            tolerances: ToleranceOverrides::default(),
        }
    }

    pub fn csv_stride(&self) -> usize {
        self.scenario.output_stride
    }

    pub fn step_params(&self) -> StepParams {
        let mut p = self.scenario.step_params();
        let t = &self.tolerances;
        p.stabilization = t.stabilization.or(p.stabilization);
        p.solver_tol = t.solver_tol.unwrap_or(p.solver_tol);
        p.projection_tol = t.projection_tol.unwrap_or(p.projection_tol);
        p.max_iter = t.max_iter.unwrap_or(p.max_iter);
        p.max_picard = t.max_picard.unwrap_or(p.max_picard);
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.snapshot_stride == 0 {
            return Err(config_err("output.snapshot_stride", "must be at least 1"));
        }
        let t = &self.tolerances;
        for (key, v) in [("time.solver_tol", t.solver_tol), ("time.projection_tol", t.projection_tol)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(config_err(key, format!("must lie in (0, 1), got {v}")));
                }
            }
        }
        if t.max_iter == Some(0) {
            return Err(config_err("time.max_iter", "must be at least 1"));
        }
        if t.max_picard == Some(0) {
            return Err(config_err("time.max_picard", "must be at least 1"));
        }
        if let (Some(s), Regularization::Finite(e)) = (t.stabilization, self.scenario.eps) {
            if s < 1.0 / (e * e) {
                return Err(config_err(
                    "time.stabilization",
                    format!("S = {s} is below 1/eps^2 = {}", 1.0 / (e * e)),
                ));
            }
        }
        Ok(())
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// A coefficient given either as a bare number or as a full spec table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CoefficientInput {
    Value(f64),
    Spec(CoefficientSpec),
}

impl From<CoefficientInput> for CoefficientSpec {
    fn from(c: CoefficientInput) -> Self {
        match c {
            CoefficientInput::Value(value) => CoefficientSpec::Constant { value },
            CoefficientInput::Spec(s) => s,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    mu: CoefficientInput,
    k: CoefficientInput,
    h: CoefficientInput,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum EpsInput {
    Value(f64),
    Word(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default = "default_eps")]
    eps: EpsInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stabilization: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    projection_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_picard: Option<usize>,
}

impl RawTime {
    fn tolerances(&self) -> ToleranceOverrides {
        ToleranceOverrides {
            stabilization: self.stabilization,
            solver_tol: self.solver_tol,
            projection_tol: self.projection_tol,
            max_iter: self.max_iter,
            max_picard: self.max_picard,
        }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_t_end() -> f64 {
    DEFAULT_T_END
}
fn default_eps() -> EpsInput {
    EpsInput::Value(DEFAULT_EPS)
}

impl Default for RawTime {
    fn default() -> Self {
        RawTime {
            dt: DEFAULT_DT,
            t_end: DEFAULT_T_END,
            eps: default_eps(),
            stabilization: None,
            solver_tol: None,
            projection_tol: None,
            max_iter: None,
            max_picard: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    dir: PathBuf,
    #[serde(default = "one")]
    csv_stride: usize,
    #[serde(default = "default_snapshot_stride")]
    snapshot_stride: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}
fn one() -> usize {
    1
}
fn default_snapshot_stride() -> usize {
    DEFAULT_SNAPSHOT_STRIDE
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            dir: default_dir(),
            csv_stride: 1,
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    seed: u64,
    grid: GridSpec,
    initial: InitialSpec,
    coefficients: RawCoefficients,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    output: RawOutput,
}

/// Key path of a TOML error: the enclosing `[section]` plus the field named
/// in the message, when there is one.
fn error_key(text: &str, err: &toml::de::Error) -> String {
    let before = err.span().map_or("", |s| &text[..s.start.min(text.len())]);
    let section = before
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let msg = err.message();
    let field = msg.split('`').nth(1).filter(|f| !f.contains(' '));
    match (section, field) {
        (Some(s), Some(f)) => format!("{s}.{f}"),
        (Some(s), None) => s,
        (None, Some(f)) => f.to_string(),
        (None, None) => "<root>".into(),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        key: error_key(text, &e),
        reason: e.message().to_string(),
    })?;
    let eps = match &raw.time.eps {
        EpsInput::Value(e) => Regularization::Finite(*e),
        EpsInput::Word(w) if w == "limit" => Regularization::Limit,
        EpsInput::Word(w) => return Err(config_err("time.eps", format!("expected a number or \"limit\", got \"{w}\""))),
    };
    let cfg = RunConfig {
        scenario: Scenario {
            name: raw.name.unwrap_or_else(|| "custom".into()),
            grid: raw.grid,
            initial: raw.initial,
            coefficients: CoefficientsSpec {
                mu: raw.coefficients.mu.into(),
                k: raw.coefficients.k.into(),
                h: raw.coefficients.h.into(),
            },
            eps,
            dt: raw.time.dt,
            t_end: raw.time.t_end,
            output_stride: raw.output.csv_stride,
        },
        output_dir: raw.output.dir,
        snapshot_stride: raw.output.snapshot_stride,
        seed: raw.seed,
        tolerances: raw.time.tolerances(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// TOML text that [`parse_config`] maps back to `cfg`.
pub fn emit_config(cfg: &RunConfig) -> Result<String> {
    let sc = &cfg.scenario;
    let raw = RawConfig {
        name: Some(sc.name.clone()),
        seed: cfg.seed,
        grid: sc.grid.clone(),
        initial: sc.initial.clone(),
        coefficients: RawCoefficients {
            mu: CoefficientInput::Spec(sc.coefficients.mu),
            k: CoefficientInput::Spec(sc.coefficients.k),
            h: CoefficientInput::Spec(sc.coefficients.h),
        },
        time: RawTime {
            dt: sc.dt,
            t_end: sc.t_end,
            eps: match sc.eps {
                Regularization::Finite(e) => EpsInput::Value(e),
                Regularization::Limit => EpsInput::Word("limit".into()),
            },
            stabilization: cfg.tolerances.stabilization,
            solver_tol: cfg.tolerances.solver_tol,
            projection_tol: cfg.tolerances.projection_tol,
            max_iter: cfg.tolerances.max_iter,
            max_picard: cfg.tolerances.max_picard,
        },
        output: RawOutput {
            dir: cfg.output_dir.clone(),
            csv_stride: sc.output_stride,
            snapshot_stride: cfg.snapshot_stride,
        },
    };
    toml::to_string(&raw).map_err(|e| config_err("<root>", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
extent = [1.0, 1.0]
resolution = [8, 8]
bc = "walls"

[initial]
velocity = { kind = "zero" }
director = { kind = "constant", d = [0.0, 0.0, 1.0] }
temperature = { kind = "constant", value = 1.0 }

[coefficients]
mu = 1.0
k = 1.0
h = 0.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.scenario.dt, 1e-3);
        assert_eq!(cfg.scenario.eps, Regularization::Finite(0.25));
        assert_eq!(cfg.csv_stride(), 1);
        assert_eq!(cfg.snapshot_stride, DEFAULT_SNAPSHOT_STRIDE);
        assert_eq!(cfg.scenario.coefficients.h, CoefficientSpec::Constant { value: 0.5 });
        assert_eq!(cfg.step_params(), StepParams::new(1e-3));
    }

    #[test]
    fn unknown_keys_name_their_section() {
        let text = MINIMAL.replace("h = 0.5", "h = 0.5\nnu = 2.0");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "coefficients.nu"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[time]\ndtt = 1e-3\n");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "time.dtt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn limit_eps_and_overrides() {
        let text = format!("{MINIMAL}\n[time]\neps = \"limit\"\nmax_picard = 3\nsolver_tol = 1e-10\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.scenario.eps, Regularization::Limit);
        assert_eq!(cfg.step_params().max_picard, 3);
        assert_eq!(cfg.step_params().solver_tol, 1e-10);
        let bad = format!("{MINIMAL}\n[time]\neps = \"zero\"\n");
        assert!(matches!(parse_config(&bad), Err(Error::Config { key, .. }) if key == "time.eps"));
    }

    #[test]
    fn zero_temperature_is_rejected() {
        let text = MINIMAL.replace("value = 1.0 }", "value = 0.0 }");
        match parse_config(&text) {
            Err(Error::Config { key, reason }) => {
                assert_eq!(key, "initial.temperature");
                assert!(reason.contains("ess inf"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strides_and_stabilization_are_checked() {
        let text = format!("{MINIMAL}\n[output]\nsnapshot_stride = 0\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { key, .. }) if key == "output.snapshot_stride"));
        let text = format!("{MINIMAL}\n[output]\ncsv_stride = 0\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { key, .. }) if key == "output.csv_stride"));
        let text = format!("{MINIMAL}\n[time]\nstabilization = 1.0\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { key, .. }) if key == "time.stabilization"));
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&emit_config(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        for name in crate::harness::SCENARIO_NAMES {
            let mut cfg = RunConfig::from_scenario(crate::harness::builtin_scenario(name).unwrap());
            cfg.tolerances.max_picard = Some(2);
            cfg.seed = 99;
            let text = emit_config(&cfg).unwrap();
            assert_eq!(parse_config(&text).unwrap(), cfg, "{text}");
        }
    }
}
