//! Scenario orchestration and the numerical experiments built on it.

mod experiments;
mod manufactured;
mod oracle;
mod scenario;

pub use experiments::{
    decreasing_with_noise, epsilon_sweep, galerkin_refinement, galerkin_run, good_bad_slice_split, run_parallel,
    thread_budget, GalerkinRun, RefinementRow, RunSummary, SliceSplit, SweepMember, SweepOptions, SweepResult,
};
pub use manufactured::{
    manufactured_errors, manufactured_order_study, FieldJets, Jet1, Jet2, ManufacturedErrors, ManufacturedFields,
    ManufacturedOptions, OrderStudy,
};
pub use oracle::{
    dense_coupled_step, oracle_compare, oracle_compare_state, random_admissible_state, OracleReport, ORACLE_TOLERANCE,
};

pub use scenario::{
    builtin_scenario, CoefficientsSpec, DirectorPreset, GridSpec, InitialSpec, Scenario, TemperaturePreset,
    VelocityPreset, SCENARIO_NAMES,
};

use crate::audit::{record_diagnostics, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::solvers::{coupled_step_detailed, StepParams, StepRecord};
use crate::state::State;

/// One completed step handed to run observers.
pub struct StepEvent<'a> {
    pub n: usize,
    pub prev: &'a State,
    pub next: &'a State,
    pub record: &'a StepRecord,
}

/// Outcome of [`run_scenario`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
    /// Set when a step failed; `final_state` is then the last good state.
    pub failure: Option<String>,
}

/// Runs a scenario to its end time, recording diagnostics every
/// `output_stride` steps (and always at both ends).
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    run_scenario_with(sc, |_| Ok(()))
}

/// Like [`run_scenario`], calling `observer` after every step. An observer
/// error aborts the run and is returned.
pub fn run_scenario_with(sc: &Scenario, observer: impl FnMut(&StepEvent) -> Result<()>) -> Result<RunOutput> {
    run_scenario_params(sc, &sc.step_params(), observer)
}

/// Like [`run_scenario_with`] with explicit step parameters; `params.dt`
/// must equal the scenario's step.
pub fn run_scenario_params(
    sc: &Scenario,
    params: &StepParams,
    mut observer: impl FnMut(&StepEvent) -> Result<()>,
) -> Result<RunOutput> {
    if params.dt != sc.dt {
        return Err(Error::param("dt", format!("step parameters use {} but the scenario {}", params.dt, sc.dt)));
    }
    let coeffs = sc.coefficients.build()?;
    let params = *params;
    let mut state = sc.initial_state()?;
    let mut records = vec![record_diagnostics(&state, &coeffs)?];
    let n_steps = sc.n_steps();
    for n in 0..n_steps {
        let (next, rec) = match coupled_step_detailed(&state, &coeffs, &params) {
            Ok(x) => x,
            Err(e) => {
                return Ok(RunOutput {
                    records,
                    final_state: state,
                    failure: Some(format!("step {n}: {e}")),
                })
            }
        };
        observer(&StepEvent {
            n,
            prev: &state,
            next: &next,
            record: &rec,
        })?;
        state = next;
        if (n + 1) % sc.output_stride == 0 || n + 1 == n_steps {
            records.push(record_diagnostics(&state, &coeffs)?);
        }
    }
    Ok(RunOutput {
        records,
        final_state: state,
        failure: None,
    })
}
