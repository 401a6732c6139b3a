//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Independent runs go through `run_parallel`, so
//! `NEMTHSIM_THREADS` bounds the worker count.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nemthsim::audit::{energy_law_residual, psi2_catalog, DiagnosticsRecord, EntropyAccumulator, CONCAVE_CATALOG};
use nemthsim::constitutive::entropy_production;
use nemthsim::galerkin::{assemble_ode, build_basis, build_full_basis};
use nemthsim::harness::{
    builtin_scenario, decreasing_with_noise, epsilon_sweep, galerkin_refinement, good_bad_slice_split,
    manufactured_order_study, oracle_compare_state, random_admissible_state, run_parallel, run_scenario,
    run_scenario_with, ManufacturedOptions, Scenario, SweepOptions, SweepResult, SCENARIO_NAMES,
};
use nemthsim::solvers::{momentum_step, project_divergence_free};
use nemthsim::{
    BcMode, CoefficientSet, DirectorField, Error, Grid, Regularization, Result, ScalarField, State, StepParams,
    VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-10;
const SWEEP_EPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
const RICHARDSON_DT: [f64; 3] = [2e-3, 1e-3, 5e-4];
const RICHARDSON_T: f64 = 0.1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

impl From<Error> for Outcome {
    fn from(e: Error) -> Self {
        outcome(false, format!("error: {e}"))
    }
}

fn integral(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

/// Per-step findings along one shipped scenario.
struct ScenarioAudit {
    name: String,
    periodic: bool,
    records: Vec<DiagnosticsRecord>,
    failure: Option<String>,
    min_production: f64,
    /// worst `|Δ∫θ - dt ∫S| / ∫θ` over the steps
    heat_defect: f64,
    /// worst `residual / scale` over the H × ψ pairs
    entropy_worst: f64,
    entropy_pairs: usize,
    solver_time: Duration,
}

fn audit_scenario(sc: &Scenario) -> Result<ScenarioAudit> {
    let coeffs = sc.coefficients.build()?;
    let dt = sc.dt;
    let init = sc.initial_state()?;
    let mut min_production = entropy_production(&init, &coeffs)?.values().iter().copied().fold(f64::INFINITY, f64::min);
    let mut heat_defect = 0.0f64;
    let mut accs = Vec::new();
    for psi in psi2_catalog(sc.t_end) {
        for h in CONCAVE_CATALOG {
            accs.push(EntropyAccumulator::new(h, psi)?);
        }
    }
    let mut observer_time = Duration::ZERO;
    let start = Instant::now();
    let out = run_scenario_with(sc, |ev| {
        let t0 = Instant::now();
        let prod = entropy_production(ev.next, &coeffs)?;
        min_production = prod.values().iter().copied().fold(min_production, f64::min);
        let after = integral(&ev.next.theta);
        let defect = after - integral(&ev.prev.theta) - dt * integral(&ev.record.heat_source);
        heat_defect = heat_defect.max(defect.abs() / after);
        for acc in accs.iter_mut() {
            acc.step_lagged(ev.prev, ev.next, &ev.record.theta_lag, &coeffs, dt)?;
        }
        observer_time += t0.elapsed();
        Ok(())
    })?;
    let solver_time = start.elapsed().saturating_sub(observer_time);
    let entropy_worst = accs
        .iter()
        .map(|a| {
            let r = a.finish();
            r.residual() / r.scale()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ScenarioAudit {
        name: sc.name.clone(),
        periodic: sc.grid.bc == BcMode::Periodic,
        records: out.records,
        failure: out.failure,
        min_production,
        heat_defect,
        entropy_worst,
        entropy_pairs: accs.len(),
        solver_time,
    })
}

fn richardson_case(dt: f64) -> Scenario {
    builtin_scenario("heated-shear-2d").unwrap().with_time(dt, RICHARDSON_T)
}

/// `(e_total drift, ∫ r_mech dt)` of one run.
fn richardson_run(dt: f64) -> Result<(f64, f64)> {
    let out = run_scenario(&richardson_case(dt))?;
    if let Some(f) = out.failure {
        return Err(Error::Violation(f));
    }
    let (a, b) = (out.records.first().unwrap(), out.records.last().unwrap());
    let res = energy_law_residual(&out.records, dt)?;
    Ok((b.e_total - a.e_total, res.integrated_mech(dt)))
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

fn in_band(r: &[f64], lo: f64, hi: f64) -> bool {
    r.iter().all(|x| (lo..=hi).contains(x))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn fmt_sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn max_principles(a: &ScenarioAudit) -> Outcome {
    let theta0 = a.records[0].min_theta;
    let max_d = a.records.iter().map(|r| r.max_norm_d).fold(0.0, f64::max);
    let min_d3 = a.records.iter().map(|r| r.min_d3).fold(f64::INFINITY, f64::min);
    let min_th = a.records.iter().map(|r| r.min_theta).fold(f64::INFINITY, f64::min);
    let steps = a.records.len() - 1;
    let secs = a.solver_time.as_secs_f64();
    let pass = a.failure.is_none()
        && steps == 1000
        && max_d <= 1.0 + SLACK
        && min_d3 >= -SLACK
        && min_th >= theta0 - SLACK
        && secs < 120.0;
    outcome(
        pass,
        format!(
            "{steps} steps, max|d| - 1 = {:.2e}, min d3 = {min_d3:.3e}, min θ = {min_th:.6} (θ0 min {theta0}), solver time {secs:.1} s",
            max_d - 1.0
        ),
    )
}

fn second_law(audits: &[ScenarioAudit]) -> Outcome {
    let worst = audits.iter().map(|a| a.min_production).fold(f64::INFINITY, f64::min);
    let failed: Vec<_> = audits.iter().filter(|a| a.failure.is_some()).map(|a| a.name.as_str()).collect();
    outcome(
        worst >= 0.0 && failed.is_empty() && audits.len() == SCENARIO_NAMES.len(),
        format!("min cell production {worst:.3e} over {} scenarios", audits.len()),
    )
}

fn mech_monotone(audits: &[ScenarioAudit], mech: &[f64]) -> Outcome {
    let mut increases = Vec::new();
    for a in audits {
        for w in a.records.windows(2) {
            if !(w[1].e_mech() <= w[0].e_mech()) {
                increases.push(format!("{} t = {}: +{:.2e}", a.name, w[1].t, w[1].e_mech() - w[0].e_mech()));
            }
        }
    }
    let r = ratios(mech);
    let pass = increases.is_empty() && in_band(&r, 1.7, 2.3);
    let mut detail = format!("∫r_mech dt = [{}], ratios [{}]", fmt_sci(mech), fmt_list(&r));
    if !increases.is_empty() {
        detail = format!("{} increases, first {}; {detail}", increases.len(), increases[0]);
    }
    outcome(pass, detail)
}

fn heat_balance(audits: &[ScenarioAudit]) -> Outcome {
    let periodic: Vec<_> = audits.iter().filter(|a| a.periodic).collect();
    let worst = periodic.iter().map(|a| a.heat_defect).fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && !periodic.is_empty(),
        format!("worst relative defect {worst:.2e} over {} periodic scenarios", periodic.len()),
    )
}

fn entropy_inequality(audits: &[ScenarioAudit]) -> Outcome {
    let worst = audits.iter().map(|a| a.entropy_worst).fold(f64::NEG_INFINITY, f64::max);
    let pairs = audits.iter().map(|a| a.entropy_pairs).sum::<usize>();
    outcome(
        worst <= 1e-6,
        format!("max residual/scale {worst:.3e} over {pairs} (scenario, H, ψ) triples"),
    )
}

fn sweep_monotone(res: &SweepResult, secs: f64) -> Outcome {
    let pen = res.penalty_averages();
    let def = res.unit_defects();
    let rhs = res.members[0].bound_rhs;
    let bound = res.energy_bound_holds(1e-12 * rhs.abs());
    let pass = res.failures().is_empty()
        && decreasing_with_noise(&pen, 0.1)
        && decreasing_with_noise(&def, 0.1)
        && bound
        && secs < 900.0;
    let sups: Vec<f64> = res.members.iter().map(|m| m.mech_sup).collect();
    outcome(
        pass,
        format!(
            "mean ∫F [{}], max||d|-1| [{}], sup E_mech [{}] <= {rhs:.6e}, {secs:.0} s",
            fmt_sci(&pen),
            fmt_sci(&def),
            fmt_sci(&sups)
        ),
    )
}

fn chebyshev(res: &SweepResult) -> Outcome {
    let mut checked = 0;
    let mut problems = Vec::new();
    for m in &res.members {
        let d = &m.run.director_dissipation;
        let avg = d.iter().sum::<f64>() / d.len() as f64;
        for factor in [1.0, 10.0, 100.0] {
            let lambda = factor * avg;
            match good_bad_slice_split(d, res.dt, lambda) {
                Ok(s) => {
                    let mut acc = 0.0;
                    let mut bad = 0.0;
                    for &v in d {
                        acc += res.dt * v;
                        if v >= lambda {
                            bad += res.dt * lambda;
                        }
                    }
                    let consistent = s.accumulated == acc
                        && s.bad_measure_times_lambda == bad
                        && s.good.len() + s.bad.len() == d.len();
                    if !(s.chebyshev_holds() && bad <= acc && consistent) {
                        problems.push(format!("ε {} Λ {factor}×avg", m.eps));
                    }
                    checked += 1;
                }
                Err(e) => problems.push(format!("ε {}: {e}", m.eps)),
            }
        }
    }
    let detail = if problems.is_empty() {
        format!("{checked} (ε, Λ) splits")
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty() && checked == 3 * res.members.len(), detail)
}

fn galerkin_fidelity(refinement: Result<Vec<f64>>) -> Result<Outcome> {
    let sc = builtin_scenario("heated-shear-2d")?.with_resolution(16);
    let coeffs = sc.coefficients.build()?;
    let s = sc.initial_state()?;
    let m = 16;
    let basis = build_basis(s.grid(), m)?;
    let sys = assemble_ode(&basis, &s.d, &s.theta, &coeffs, s.eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut skew = 0.0f64;
    for _ in 0..50 {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = sys.convection(&v);
        skew = skew.max(c.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs());
    }

    let theta = ScalarField::constant(s.grid(), 1.3);
    let flat = assemble_ode(&basis, &s.d, &theta, &coeffs, s.eps)?;
    let mu = coeffs.mu.eval(1.3);
    let mut b_err = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { -mu * basis.modes()[i].lambda } else { 0.0 };
            b_err = b_err.max((flat.b[i][j] - want).abs());
        }
    }

    let step_diff = full_mode_step_diff()?;
    let diffs = refinement?;
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(outcome(
        skew < 1e-12 && b_err < 1e-12 && decreasing && step_diff < 1e-8,
        format!(
            "(a) max|A(v,v)·v| {skew:.1e}, (b) {b_err:.1e}, (c) diffs [{}], (d) {step_diff:.1e}",
            fmt_sci(&diffs)
        ),
    ))
}

fn full_mode_step_diff() -> Result<f64> {
    let g = Grid::new(&[TAU, TAU], &[8, 8], BcMode::Periodic, true)?;
    let basis = build_full_basis(&g)?;
    let coeffs = builtin_scenario("heated-shear-2d")?.coefficients.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut raw = VectorField::zeros(&g, true);
    for a in 0..2 {
        raw.comp_mut(a).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let u = project_divergence_free(&raw, Default::default())?.u;
    let d = DirectorField::from_fn(&g, |x| {
        let v = [0.3 * x[0].sin(), 0.2 * x[1].cos(), 1.0];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    });
    let state = State {
        u: u.clone(),
        p: ScalarField::zeros(&g),
        d: d.clone(),
        theta: ScalarField::constant(&g, 0.9),
        t: 0.0,
        eps: Regularization::Finite(0.25),
    };
    let dt = 1e-2;
    let (u_grid, _) = momentum_step(&state, &coeffs, &StepParams::new(dt))?;
    let sys = assemble_ode(&basis, &d, &state.theta, &coeffs, state.eps)?;
    let g1 = sys.imex_step(&basis.project(&u)?, dt)?;
    Ok(basis.reconstruct(&g1)?.axpy(-1.0, &u_grid).max_abs())
}

fn oracle() -> Result<Outcome> {
    let coeffs = builtin_scenario("heated-shear-2d")?.coefficients.build()?;
    let params = StepParams::new(1e-3);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for dims in [2, 3] {
        for bc in [BcMode::Periodic, BcMode::Walls] {
            let g = Grid::new(&vec![TAU; dims], &vec![8; dims], bc, true)?;
            for seed in 0..3 {
                let s = random_admissible_state(&g, 0.5, 100 + seed)?;
                worst = worst.max(oracle_compare_state(&s, &coeffs, &params)?.max());
                cases += 1;
            }
        }
    }
    Ok(outcome(worst < 1e-9, format!("max discrepancy {worst:.2e} over {cases} states")))
}

fn manufactured() -> Result<Outcome> {
    let opts = ManufacturedOptions::default();
    let shear = builtin_scenario("heated-shear-2d")?.coefficients.build()?;
    let mut all = Vec::new();
    let mut pass = true;
    for (label, coeffs) in [("constant", CoefficientSet::constant(0.7, 1.0, 0.5)?), ("variable", shear)] {
        let study = manufactured_order_study(&[32, 64], &coeffs, &opts)?;
        let (fl, wk) = (study.first_law_ratios(), study.weak_ratios());
        pass &= in_band(&fl, 3.4, 4.6) && in_band(&wk, 3.4, 4.6);
        all.push(format!("{label}: first law {}, weak {}", fmt_list(&fl), fmt_list(&wk)));
    }
    Ok(outcome(pass, all.join("; ")))
}

fn boundedness(res: &SweepResult) -> Outcome {
    let first = &res.members[0].run;
    let (t0, g0) = (first.theta_l32, first.grad_theta_l65);
    let rt: Vec<f64> = res.members.iter().map(|m| m.run.theta_l32 / t0).collect();
    let rg: Vec<f64> = res.members.iter().map(|m| m.run.grad_theta_l65 / g0).collect();
    outcome(
        in_band(&rt, 0.5, 2.0) && in_band(&rg, 0.5, 2.0),
        format!("‖θ‖_3/2 ratios [{}], ‖∇θ‖_6/5 ratios [{}]", fmt_list(&rt), fmt_list(&rg)),
    )
}

enum Job {
    Audit(Result<ScenarioAudit>),
    Richardson(Result<(f64, f64)>),
    Refinement(Result<Vec<f64>>),
}

fn main() -> ExitCode {
    let scenarios: Vec<Scenario> = SCENARIO_NAMES.iter().map(|n| builtin_scenario(n).unwrap()).collect();
    let galerkin_case = builtin_scenario("heated-shear-2d").unwrap().with_resolution(32).with_time(1e-3, 0.5);
    let mut jobs: Vec<Box<dyn FnOnce() -> Job + Send + '_>> = Vec::new();
    for sc in &scenarios {
        jobs.push(Box::new(move || Job::Audit(audit_scenario(sc))));
    }
    for dt in RICHARDSON_DT {
        jobs.push(Box::new(move || Job::Richardson(richardson_run(dt))));
    }
    jobs.push(Box::new(|| {
        Job::Refinement(galerkin_refinement(&galerkin_case, &[4, 8, 16]).and_then(|rows| {
            match rows.iter().find_map(|r| r.failure.clone()) {
                Some(f) => Err(Error::Violation(f)),
                None if rows.iter().any(|r| r.envelope_excess_m > 0.0 || r.envelope_excess_2m > 0.0) => {
                    Err(Error::Violation("energy envelope exceeded".into()))
                }
                None => Ok(rows.iter().map(|r| r.diff).collect()),
            }
        }))
    }));

    let mut audits = Vec::new();
    let mut drift = Vec::new();
    let mut mech = Vec::new();
    let mut refinement = Err(Error::Violation("refinement did not run".into()));
    let mut setup_errors = Vec::new();
    for job in run_parallel(jobs) {
        match job {
            Job::Audit(Ok(a)) => audits.push(a),
            Job::Richardson(Ok((e, m))) => {
                drift.push(e);
                mech.push(m);
            }
            Job::Refinement(r) => refinement = r,
            Job::Audit(Err(e)) | Job::Richardson(Err(e)) => setup_errors.push(e.to_string()),
        }
    }

    let sweep_start = Instant::now();
    let sweep = epsilon_sweep(&builtin_scenario("heated-shear-2d").unwrap(), &SWEEP_EPS, SweepOptions::default());
    let sweep_secs = sweep_start.elapsed().as_secs_f64();

    let mut lines: Vec<(&str, Outcome)> = Vec::new();
    let setup = |o: Outcome| {
        if setup_errors.is_empty() {
            o
        } else {
            outcome(false, format!("{}; run errors: {}", o.detail, setup_errors.join("; ")))
        }
    };
    let shear = audits.iter().find(|a| a.name == "heated-shear-2d");
    lines.push((
        "maximum principles",
        shear.map_or_else(|| outcome(false, "heated-shear-2d did not run"), max_principles),
    ));
    lines.push(("entropy production", setup(second_law(&audits))));
    let dr = ratios(&drift);
    lines.push((
        "total energy drift",
        outcome(
            drift.len() == 3 && in_band(&dr, 1.7, 2.3),
            format!("drift [{}], ratios [{}]", fmt_sci(&drift), fmt_list(&dr)),
        ),
    ));
    lines.push(("mechanical energy", setup(mech_monotone(&audits, &mech))));
    lines.push(("heat balance", setup(heat_balance(&audits))));
    lines.push(("entropy inequality", setup(entropy_inequality(&audits))));
    match &sweep {
        Ok(res) => {
            lines.push(("regularization sweep", sweep_monotone(res, sweep_secs)));
            lines.push(("chebyshev slices", chebyshev(res)));
        }
        Err(e) => {
            lines.push(("regularization sweep", outcome(false, format!("error: {e}"))));
            lines.push(("chebyshev slices", outcome(false, format!("error: {e}"))));
        }
    }
    lines.push(("galerkin fidelity", galerkin_fidelity(refinement).unwrap_or_else(Outcome::from)));
    lines.push(("oracle equivalence", oracle().unwrap_or_else(Outcome::from)));
    lines.push(("manufactured orders", manufactured().unwrap_or_else(Outcome::from)));
    lines.push((
        "temperature bounds",
        sweep.as_ref().map_or_else(|e| outcome(false, format!("error: {e}")), boundedness),
    ));

    let mut failed = 0;
    for (i, (name, o)) in lines.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
