//! The ε → 0 continuation, the good/bad time-slice split and Galerkin
//! m-refinement.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::audit::DiagnosticsRecord;
use crate::constitutive::director_potential;
use crate::error::{Error, Result};
use crate::galerkin::{assemble_ode, build_basis, integrate_galerkin};
use crate::ops::viscous_density;
use crate::grid::{central_gradient, director_grad_sq, integrate, vector_inner, DirectorField, ScalarField, VectorField};
use crate::solvers::{director_step_with_potential, heat_step, limit_director_step};
use crate::state::{Regularization, State};

use super::{run_scenario_with, Scenario};

/// Worker threads for independent runs: `NEMTHSIM_THREADS` if set to a
/// positive integer, else the available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("NEMTHSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `jobs` on at most [`thread_budget`] threads; results keep job order.
pub fn run_parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    let n = jobs.len();
    let queue: Mutex<Vec<Option<Box<dyn FnOnce() -> T + Send + '_>>>> = Mutex::new(jobs.into_iter().map(Some).collect());
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..thread_budget().min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let job = queue.lock().unwrap()[i].take().expect("each job runs once");
                let r = job();
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

/// `(∫|f|^p)^(1/p)` for cell values.
fn lp_norm(values: impl Iterator<Item = f64>, p: f64, cell_volume: f64) -> f64 {
    (values.map(|v| v.abs().powf(p)).sum::<f64>() * cell_volume).powf(1.0 / p)
}

/// Options of [`epsilon_sweep`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Directors are compared with the limit run every `sample_stride` steps.
    pub sample_stride: usize,
    /// Good slices are the steps whose director dissipation stays below this
    /// multiple of its time average.
    pub lambda_factor: f64,
    /// Also run every ε at `dt / 2` and report the difference, which
    /// separates time-discretization error from regularization error.
    pub refinement_column: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            sample_stride: 10,
            lambda_factor: 10.0,
            refinement_column: false,
        }
    }
}

/// Everything one run of a sweep keeps.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub eps: Regularization,
    pub failure: Option<String>,
    pub records: Vec<DiagnosticsRecord>,
    /// `∫|Δd - f(d)|²` (or the limit potential) after every step.
    pub director_dissipation: Vec<f64>,
    /// What each step actually dissipated: `∫ mu(θⁿ)|∇u'|² + |m|²` with
    /// `m` the chemical potential of the director step.
    pub step_dissipation: Vec<f64>,
    /// Step indices (after the step) and directors at the sample times.
    pub samples: Vec<(usize, DirectorField)>,
    /// Largest `‖θ‖_{L^{3/2}}` and `‖∇θ‖_{L^{6/5}}` over the run.
    pub theta_l32: f64,
    pub grad_theta_l65: f64,
    pub max_unit_defect: f64,
}

impl RunSummary {
    fn collect(sc: &Scenario, stride: usize) -> RunSummary {
        let mut sum = RunSummary {
            eps: sc.eps,
            failure: None,
            records: Vec::new(),
            director_dissipation: Vec::new(),
            step_dissipation: Vec::new(),
            samples: Vec::new(),
            theta_l32: 0.0,
            grad_theta_l65: 0.0,
            max_unit_defect: 0.0,
        };
        match sc.initial_state() {
            Ok(s0) => sum.observe(0, &s0, stride),
            Err(e) => {
                sum.failure = Some(e.to_string());
                return sum;
            }
        }
        let out = run_scenario_with(sc, |ev| {
            let m = director_potential(&ev.next.d, ev.next.eps);
            let v: f64 = (0..3).map(|k| m.comp(k).iter().map(|x| x * x).sum::<f64>()).sum();
            let vol = ev.next.grid().cell_volume();
            sum.director_dissipation.push(v * vol);
            let visc: f64 = viscous_density(&ev.next.u, &ev.record.mu_lag).values().iter().sum();
            let pot = &ev.record.potential;
            let mm: f64 = (0..3).map(|k| pot.comp(k).iter().map(|x| x * x).sum::<f64>()).sum();
            sum.step_dissipation.push((visc + mm) * vol);
            sum.observe(ev.n + 1, ev.next, stride);
            Ok(())
        });
        match out {
            Ok(o) => {
                sum.records = o.records;
                sum.failure = o.failure;
            }
            Err(e) => sum.failure = Some(e.to_string()),
        }
        sum
    }

    fn observe(&mut self, n: usize, s: &State, stride: usize) {
        self.max_unit_defect = self.max_unit_defect.max(unit_defect(&s.d));
        if n % stride != 0 {
            return;
        }
        let g = s.grid();
        let vol = g.cell_volume();
        self.samples.push((n, s.d.clone()));
        self.theta_l32 = self.theta_l32.max(lp_norm(s.theta.values().iter().copied(), 1.5, vol));
        let gt = central_gradient(&s.theta);
        let mag = (0..g.len()).map(|c| (0..g.dims()).map(|a| gt.comp(a)[c].powi(2)).sum::<f64>().sqrt());
        self.grad_theta_l65 = self.grad_theta_l65.max(lp_norm(mag, 1.2, vol));
    }

    /// `∫F_ε` averaged in time by the trapezoid rule over the records.
    pub fn penalty_time_average(&self) -> f64 {
        time_average(&self.records, |r| r.e_penalty)
    }

    /// Kinetic plus elastic energy of the initial data.
    pub fn bound_rhs(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.e_kin + r.e_elastic)
    }

    /// `sup_t E_mech`.
    pub fn mech_sup(&self) -> f64 {
        self.records.iter().map(|r| r.e_mech()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_n [E_mech(n) + Σ_{k<n} dt D_k]` with the step dissipation: the
    /// left side of the ε-uniform energy bound including accumulated
    /// dissipation. Needs records at every step.
    pub fn mech_sup_with_dissipation(&self, dt: f64) -> f64 {
        if self.records.len() != self.step_dissipation.len() + 1 {
            return f64::NAN;
        }
        let mut acc = 0.0;
        let mut best = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 {
                match self.step_dissipation.get(i - 1) {
                    Some(d) => acc += dt * d,
                    None => return f64::NAN,
                }
            }
            best = best.max(r.e_mech() + acc);
        }
        best
    }
}

fn unit_defect(d: &DirectorField) -> f64 {
    let n = d.norm();
    n.values().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
}

fn time_average(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    if records.len() < 2 {
        return records.first().map_or(f64::NAN, &f);
    }
    let mut s = 0.0;
    for w in records.windows(2) {
        s += 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]));
    }
    s / (records.last().unwrap().t - records[0].t)
}

/// Metrics of one regularized run against the limit run.
#[derive(Clone, Debug)]
pub struct SweepMember {
    pub run: RunSummary,
    pub eps: f64,
    pub max_unit_defect: f64,
    pub penalty_avg: f64,
    /// Time average of `‖∇d_ε - ∇d_limit‖_{L²}` over the sample times.
    pub grad_diff_avg: f64,
    /// The same average restricted to good slices.
    pub grad_diff_good_avg: f64,
    pub bound_rhs: f64,
    pub mech_sup: f64,
    pub mech_sup_with_dissipation: f64,
    /// Time average of `‖∇d_ε(dt) - ∇d_ε(dt/2)‖_{L²}` when requested.
    pub refinement_diff: Option<f64>,
}

/// Outcome of [`epsilon_sweep`]; members are sorted by decreasing ε.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub eps_values: Vec<f64>,
    pub members: Vec<SweepMember>,
    pub limit: RunSummary,
    pub options: SweepOptions,
    pub dt: f64,
}

/// `next < (1 + noise) prev` for every adjacent pair.
pub fn decreasing_with_noise(values: &[f64], noise: f64) -> bool {
    values.windows(2).all(|w| w[1] < (1.0 + noise) * w[0])
}

impl SweepResult {
    pub fn penalty_averages(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.penalty_avg).collect()
    }
    pub fn unit_defects(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.max_unit_defect).collect()
    }

    /// Least-squares slope of `log ∫F_ε` against `log ε`.
    pub fn penalty_decay_order(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .members
            .iter()
            .filter(|m| m.penalty_avg > 0.0)
            .map(|m| (m.eps.ln(), m.penalty_avg.ln()))
            .collect();
        let n = pts.len() as f64;
        if pts.len() < 2 {
            return f64::NAN;
        }
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / n, sy / n);
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    }

    /// Every member satisfies `sup E_mech <= ∫(½|u₀|² + ½|∇d₀|²)` up to
    /// `slack`, and all members share that right-hand side bit for bit.
    pub fn energy_bound_holds(&self, slack: f64) -> bool {
        let Some(first) = self.members.first() else {
            return false;
        };
        self.members.iter().all(|m| {
            m.run.failure.is_none() && m.bound_rhs == first.bound_rhs && m.mech_sup <= m.bound_rhs + slack
        })
    }

    pub fn failures(&self) -> Vec<String> {
        self.members
            .iter()
            .map(|m| &m.run)
            .chain(std::iter::once(&self.limit))
            .filter_map(|r| r.failure.as_ref().map(|f| format!("eps {:?}: {f}", r.eps)))
            .collect()
    }
}

fn grad_diff(a: &DirectorField, b: &DirectorField) -> f64 {
    let g = a.grid();
    let diff = DirectorField::from_components(g, [0, 1, 2].map(|k| a.comp(k).iter().zip(b.comp(k)).map(|(x, y)| x - y).collect()))
        .expect("same grid");
    integrate(&director_grad_sq(&diff)).sqrt()
}

/// Runs the scenario for every ε in `eps_list` (strictly decreasing,
/// positive) and once in limit mode, concurrently, and compares them. A
/// failed run is recorded in its summary and does not stop the sweep.
pub fn epsilon_sweep(base: &Scenario, eps_list: &[f64], options: SweepOptions) -> Result<SweepResult> {
    if eps_list.is_empty() {
        return Err(Error::param("eps_list", "is empty"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::param("eps_list", "every eps must be positive"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps_list", "must be strictly decreasing"));
    }
    if options.sample_stride == 0 || !(options.lambda_factor > 0.0) {
        return Err(Error::param("options", "sample_stride must be >= 1 and lambda_factor > 0"));
    }
    let s0 = base.with_eps(Regularization::Limit).initial_state()?;
    if unit_defect(&s0.d) > 1e-12 {
        return Err(Error::param("director", "the sweep needs unit-length initial data"));
    }
    let stride = options.sample_stride;
    let mut jobs_sc: Vec<(Scenario, usize)> =
        eps_list.iter().map(|&e| (base.with_eps(Regularization::Finite(e)), stride)).collect();
    jobs_sc.push((base.with_eps(Regularization::Limit), stride));
    if options.refinement_column {
        for &e in eps_list {
            let fine = base.with_eps(Regularization::Finite(e)).with_time(base.dt / 2.0, base.t_end);
            jobs_sc.push((Scenario { output_stride: 2 * base.output_stride, ..fine }, 2 * stride));
        }
    }
    let jobs: Vec<Box<dyn FnOnce() -> RunSummary + Send + '_>> = jobs_sc
        .iter()
        .map(|(sc, k)| Box::new(move || RunSummary::collect(sc, *k)) as Box<dyn FnOnce() -> RunSummary + Send>)
        .collect();
    let mut runs = run_parallel(jobs);
    let fine: Vec<RunSummary> = runs.split_off(eps_list.len() + 1);
    let limit = runs.pop().expect("limit run");
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let members = runs
        .into_iter()
        .zip(eps_list)
        .enumerate()
        .map(|(i, (run, &eps))| {
            let avg_dd = mean(&run.director_dissipation);
            let lambda = options.lambda_factor * avg_dd;
            let (mut all, mut good) = (Vec::new(), Vec::new());
            for ((n, d), (m, dl)) in run.samples.iter().zip(&limit.samples) {
                debug_assert_eq!(n, m);
                let v = grad_diff(d, dl);
                all.push(v);
                // the initial level has no preceding step and counts as good
                if *n == 0 || run.director_dissipation.get(n - 1).is_some_and(|&x| x < lambda) {
                    good.push(v);
                }
            }
            let refinement_diff = fine.get(i).map(|f| {
                let diffs: Vec<f64> = run.samples.iter().zip(&f.samples).map(|((_, a), (_, b))| grad_diff(a, b)).collect();
                mean(&diffs)
            });
            SweepMember {
                eps,
                max_unit_defect: run.max_unit_defect,
                penalty_avg: run.penalty_time_average(),
                grad_diff_avg: mean(&all),
                grad_diff_good_avg: mean(&good),
                bound_rhs: run.bound_rhs(),
                mech_sup: run.mech_sup(),
                mech_sup_with_dissipation: run.mech_sup_with_dissipation(base.dt),
                refinement_diff,
                run,
            }
        })
        .collect();
    Ok(SweepResult {
        eps_values: eps_list.to_vec(),
        members,
        limit,
        options,
        dt: base.dt,
    })
}

/// Partition of step indices by a dissipation threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSplit {
    pub lambda: f64,
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    /// `Σ_{bad} dt Λ`, summed in index order.
    pub bad_measure_times_lambda: f64,
    /// `Σ dt D_n` over all steps, summed in index order.
    pub accumulated: f64,
}

impl SliceSplit {
    /// The discrete Chebyshev bound `|B_Λ| Λ <= Σ dt D`. Both sides are
    /// summed term by term in the same order, and each bad term `dt Λ` is
    /// at most the matching `dt D_n`, so rounding cannot break the bound.
    pub fn chebyshev_holds(&self) -> bool {
        self.bad_measure_times_lambda <= self.accumulated
    }
}

/// Splits the steps of a nonnegative dissipation series into good
/// (`D_n < Λ`) and bad (`D_n >= Λ`) slices.
pub fn good_bad_slice_split(dissipation: &[f64], dt: f64, lambda: f64) -> Result<SliceSplit> {
    if !(lambda > 0.0) || !(dt > 0.0) {
        return Err(Error::param("lambda", "lambda and dt must be positive"));
    }
    if dissipation.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("dissipation", "series must be nonnegative"));
    }
    let mut split = SliceSplit {
        lambda,
        good: Vec::new(),
        bad: Vec::new(),
        bad_measure_times_lambda: 0.0,
        accumulated: 0.0,
    };
    for (n, &v) in dissipation.iter().enumerate() {
        split.accumulated += dt * v;
        if v >= lambda {
            split.bad.push(n);
            split.bad_measure_times_lambda += dt * lambda;
        } else {
            split.good.push(n);
        }
    }
    Ok(split)
}

/// One Galerkin run: the velocity lives in the span of the first `m`
/// modes, director and temperature on the grid.
#[derive(Clone, Debug)]
pub struct GalerkinRun {
    pub m: usize,
    pub final_velocity: Option<VectorField>,
    pub envelope_excess: f64,
    pub failure: Option<String>,
}

/// Runs the Galerkin construction on a periodic scenario: each step moves
/// the director with the Galerkin velocity, refreshes `B(θ)` and the elastic
/// forcing from the step's chemical potential, advances the coefficients by
/// RK4 and updates the temperature.
pub fn galerkin_run(sc: &Scenario, m: usize) -> Result<GalerkinRun> {
    let grid = sc.grid.build()?;
    if !grid.is_periodic() {
        return Err(Error::param("scenario", "the Galerkin construction needs a periodic grid"));
    }
    let coeffs = sc.coefficients.build()?;
    let params = sc.step_params();
    let s0 = sc.initial_state()?;
    let basis = build_basis(&grid, m)?;
    let mut sys = assemble_ode(&basis, &s0.d, &s0.theta, &coeffs, sc.eps)?;
    let g0 = basis.project(&s0.u)?;
    let mut d = s0.d.clone();
    let mut theta = s0.theta.clone();
    let mut prev_d = s0.d.clone();
    let step = |n: usize, g: &[f64], sys: &mut crate::galerkin::GalerkinSystem, d: &mut DirectorField, theta: &mut ScalarField, prev_d: &mut DirectorField| -> Result<()> {
        let u = sys.basis.reconstruct(g)?;
        if n > 0 {
            let old = State {
                u: u.clone(),
                p: ScalarField::zeros(&grid),
                d: prev_d.clone(),
                theta: theta.clone(),
                t: 0.0,
                eps: sc.eps,
            };
            *theta = heat_step(&old, &u, d, &coeffs, &params)?;
        }
        let now = State {
            u: u.clone(),
            p: ScalarField::zeros(&grid),
            d: d.clone(),
            theta: theta.clone(),
            t: 0.0,
            eps: sc.eps,
        };
        let (d_new, pot) = match sc.eps {
            Regularization::Finite(_) => director_step_with_potential(&now, &u, &params)?,
            Regularization::Limit => {
                let dn = limit_director_step(&now, &u, &params)?;
                let p = director_potential(&dn, sc.eps);
                (dn, p)
            }
        };
        sys.set_viscosity(theta, &coeffs)?;
        sys.set_forcing(&d_new, &pot)?;
        *prev_d = std::mem::replace(d, d_new);
        Ok(())
    };
    let traj = integrate_galerkin(&mut sys, &g0, sc.dt, sc.n_steps(), |n, _, g, sys| {
        step(n, g, sys, &mut d, &mut theta, &mut prev_d)
    });
    Ok(match traj {
        Ok(t) => GalerkinRun {
            m,
            final_velocity: Some(basis.reconstruct(t.coefficients.last().expect("initial level"))?),
            envelope_excess: t.envelope_excess,
            failure: None,
        },
        Err(e) => GalerkinRun {
            m,
            final_velocity: None,
            envelope_excess: f64::NAN,
            failure: Some(e.to_string()),
        },
    })
}

/// One row of the m-refinement table.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementRow {
    pub m: usize,
    /// `‖u_m(T) - u_{2m}(T)‖_{L²}`, NaN when either run failed.
    pub diff: f64,
    pub envelope_excess_m: f64,
    pub envelope_excess_2m: f64,
    pub failure: Option<String>,
}

/// Compares every `m` in `m_list` (increasing) with `2m`.
pub fn galerkin_refinement(sc: &Scenario, m_list: &[usize]) -> Result<Vec<RefinementRow>> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[1] <= w[0]) || m_list[0] == 0 {
        return Err(Error::param("m_list", "must be a nonempty increasing list of positive sizes"));
    }
    let mut sizes: Vec<usize> = m_list.iter().flat_map(|&m| [m, 2 * m]).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let jobs: Vec<Box<dyn FnOnce() -> Result<GalerkinRun> + Send + '_>> = sizes
        .iter()
        .map(|&m| Box::new(move || galerkin_run(sc, m)) as Box<dyn FnOnce() -> Result<GalerkinRun> + Send>)
        .collect();
    let runs = run_parallel(jobs).into_iter().collect::<Result<Vec<_>>>()?;
    let find = |m: usize| runs.iter().find(|r| r.m == m).expect("run for every size");
    m_list
        .iter()
        .map(|&m| {
            let (a, b) = (find(m), find(2 * m));
            let failure = a.failure.clone().or_else(|| b.failure.clone());
            let diff = match (&a.final_velocity, &b.final_velocity) {
                (Some(x), Some(y)) => {
                    let e = x.axpy(-1.0, y);
                    vector_inner(&e, &e)?.sqrt()
                }
                _ => f64::NAN,
            };
            Ok(RefinementRow {
                m,
                diff,
                envelope_excess_m: a.envelope_excess,
                envelope_excess_2m: b.envelope_excess,
                failure,
            })
        })
        .collect()
}
