use std::f64::consts::{PI, TAU};

use nemthsim::audit::{
    energy_law_residual, entropy_inequality_residual, first_law_pointwise_residual, max_principle_monitor,
    psi2_catalog, record_diagnostics, weak_residuals, ConcaveTestFn, DiagnosticsRecord, EntropyAccumulator, Psi2,
    SpatialWeight, TestFieldSet, CONCAVE_CATALOG,
};
use nemthsim::constitutive::entropy_production;
use nemthsim::harness::{builtin_scenario, run_scenario_with};
use nemthsim::{
    coupled_step, BcMode, CoefficientSet, DirectorField, Grid, Regularization, ScalarField, State, StepParams,
    VectorField,
};
use proptest::prelude::*;

fn short_shear(n: usize, steps: usize) -> (Vec<State>, CoefficientSet) {
    let sc = builtin_scenario("heated-shear-2d").unwrap().with_resolution(n).with_time(1e-3, steps as f64 * 1e-3);
    let coeffs = sc.coefficients.build().unwrap();
    let mut traj = vec![sc.initial_state().unwrap()];
    run_scenario_with(&sc, |ev| {
        traj.push(ev.next.clone());
        Ok(())
    })
    .unwrap();
    (traj, coeffs)
}

fn equilibrium_traj(steps: usize) -> (Vec<State>, CoefficientSet) {
    let g = Grid::new(&[1.0, 1.0], &[8, 8], BcMode::Walls, true).unwrap();
    let coeffs = CoefficientSet::constant(1.0, 1.0, 1.0).unwrap();
    let mut traj = vec![State::equilibrium(&g, [0.0, 0.0, 1.0], 1.0, Regularization::Finite(0.25))];
    let p = StepParams::new(1e-3);
    for _ in 0..steps {
        let next = coupled_step(traj.last().unwrap(), &coeffs, &p).unwrap();
        traj.push(next);
    }
    (traj, coeffs)
}

#[test]
fn equilibrium_record_is_pure_thermal() {
    let (traj, coeffs) = equilibrium_traj(0);
    let r = record_diagnostics(&traj[0], &coeffs).unwrap();
    assert_eq!(r.e_kin, 0.0);
    assert_eq!(r.e_elastic, 0.0);
    assert_eq!(r.e_penalty, 0.0);
    assert!((r.e_thermal - 1.0).abs() < 1e-14);
    assert_eq!(r.e_total, r.e_thermal);
    assert_eq!(r.dissipation_mech, 0.0);
}

#[test]
fn kinetic_energy_of_unit_shear() {
    let g = Grid::new(&[TAU, TAU], &[24, 24], BcMode::Periodic, true).unwrap();
    // ∫½ A² sin²y = A²π² on the 2π-torus
    let a = 0.5 / PI;
    let u = VectorField::from_fn(&g, true, |x| [a * x[1].sin(), 0.0, 0.0]);
    let s = State {
        u,
        ..State::equilibrium(&g, [1.0, 0.0, 0.0], 1.0, Regularization::Finite(0.25))
    };
    let coeffs = CoefficientSet::constant(1.0, 1.0, 0.5).unwrap();
    let r = record_diagnostics(&s, &coeffs).unwrap();
    assert!((r.e_kin - 0.25).abs() < 1e-14, "{}", r.e_kin);
    let sum = r.e_kin + r.e_elastic + r.e_penalty + r.e_thermal;
    assert!((r.e_total - sum).abs() <= 1e-15 * sum);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn production_is_nonnegative(seed in 0u64..1000, amp in 0.0f64..3.0, t0 in 0.05f64..5.0) {
        let g = Grid::new(&[TAU, TAU], &[8, 8], BcMode::Periodic, true).unwrap();
        let s = seed as f64;
        let u = VectorField::from_fn(&g, true, |x| [amp * (x[1] + s).sin(), amp * (x[0] - s).cos(), 0.0]);
        let d = DirectorField::from_fn(&g, |x| {
            let a = (x[0] + 0.3 * s).sin();
            [a.cos() * 0.9, a.sin() * 0.9, 0.1 * (x[1] * s).cos()]
        });
        let theta = ScalarField::from_fn(&g, |x| t0 * (1.5 + (x[0] * (1.0 + s)).sin()));
        let st = State { u, p: ScalarField::zeros(&g), d, theta, t: 0.0, eps: Regularization::Finite(0.3) };
        let coeffs = CoefficientSet::new(
            nemthsim::CoefficientSpec::Rational { c0: 0.5, c1: 0.5 },
            nemthsim::CoefficientSpec::Constant { value: 1.0 },
            nemthsim::CoefficientSpec::Constant { value: 0.5 },
        ).unwrap();
        let prod = entropy_production(&st, &coeffs).unwrap();
        prop_assert!(prod.min() >= 0.0);
        prop_assert!(record_diagnostics(&st, &coeffs).unwrap().production_total >= 0.0);
    }
}

#[test]
fn energy_law_on_equilibrium_is_zero() {
    let (traj, coeffs) = equilibrium_traj(5);
    let recs: Vec<_> = traj.iter().map(|s| record_diagnostics(s, &coeffs).unwrap()).collect();
    let r = energy_law_residual(&recs, 1e-3).unwrap();
    assert_eq!(r.r_mech.len(), 5);
    assert!(r.max_mech() < 1e-10 && r.max_total() < 1e-10);
    assert!(energy_law_residual(&recs[..1], 1e-3).is_err());
    assert!(energy_law_residual(&recs, 2e-3).is_err());
    let rep = max_principle_monitor(&recs);
    assert!(rep.is_clean());
    assert_eq!(rep.theta_floor, 1.0);
}

#[test]
fn mechanical_energy_decreases_on_shear() {
    let (traj, coeffs) = short_shear(32, 30);
    let recs: Vec<_> = traj.iter().map(|s| record_diagnostics(s, &coeffs).unwrap()).collect();
    assert!(recs.windows(2).all(|w| w[1].e_mech() <= w[0].e_mech()));
    let r = energy_law_residual(&recs, 1e-3).unwrap();
    // first-order defect, small against the dissipation itself
    let scale = recs.iter().fold(0.0f64, |m, r| m.max(r.dissipation_mech));
    assert!(r.max_mech() < 0.1 * scale, "{} vs {scale}", r.max_mech());
    assert!(max_principle_monitor(&recs).is_clean());
}

#[test]
fn monitor_flags_each_excursion() {
    let base = DiagnosticsRecord {
        min_theta: 0.5,
        max_norm_d: 1.0,
        min_d3: 0.0,
        ..Default::default()
    };
    let bad = [
        DiagnosticsRecord {
            t: 1.0,
            max_norm_d: 1.0 + 1e-9,
            ..base
        },
        DiagnosticsRecord {
            t: 2.0,
            min_d3: -1e-9,
            ..base
        },
        DiagnosticsRecord {
            t: 3.0,
            min_theta: 0.5 - 1e-9,
            ..base
        },
    ];
    let within = DiagnosticsRecord {
        t: 4.0,
        max_norm_d: 1.0 + 5e-11,
        min_d3: -5e-11,
        min_theta: 0.5 - 5e-11,
        ..base
    };
    let mut recs = vec![base];
    recs.extend_from_slice(&bad);
    recs.push(within);
    let rep = max_principle_monitor(&recs);
    assert_eq!(rep.violations.len(), 3);
    assert!(rep.violations[0].contains("|d|"));
    assert!(rep.violations[1].contains("d3"));
    assert!(rep.violations[2].contains("θ"));
}

#[test]
fn concave_catalog_is_admissible() {
    for h in CONCAVE_CATALOG {
        h.verify().unwrap();
        assert_eq!(h.h(0.0), 0.0);
    }
    assert!(ConcaveTestFn::Power { alpha: 1.5 }.verify().is_err());
    assert!(EntropyAccumulator::new(ConcaveTestFn::Log, Psi2::new(SpatialWeight::One, 1.0).scaled(-1.0)).is_err());
    // finite differences of the closed-form derivatives
    for h in [ConcaveTestFn::Power { alpha: 0.3 }, ConcaveTestFn::Log] {
        for t in [0.1, 1.0, 7.0] {
            let e = 1e-5;
            assert!(((h.h(t + e) - h.h(t - e)) / (2.0 * e) - h.dh(t)).abs() < 1e-8);
            assert!(((h.dh(t + e) - h.dh(t - e)) / (2.0 * e) - h.d2h(t)).abs() < 1e-8);
        }
    }
}

#[test]
fn entropy_residual_on_equilibrium_vanishes() {
    let (traj, coeffs) = equilibrium_traj(10);
    for psi in psi2_catalog(0.01) {
        for h in [ConcaveTestFn::Identity, ConcaveTestFn::Log] {
            let r = entropy_inequality_residual(&traj, h, psi, &coeffs).unwrap();
            assert!(r.residual().abs() < 1e-13 * r.scale().max(1.0), "{r:?}");
        }
    }
}

#[test]
fn entropy_inequality_on_shear() {
    let (traj, coeffs) = short_shear(32, 40);
    let horizon = 0.04;
    for psi in psi2_catalog(horizon) {
        let id = entropy_inequality_residual(&traj, ConcaveTestFn::Identity, psi, &coeffs).unwrap();
        assert!(id.residual().abs() < 1e-10 * id.scale(), "identity {id:?}");
        assert_eq!(id.curvature_term, 0.0);
        for h in CONCAVE_CATALOG {
            let r = entropy_inequality_residual(&traj, h, psi, &coeffs).unwrap();
            assert!(r.holds(1e-6), "{} {:?}: {r:?}", h.name(), psi.weight);
            assert!(r.curvature_term >= 0.0);
            assert!(r.source_term > 0.0);
        }
    }
}

#[test]
fn entropy_residual_is_linear_in_psi() {
    let (traj, coeffs) = short_shear(16, 10);
    let psi = Psi2::new(SpatialWeight::SinCos, 0.01);
    let r1 = entropy_inequality_residual(&traj, ConcaveTestFn::Log, psi, &coeffs).unwrap();
    let r2 = entropy_inequality_residual(&traj, ConcaveTestFn::Log, psi.scaled(2.0), &coeffs).unwrap();
    assert_eq!(r2.residual(), 2.0 * r1.residual());
    let r3 = entropy_inequality_residual(&traj, ConcaveTestFn::Log, psi.scaled(3.7), &coeffs).unwrap();
    assert!((r3.residual() - 3.7 * r1.residual()).abs() < 1e-12 * r3.scale());
}

#[test]
fn weak_residuals_vanish_on_zero_trajectory() {
    let g = Grid::new(&[PI, PI], &[12, 12], BcMode::Walls, true).unwrap();
    let set = TestFieldSet::catalog(&g, 0.01);
    set.validate(&g).unwrap();
    let coeffs = CoefficientSet::constant(1.0, 1.0, 1.0).unwrap();
    let zero = State {
        d: DirectorField::constant(&g, [0.0; 3]),
        ..State::equilibrium(&g, [0.0; 3], 1.0, Regularization::Finite(0.25))
    };
    let traj: Vec<State> = (0..=10)
        .map(|n| State {
            t: n as f64 * 1e-3,
            ..zero.clone()
        })
        .collect();
    let r = weak_residuals(&traj, &coeffs, &set).unwrap();
    assert_eq!(r.max_abs(), 0.0);
    assert_eq!(r.velocity.len(), set.velocity.len());
}

#[test]
fn weak_residuals_are_small_on_solver_output() {
    let (traj, coeffs) = short_shear(32, 20);
    let g = *traj[0].grid();
    let set = TestFieldSet::catalog(&g, 0.02);
    let r = weak_residuals(&traj, &coeffs, &set).unwrap();
    let initial = weak_residuals(&traj[..1], &coeffs, &set).unwrap();
    // truncation error against the size of the initial-data terms
    assert!(r.max_abs() < 5e-3 * initial.max_abs(), "{r:?} vs {initial:?}");
}

#[test]
fn first_law_residual_vanishes_at_equilibrium() {
    let (traj, coeffs) = equilibrium_traj(2);
    let r = first_law_pointwise_residual(&traj[1], &traj[2], &coeffs, 1e-3).unwrap();
    assert!(r.max_abs() < 1e-12);
}

#[test]
fn first_law_integral_matches_total_energy_rate() {
    let (traj, coeffs) = short_shear(64, 2);
    let dt = 1e-3;
    let res = first_law_pointwise_residual(&traj[1], &traj[2], &coeffs, dt).unwrap();
    let integral = nemthsim::integrate(&res);
    let r0 = record_diagnostics(&traj[1], &coeffs).unwrap();
    let r1 = record_diagnostics(&traj[2], &coeffs).unwrap();
    let r_total = (r1.e_total - r0.e_total) / dt;
    // both are consistent quadratures of d/dt ∫ e_total on the torus
    let scale = r1.dissipation_mech;
    assert!((integral - r_total).abs() < 0.05 * scale, "{integral} vs {r_total} (scale {scale})");
}
