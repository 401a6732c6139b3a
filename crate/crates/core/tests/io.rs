use std::fs;

use nemthsim::harness::builtin_scenario;
use nemthsim::io::{
    audit_dir, director_snapshot, emit_config, execute_run, parse_config, parse_diagnostics_csv, read_snapshot,
    read_state, scalar_snapshot, vector_snapshot, write_state, RunConfig, CONFIG_FILE, DIAGNOSTICS_FILE,
};
use nemthsim::{BcMode, DirectorField, Grid, Regularization, ScalarField, VectorField};
use proptest::prelude::*;

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::from_scenario(builtin_scenario("heated-shear-walls").unwrap().with_resolution(12));
    cfg.scenario.t_end = 0.02;
    cfg.snapshot_stride = 5;
    cfg.scenario.output_stride = 5;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn snapshots_round_trip_bitwise(
        vals in proptest::collection::vec(proptest::num::f64::ANY, 3 * 64),
        t in proptest::num::f64::NORMAL,
        three in proptest::bool::ANY,
    ) {
        let g = if three {
            Grid::new(&[1.0, 2.0, 1.0], &[4, 4, 4], BcMode::Walls, true).unwrap()
        } else {
            Grid::new(&[1.0, 2.0], &[8, 8], BcMode::Periodic, true).unwrap()
        };
        let n = g.len();
        let eps = Regularization::Finite(0.3);
        let s = ScalarField::from_values(&g, vals[..n].to_vec()).unwrap();
        let back = read_snapshot(&scalar_snapshot(&s, "theta", t, eps).to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.header.t.to_bits(), t.to_bits());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.to_scalar(&g).unwrap().values()), bits(s.values()));

        let comps: Vec<Vec<f64>> = (0..g.dims()).map(|a| vals[a * n..(a + 1) * n].to_vec()).collect();
        let v = VectorField::from_components(&g, comps.clone(), true).unwrap();
        let back = read_snapshot(&vector_snapshot(&v, "u", t, eps).to_bytes().unwrap()).unwrap().to_vector(&g).unwrap();
        for a in 0..g.dims() {
            prop_assert_eq!(bits(back.comp(a)), bits(&comps[a]));
        }

        let d = DirectorField::from_components(&g, [vals[..n].to_vec(), vals[n..2 * n].to_vec(), vals[2 * n..3 * n].to_vec()]).unwrap();
        let back = read_snapshot(&director_snapshot(&d, "d", t, Regularization::Limit).to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.header.regularization(), Regularization::Limit);
        let back = back.to_director(&g).unwrap();
        for k in 0..3 {
            prop_assert_eq!(bits(back.comp(k)), bits(d.comp(k)));
        }
    }
}

#[test]
fn states_round_trip_through_a_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = builtin_scenario("heated-shear-3d").unwrap().with_resolution(4);
    let s = sc.initial_state().unwrap();
    write_state(tmp.path(), &s).unwrap();
    assert_eq!(read_state(tmp.path(), &sc.grid.build().unwrap()).unwrap(), s);
    let other = Grid::new(&[1.0; 3], &[4, 4, 5], BcMode::Periodic, true).unwrap();
    assert!(read_state(tmp.path(), &other).is_err());
}

#[test]
fn run_directory_passes_its_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let rep = execute_run(&cfg, tmp.path()).unwrap();
    assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    assert_eq!(rep.snapshots, 1 + 4);
    let stored = parse_config(&fs::read_to_string(tmp.path().join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(stored, cfg);
    let table = parse_diagnostics_csv(&fs::read_to_string(tmp.path().join(DIAGNOSTICS_FILE)).unwrap()).unwrap();
    assert_eq!(table, rep.output.records);
    let audit = audit_dir(tmp.path()).unwrap();
    assert!(audit.passed(), "{:?}", audit.checks);
    assert_eq!(audit.snapshots, 5);
}

#[test]
fn identical_configs_give_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_config();
    execute_run(&cfg, a.path()).unwrap();
    execute_run(&cfg, b.path()).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(DIAGNOSTICS_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
    let snap = |d: &tempfile::TempDir| fs::read(d.path().join("snapshots/step_00000020/theta.bin")).unwrap();
    assert_eq!(snap(&a), snap(&b));
}

#[test]
fn audit_flags_damaged_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    execute_run(&small_config(), tmp.path()).unwrap();
    let theta = tmp.path().join("snapshots/step_00000010/theta.bin");
    let bytes = fs::read(&theta).unwrap();
    fs::write(&theta, &bytes[..bytes.len() - 8]).unwrap();
    let audit = audit_dir(tmp.path()).unwrap();
    let failed: Vec<_> = audit.failures().map(|c| c.name).collect();
    assert_eq!(failed, vec!["snapshot integrity"]);
    assert!(audit.checks[0].detail.contains("length mismatch"));

    // A well-formed snapshot with a negative temperature breaks admissibility.
    let mut snap = read_snapshot(&bytes).unwrap();
    snap.values[3] = -1.0;
    fs::write(&theta, snap.to_bytes().unwrap()).unwrap();
    let audit = audit_dir(tmp.path()).unwrap();
    assert!(audit.failures().any(|c| c.name == "admissible states"));

    // Pushing the director off the hemisphere trips the maximum principles.
    let dpath = tmp.path().join("snapshots/step_00000010/d.bin");
    fs::write(&theta, &bytes).unwrap();
    let mut d = read_snapshot(&fs::read(&dpath).unwrap()).unwrap();
    d.values[2] = -0.5;
    fs::write(&dpath, d.to_bytes().unwrap()).unwrap();
    let audit = audit_dir(tmp.path()).unwrap();
    let failed: Vec<_> = audit.failures().map(|c| c.name).collect();
    assert!(failed.contains(&"maximum principles"), "{failed:?}");
    assert!(failed.contains(&"diagnostics match snapshots"), "{failed:?}");
}

#[test]
fn audit_needs_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(audit_dir(tmp.path()).is_err());
    fs::write(tmp.path().join(CONFIG_FILE), emit_config(&small_config()).unwrap()).unwrap();
    assert!(audit_dir(tmp.path()).is_err());
}
