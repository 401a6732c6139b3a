use std::f64::consts::TAU;

use nemthsim::harness::{builtin_scenario, oracle_compare, oracle_compare_state, random_admissible_state};
use nemthsim::{BcMode, Grid, StepParams};

fn shear_coeffs() -> nemthsim::CoefficientSet {
    builtin_scenario("heated-shear-2d").unwrap().coefficients.build().unwrap()
}

#[test]
fn equilibrium_has_no_discrepancy() {
    let rep = oracle_compare(&builtin_scenario("equilibrium").unwrap()).unwrap();
    assert!(rep.max() < 1e-12, "{rep:?}");
}

#[test]
fn random_states_agree() {
    for (dims, bc) in [(2, BcMode::Periodic), (2, BcMode::Walls), (3, BcMode::Periodic), (3, BcMode::Walls)] {
        let g = Grid::new(&vec![TAU; dims], &vec![8; dims], bc, true).unwrap();
        for seed in 0..2 {
            let s = random_admissible_state(&g, 0.5, seed).unwrap();
            let rep = oracle_compare_state(&s, &shear_coeffs(), &StepParams::new(1e-3)).unwrap();
            println!("{dims}d {bc:?} seed {seed}: {rep:?}");
            assert!(rep.max() < 1e-9, "{dims}d {bc:?}: {rep:?}");
        }
    }
}
