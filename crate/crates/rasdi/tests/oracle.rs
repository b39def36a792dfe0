//! Trajectories checked against values frozen from an independent
//! NumPy backward-Euler implementation (`python/oracle_two_branch.py`),
//! which writes the circuit equations by hand rather than assembling a netlist.
// Values are pasted verbatim from the reference script output.
#![allow(clippy::excessive_precision)]

use rasdi::aitken::{self, Strategy};
use rasdi::circuits::{self, TwoBranchParams};
use rasdi::dae::{self, Trajectory};
use rasdi::ras::{self, DiConfig};

const NAMES: [&str; 11] = ["i1", "i3", "v1", "e1", "e2", "e3", "er", "i2", "i4", "i5", "i6"];

type Frozen = [(usize, [f64; 11]); 3];

const EX1_DT: f64 = 1.2e-3;
const EX1: Frozen = [
    (
        1,
        [
            2.09154438285702216e-04,
            -3.68124552684677159e-04,
            -8.60058339793017379e-01,
            -8.36670841900480911e-02,
            -1.53385230285282170e-01,
            -1.01344357007829955e+00,
            0.00000000000000000e+00,
            1.39436292190468406e-04,
            -7.16715283160847781e-04,
            -3.48590730476169863e-04,
            3.68124552684677918e-04,
        ],
    ),
    (
        10,
        [
            4.08485826194096959e-04,
            5.87785252292472461e-04,
            9.64095221977043781e-01,
            2.96367963071936802e-01,
            1.41289735469840805e-01,
            1.10538495744688459e+00,
            0.00000000000000000e+00,
            3.10156455204191903e-04,
            -1.30857029105816265e-04,
            -7.18642281398288916e-04,
            -5.87785252292472677e-04,
        ],
    ),
    (
        50,
        [
            3.66137607111130135e-04,
            6.56489255163345460e-19,
            -1.13855854142904489e+00,
            -2.91943771714327616e-01,
            -1.53385230285282725e-01,
            -1.29194377171432762e+00,
            0.00000000000000000e+00,
            -2.77117082858089649e-04,
            -8.90205242530398493e-05,
            -8.90205242530405812e-05,
            -7.34788079488411934e-19,
        ],
    ),
];

const EX2_DT: f64 = 4.5e-4;
const EX2: Frozen = [
    (
        1,
        [
            9.24791573124291084e-05,
            -2.33380389250011934e-04,
            -5.24232877424951060e-01,
            1.02754619236032352e-01,
            -3.63036161055574125e-01,
            -8.87269038480525185e-01,
            0.00000000000000000e+00,
            9.31581560583212781e-04,
            -1.16496194983322461e-03,
            -1.02406071789564205e-03,
            1.40901231937582663e-04,
        ],
    ),
    (
        10,
        [
            -9.22243474404176207e-04,
            -6.54448661909617495e-05,
            -3.62868538463856360e-01,
            -1.06687093609626665e-01,
            9.97469798139987707e-02,
            -2.63121558649857590e-01,
            0.00000000000000000e+00,
            -4.12868146847250876e-04,
            3.47423280656289086e-04,
            1.33511162125142676e-03,
            9.87688340595137835e-04,
        ],
    ),
    (
        50,
        [
            -4.53381197517593198e-04,
            -2.53725583668954206e-04,
            -9.34218070884442420e-01,
            -1.63778397654182006e-01,
            6.33328920437127296e-02,
            -8.70885178840729690e-01,
            0.00000000000000000e+00,
            -4.54222579395789432e-04,
            2.00496995726835172e-04,
            9.07603776913382576e-04,
            7.07106781186547404e-04,
        ],
    ),
];

fn check(traj: &Trajectory, names: &[String], frozen: &Frozen, tol: f64) {
    assert_eq!(names, NAMES);
    for (step, want) in frozen {
        let got = &traj.states[*step];
        for (k, w) in want.iter().enumerate() {
            let err = (got[k] - w).abs();
            assert!(
                err <= tol * (1.0 + w.abs()),
                "step {step} {}: {} vs {w}",
                NAMES[k],
                got[k]
            );
        }
    }
}

#[test]
fn monolithic_matches_independent_reference() {
    let pre = circuits::ex1(&TwoBranchParams::ex1()).unwrap();
    let traj = dae::monolithic_solve(&pre.circuit.system, EX1_DT, 50.0 * EX1_DT).unwrap();
    check(&traj, &pre.circuit.names, &EX1, 1e-10);
    let pre = circuits::ex2(&TwoBranchParams::ex2()).unwrap();
    let traj = dae::monolithic_solve(&pre.circuit.system, EX2_DT, 50.0 * EX2_DT).unwrap();
    check(&traj, &pre.circuit.names, &EX2, 1e-10);
}

#[test]
fn accelerated_divergent_run_matches_independent_reference() {
    let pre = circuits::ex2(&TwoBranchParams::ex2()).unwrap();
    for strategy in [Strategy::Rebuild, Strategy::ReuseP, Strategy::Pipelined { m: 4 }] {
        let run =
            aitken::solve_accelerated(&pre.circuit.system, &pre.partition, EX2_DT, 50.0 * EX2_DT, strategy).unwrap();
        check(&run.trajectory, &pre.circuit.names, &EX2, 1e-8);
    }
}

#[test]
fn convergent_plain_iteration_matches_independent_reference() {
    let pre = circuits::ex1(&TwoBranchParams::ex1()).unwrap();
    // Below the threshold step the plain iteration converges.
    let dt = 1e-3;
    let run = ras::solve_di(&pre.circuit.system, &pre.partition, dt, 0.02, &DiConfig::default()).unwrap();
    assert!(run.converged());
    let mono = dae::monolithic_solve(&pre.circuit.system, dt, 0.02).unwrap();
    assert!(run.trajectory.max_diff(&mono) < 1e-8);
    let aitken = aitken::solve_accelerated(
        &pre.circuit.system,
        &pre.partition,
        EX1_DT,
        50.0 * EX1_DT,
        Strategy::Rebuild,
    )
    .unwrap();
    check(&aitken.trajectory, &pre.circuit.names, &EX1, 1e-8);
}
