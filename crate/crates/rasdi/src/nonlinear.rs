//! Weakly nonlinear circuits: state-dependent coefficients frozen at the
//! previous accepted state, with the interface operator refitted each step.

use std::io::Write;

use nalgebra::DVector;

use crate::aitken::{self, InterfaceOperator, OperatorSource, StepMode};
use crate::circuits::CircuitDae;
use crate::dae::{self, CombinedSystem, Trajectory};
use crate::linalg::Lu;
use crate::partition::{interface_map, OverlapPartition};
use crate::ras;
use crate::{Error, Result};

/// Denominators at or below this are rejected.
pub const BLOWUP_TOL: f64 = 1e-12;

/// Conductance `1 / (g0 + alpha i)` controlled by its own branch current,
/// stamped into the row `G (e+ - e-) - i = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearConductance {
    pub row: usize,
    pub pos: usize,
    pub neg: usize,
    pub current: usize,
    pub g0: f64,
    pub alpha: f64,
}

impl NonlinearConductance {
    /// Locates the conductance element whose current variable is `name`.
    pub fn from_circuit(circuit: &CircuitDae, name: &str, g0: f64, alpha: f64) -> Result<Self> {
        let row = circuit
            .index(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no variable named `{name}`")))?;
        let a = &circuit.system.big_a;
        let terminals: Vec<(usize, f64)> = (0..a.ncols())
            .filter(|&j| j != row && a[(row, j)] != 0.0)
            .map(|j| (j, a[(row, j)]))
            .collect();
        let is_conductance = a[(row, row)] == -1.0
            && terminals.len() == 2
            && terminals[0].1 == -terminals[1].1
            && !circuit.system.diff_mask[row];
        if !is_conductance {
            return Err(Error::InvalidConfig(format!("`{name}` is not a conductance branch")));
        }
        let (pos, neg) = if terminals[0].1 > 0.0 {
            (terminals[0].0, terminals[1].0)
        } else {
            (terminals[1].0, terminals[0].0)
        };
        Ok(NonlinearConductance {
            row,
            pos,
            neg,
            current: row,
            g0,
            alpha,
        })
    }

    pub fn conductance(&self, state: &DVector<f64>) -> Result<f64> {
        let value = self.g0 + self.alpha * state[self.current];
        if !(value > BLOWUP_TOL) {
            return Err(Error::CoefficientBlowup { value });
        }
        Ok(1.0 / value)
    }
}

/// System with every nonlinear coefficient evaluated at `prev_state`.
pub fn linearize_step(
    sys: &CombinedSystem,
    elements: &[NonlinearConductance],
    prev_state: &DVector<f64>,
) -> Result<CombinedSystem> {
    let mut a = sys.big_a.clone();
    for e in elements {
        let g = e.conductance(prev_state)?;
        a[(e.row, e.pos)] = g;
        a[(e.row, e.neg)] = -g;
    }
    Ok(sys.with_matrix(a))
}

/// Backward Euler with the same freezing rule, solved monolithically.
pub fn frozen_oracle(
    sys: &CombinedSystem,
    elements: &[NonlinearConductance],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    let z0 = dae::initial_state(&linearize_step(sys, elements, &initial_guess(sys))?)?;
    let mut traj = Trajectory::new(dt, z0);
    for j in 1..=dae::step_count(dt, t_end) {
        let lin = linearize_step(sys, elements, traj.last()).map_err(|e| e.at_step(j))?;
        let step = dae::step_matrix(&lin.big_a, &lin.diff_mask, dt);
        let lu = Lu::new(&step)
            .ok_or(Error::SingularStepMatrix { dt })
            .map_err(|e| e.at_step(j))?;
        let b_step = dae::step_rhs(&lin.diff_mask, dt, traj.last(), &lin.b(j as f64 * dt));
        traj.push(lu.solve(&b_step));
    }
    Ok(traj)
}

/// Coefficients for the initial algebraic solve are taken at zero current.
fn initial_guess(sys: &CombinedSystem) -> DVector<f64> {
    DVector::zeros(sys.n())
}

#[derive(Clone, Debug)]
pub struct SteppedOperator {
    pub step: usize,
    pub operator: InterfaceOperator,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonlinearStrategy {
    /// Refit the operator at every step.
    Rebuild,
    /// Keep the step-1 operator; only valid for constant coefficients.
    ReuseFirst,
}

#[derive(Clone, Debug)]
pub struct NonlinearRun {
    pub trajectory: Trajectory,
    pub spectra: Vec<SteppedOperator>,
}

pub fn solve_nonlinear_accelerated(
    sys: &CombinedSystem,
    part: &OverlapPartition,
    elements: &[NonlinearConductance],
    dt: f64,
    t_end: f64,
    strategy: NonlinearStrategy,
) -> Result<NonlinearRun> {
    let map = interface_map(part)?;
    let z0 = dae::initial_state(&linearize_step(sys, elements, &initial_guess(sys))?)?;
    let mut traj = Trajectory::new(dt, z0);
    let mut spectra: Vec<SteppedOperator> = Vec::new();
    for j in 1..=dae::step_count(dt, t_end) {
        let run_step = || -> Result<(DVector<f64>, Option<InterfaceOperator>)> {
            let lin = linearize_step(sys, elements, traj.last())?;
            let locals = ras::build_locals(&lin, part, dt)?;
            let b_step = dae::step_rhs(&lin.diff_mask, dt, traj.last(), &lin.b(j as f64 * dt));
            let mode = match (strategy, spectra.first()) {
                (NonlinearStrategy::ReuseFirst, Some(first)) => StepMode::ReuseP(&first.operator),
                _ => StepMode::FirstStep,
            };
            let out = aitken::accelerated_step(&locals, &map, &b_step, traj.last(), mode)?;
            Ok((out.state, out.estimate.map(|e| e.operator)))
        };
        let (state, operator) = run_step().map_err(|e| e.at_step(j))?;
        if let Some(op) = operator {
            let op = op.with_source(OperatorSource::PerStepNonlinear);
            spectra.push(SteppedOperator {
                step: j,
                rho: op.spectral_radius,
                operator: op,
            });
        }
        traj.push(state);
    }
    Ok(NonlinearRun {
        trajectory: traj,
        spectra,
    })
}

/// `step,rho,lambda_re,lambda_im` with the dominant eigenvalue per step.
pub fn write_spectral_csv<W: Write>(spectra: &[SteppedOperator], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,rho,lambda_re,lambda_im")?;
    for s in spectra {
        let (re, im) = s
            .operator
            .eigenvalues
            .first()
            .map(|l| (l.re, l.im))
            .unwrap_or((0.0, 0.0));
        writeln!(w, "{},{},{},{}", s.step, s.rho, re, im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{ex2_nonlinear, NonlinearParams};
    use crate::linalg;

    #[test]
    fn element_located_from_row() {
        let (pre, e) = ex2_nonlinear(&NonlinearParams::default()).unwrap();
        let c = &pre.circuit;
        assert_eq!(e.row, c.index("i2").unwrap());
        assert_eq!(e.pos, c.index("e1").unwrap());
        assert_eq!(e.neg, c.index("e2").unwrap());
        assert!(NonlinearConductance::from_circuit(c, "i1", 1.0, 1.0).is_err());
    }

    #[test]
    fn blowup_detected() {
        let (pre, e) = ex2_nonlinear(&NonlinearParams::default()).unwrap();
        let mut z = DVector::zeros(pre.circuit.names.len());
        z[e.current] = -10.0 / 2000.0;
        assert!(matches!(e.conductance(&z), Err(Error::CoefficientBlowup { .. })));
        z[e.current] = 0.0;
        assert!((e.conductance(&z).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_keeps_system_fixed() {
        let params = NonlinearParams {
            alpha: 0.0,
            ..Default::default()
        };
        let (pre, e) = ex2_nonlinear(&params).unwrap();
        let sys = &pre.circuit.system;
        let mut z = DVector::zeros(sys.n());
        z[e.current] = 0.3;
        let lin = linearize_step(sys, &[e], &z).unwrap();
        assert!(linalg::max_abs(&(&lin.big_a - &sys.big_a)) < 1e-15);
    }

    #[test]
    fn conductance_monotone_in_current() {
        let (pre, e) = ex2_nonlinear(&NonlinearParams::default()).unwrap();
        let mut z = DVector::zeros(pre.circuit.names.len());
        let mut last = f64::INFINITY;
        for i in [-0.004, -0.002, 0.0, 0.002, 0.004] {
            z[e.current] = i;
            let g = e.conductance(&z).unwrap();
            assert!(g < last);
            last = g;
        }
    }
}
