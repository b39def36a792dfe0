//! Semi-explicit linear DAEs, their combined form and the monolithic
//! backward-Euler reference solver.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, Lu};
use crate::{Error, Result};

/// Right-hand side `b(t)` of the combined system, differential rows first.
pub type Forcing = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Relative residual accepted for a least-squares initial algebraic state.
const INIT_TOL: f64 = 1e-10;

pub fn zero_forcing(n: usize) -> Forcing {
    Arc::new(move |_| DVector::zeros(n))
}

/// `x' + A x + B y = b1(t)`, `C x + D y = b2(t)`.
#[derive(Clone)]
pub struct LinearDae {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Stacked `[b1(t); b2(t)]`.
    pub forcing: Forcing,
    pub x0: DVector<f64>,
}

impl std::fmt::Debug for LinearDae {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearDae")
            .field("n1", &self.n1())
            .field("n2", &self.n2())
            .finish()
    }
}

impl LinearDae {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        forcing: Forcing,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let dae = LinearDae {
            a,
            b,
            c,
            d,
            forcing,
            x0,
        };
        dae.check_dims()?;
        Ok(dae)
    }

    pub fn n1(&self) -> usize {
        self.a.nrows()
    }

    pub fn n2(&self) -> usize {
        self.d.nrows()
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn b1(&self, t: f64) -> DVector<f64> {
        (self.forcing)(t).rows(0, self.n1()).into_owned()
    }

    pub fn b2(&self, t: f64) -> DVector<f64> {
        (self.forcing)(t).rows(self.n1(), self.n2()).into_owned()
    }

    fn check_dims(&self) -> Result<()> {
        let (n1, n2) = (self.a.nrows(), self.d.nrows());
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.a.ncols() != n1 {
            return bad("A must be square");
        }
        if self.d.ncols() != n2 {
            return bad("D must be square");
        }
        if self.b.shape() != (n1, n2) {
            return bad("B must be n1 x n2");
        }
        if self.c.shape() != (n2, n1) {
            return bad("C must be n2 x n1");
        }
        if self.x0.len() != n1 {
            return bad("x0 must have length n1");
        }
        if (self.forcing)(0.0).len() != n1 + n2 {
            return bad("forcing must return n1 + n2 entries");
        }
        Ok(())
    }
}

/// `I_d z' + A z = b(t)` with `A = [[A, B], [C, D]]`.
#[derive(Clone)]
pub struct CombinedSystem {
    pub big_a: DMatrix<f64>,
    pub diff_mask: Vec<bool>,
    pub forcing: Forcing,
    pub x0: DVector<f64>,
}

impl std::fmt::Debug for CombinedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CombinedSystem")
            .field("n", &self.n())
            .field("n1", &self.n1())
            .field("big_a", &self.big_a)
            .finish()
    }
}

impl CombinedSystem {
    pub fn n(&self) -> usize {
        self.big_a.nrows()
    }

    pub fn n1(&self) -> usize {
        self.diff_mask.iter().filter(|d| **d).count()
    }

    pub fn b(&self, t: f64) -> DVector<f64> {
        (self.forcing)(t)
    }

    /// Splits back into the four blocks.
    pub fn to_dae(&self) -> LinearDae {
        let (n1, n) = (self.n1(), self.n());
        let n2 = n - n1;
        LinearDae {
            a: self.big_a.view((0, 0), (n1, n1)).into_owned(),
            b: self.big_a.view((0, n1), (n1, n2)).into_owned(),
            c: self.big_a.view((n1, 0), (n2, n1)).into_owned(),
            d: self.big_a.view((n1, n1), (n2, n2)).into_owned(),
            forcing: self.forcing.clone(),
            x0: self.x0.clone(),
        }
    }

    /// Same system with a different matrix; forcing and initial state shared.
    pub fn with_matrix(&self, big_a: DMatrix<f64>) -> CombinedSystem {
        CombinedSystem {
            big_a,
            diff_mask: self.diff_mask.clone(),
            forcing: self.forcing.clone(),
            x0: self.x0.clone(),
        }
    }
}

pub fn combine(dae: &LinearDae) -> Result<CombinedSystem> {
    dae.check_dims()?;
    let (n1, n2) = (dae.n1(), dae.n2());
    let n = n1 + n2;
    let mut big_a = DMatrix::zeros(n, n);
    big_a.view_mut((0, 0), (n1, n1)).copy_from(&dae.a);
    big_a.view_mut((0, n1), (n1, n2)).copy_from(&dae.b);
    big_a.view_mut((n1, 0), (n2, n1)).copy_from(&dae.c);
    big_a.view_mut((n1, n1), (n2, n2)).copy_from(&dae.d);
    let diff_mask = (0..n).map(|i| i < n1).collect();
    Ok(CombinedSystem {
        big_a,
        diff_mask,
        forcing: dae.forcing.clone(),
        x0: dae.x0.clone(),
    })
}

/// `y0 = D^-1 (b2(0) - C x0)`.
pub fn consistent_y0(dae: &LinearDae) -> Result<DVector<f64>> {
    let lu = Lu::new(&dae.d).ok_or(Error::SingularD)?;
    Ok(lu.solve(&(dae.b2(0.0) - &dae.c * &dae.x0)))
}

/// Full initial state `[x0; y0]`. When D is singular (index-2 circuits with
/// floating node potentials) the minimum-norm algebraic state is used,
/// provided it satisfies the constraint.
pub fn initial_state(sys: &CombinedSystem) -> Result<DVector<f64>> {
    let dae = sys.to_dae();
    let y0 = match consistent_y0(&dae) {
        Ok(y) => y,
        Err(Error::SingularD) => {
            let rhs = dae.b2(0.0) - &dae.c * &dae.x0;
            let (pinv, _) = linalg::pinv(&dae.d, linalg::SVD_TOL);
            let y = &pinv * &rhs;
            let residual = linalg::norm_inf(&(&dae.d * &y - &rhs));
            if residual > INIT_TOL * (1.0 + linalg::norm_inf(&y) + linalg::norm_inf(&rhs)) {
                return Err(Error::InconsistentInitialState { residual });
            }
            y
        }
        Err(e) => return Err(e),
    };
    let mut z = DVector::zeros(sys.n());
    z.rows_mut(0, dae.n1()).copy_from(&dae.x0);
    z.rows_mut(dae.n1(), dae.n2()).copy_from(&y0);
    Ok(z)
}

/// Backward-Euler step matrix with differential rows scaled by `dt`:
/// `[[I + dt A, dt B], [C, D]]`.
pub fn step_matrix(big_a: &DMatrix<f64>, diff_mask: &[bool], dt: f64) -> DMatrix<f64> {
    let mut s = big_a.clone();
    for (i, d) in diff_mask.iter().enumerate() {
        if *d {
            s.row_mut(i).scale_mut(dt);
            s[(i, i)] += 1.0;
        }
    }
    s
}

/// Step right-hand side: `z_prev + dt b` on differential rows, `b` elsewhere.
pub fn step_rhs(diff_mask: &[bool], dt: f64, z_prev: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(b.len(), |i, _| if diff_mask[i] { z_prev[i] + dt * b[i] } else { b[i] })
}

/// Fixed-step backward-Euler solver with the step matrix factorized once.
#[derive(Clone, Debug)]
pub struct Stepper {
    dt: f64,
    lu: Lu,
    diff_mask: Vec<bool>,
}

impl Stepper {
    pub fn new(sys: &CombinedSystem, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        let s = step_matrix(&sys.big_a, &sys.diff_mask, dt);
        let lu = Lu::new(&s).ok_or(Error::SingularStepMatrix { dt })?;
        Ok(Stepper {
            dt,
            lu,
            diff_mask: sys.diff_mask.clone(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, z_prev: &DVector<f64>, b_next: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(&step_rhs(&self.diff_mask, self.dt, z_prev, b_next))
    }
}

/// Fixed-step state history.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(dt: f64, z0: DVector<f64>) -> Self {
        Trajectory {
            dt,
            times: vec![0.0],
            states: vec![z0],
        }
    }

    pub fn push(&mut self, z: DVector<f64>) {
        let j = self.times.len();
        self.times.push(j as f64 * self.dt);
        self.states.push(z);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Largest per-step infinity-norm gap to another trajectory.
    pub fn max_diff(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| linalg::norm_inf(&(a - b)))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (t, z) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in z.iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Number of whole steps of size `dt` that fit in `t_end`.
pub fn step_count(dt: f64, t_end: f64) -> usize {
    ((t_end / dt) + 1e-9).floor().max(0.0) as usize
}

/// Monolithic backward-Euler reference.
pub fn monolithic_solve(sys: &CombinedSystem, dt: f64, t_end: f64) -> Result<Trajectory> {
    let stepper = Stepper::new(sys, dt)?;
    let mut traj = Trajectory::new(dt, initial_state(sys)?);
    for j in 1..=step_count(dt, t_end) {
        let z = stepper.step(traj.last(), &sys.b(j as f64 * dt));
        traj.push(z);
    }
    Ok(traj)
}

/// `||I_d (z1 - z0)/dt + A z1 - b(t1)||_inf`.
pub fn be_residual(sys: &CombinedSystem, dt: f64, z0: &DVector<f64>, z1: &DVector<f64>, t1: f64) -> f64 {
    let mut r = &sys.big_a * z1 - sys.b(t1);
    for (i, d) in sys.diff_mask.iter().enumerate() {
        if *d {
            r[i] += (z1[i] - z0[i]) / dt;
        }
    }
    linalg::norm_inf(&r)
}

/// `||C x + D y - b2(t)||_inf`.
pub fn algebraic_residual(sys: &CombinedSystem, z: &DVector<f64>, t: f64) -> f64 {
    let r = &sys.big_a * z - sys.b(t);
    sys.diff_mask
        .iter()
        .zip(r.iter())
        .filter(|(d, _)| !**d)
        .fold(0.0, |acc, (_, v)| acc.max(v.abs()))
}

/// Worst relative residuals over a trajectory: (backward Euler, algebraic).
pub fn trajectory_residuals(sys: &CombinedSystem, traj: &Trajectory) -> (f64, f64) {
    let mut be: f64 = 0.0;
    let mut alg: f64 = 0.0;
    for j in 1..traj.len() {
        let (z0, z1) = (&traj.states[j - 1], &traj.states[j]);
        let t1 = traj.times[j];
        let scale = 1.0 + linalg::norm_inf(z1);
        be = be.max(be_residual(sys, traj.dt, z0, z1, t1) / scale);
        alg = alg.max(algebraic_residual(sys, z1, t1) / scale);
    }
    (be, alg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;

    fn const_forcing(v: Vec<f64>) -> Forcing {
        Arc::new(move |_| DVector::from_vec(v.clone()))
    }

    #[test]
    fn combine_places_blocks() {
        let dae = LinearDae::new(
            mat(&[&[2.0]]),
            mat(&[&[3.0]]),
            mat(&[&[4.0]]),
            mat(&[&[5.0]]),
            zero_forcing(2),
            DVector::zeros(1),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        assert_eq!(sys.big_a, mat(&[&[2.0, 3.0], &[4.0, 5.0]]));
        assert_eq!(sys.diff_mask, vec![true, false]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let r = LinearDae::new(
            mat(&[&[2.0]]),
            mat(&[&[3.0, 1.0]]),
            mat(&[&[4.0]]),
            mat(&[&[5.0]]),
            zero_forcing(2),
            DVector::zeros(1),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn y0_identity_d() {
        let dae = LinearDae::new(
            mat(&[&[0.0]]),
            mat(&[&[0.0, 0.0]]),
            mat(&[&[1.0], &[0.0]]),
            DMatrix::identity(2, 2),
            const_forcing(vec![0.0, 5.0, 1.0]),
            DVector::from_vec(vec![2.0]),
        )
        .unwrap();
        let y = consistent_y0(&dae).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn y0_homogeneous_constraint() {
        let dae = LinearDae::new(
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[0.0]]),
            mat(&[&[2.0]]),
            zero_forcing(2),
            DVector::from_vec(vec![7.0]),
        )
        .unwrap();
        assert_eq!(consistent_y0(&dae).unwrap()[0], 0.0);
    }

    #[test]
    fn singular_d_detected() {
        let dae = LinearDae::new(
            mat(&[&[1.0]]),
            mat(&[&[1.0, 1.0]]),
            mat(&[&[0.0], &[0.0]]),
            mat(&[&[1.0, 1.0], &[1.0, 1.0]]),
            zero_forcing(3),
            DVector::zeros(1),
        )
        .unwrap();
        assert!(matches!(consistent_y0(&dae), Err(Error::SingularD)));
    }

    #[test]
    fn scalar_decay_one_step() {
        let dae = LinearDae::new(
            mat(&[&[1.0]]),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(0, 0),
            zero_forcing(1),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        let traj = monolithic_solve(&sys, 0.1, 0.1).unwrap();
        assert_eq!(traj.len(), 2);
        assert!((traj.states[1][0] - 1.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn pure_algebraic_ignores_dt() {
        let forcing: Forcing = Arc::new(|t| DVector::from_vec(vec![t.sin(), 2.0]));
        let dae = LinearDae::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 2),
            DMatrix::zeros(2, 0),
            mat(&[&[2.0, 1.0], &[0.0, 4.0]]),
            forcing,
            DVector::zeros(0),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        for dt in [0.1, 0.05] {
            let traj = monolithic_solve(&sys, dt, 0.2).unwrap();
            for (t, z) in traj.times.iter().zip(&traj.states) {
                let y1 = 0.5;
                let y0 = (t.sin() - y1) / 2.0;
                assert!((z[0] - y0).abs() < 1e-14 && (z[1] - y1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn decoupled_blocks_match_standalone_ode() {
        let forcing: Forcing = Arc::new(|t| DVector::from_vec(vec![t.cos(), 0.0, 3.0]));
        let dae = LinearDae::new(
            mat(&[&[2.0, 1.0], &[0.0, 3.0]]),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            mat(&[&[1.5]]),
            forcing,
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        let dt = 0.01;
        let traj = monolithic_solve(&sys, dt, 0.5).unwrap();
        let a = mat(&[&[2.0, 1.0], &[0.0, 3.0]]);
        let lu = Lu::new(&(DMatrix::identity(2, 2) + &a * dt)).unwrap();
        let mut x = DVector::from_vec(vec![1.0, -1.0]);
        for j in 1..traj.len() {
            let t = j as f64 * dt;
            x = lu.solve(&(&x + DVector::from_vec(vec![t.cos(), 0.0]) * dt));
            assert!((traj.states[j][0] - x[0]).abs() < 1e-12);
            assert!((traj.states[j][1] - x[1]).abs() < 1e-12);
            assert!((traj.states[j][2] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = Trajectory {
            dt: 0.5,
            times: vec![0.0, 0.5],
            states: vec![DVector::from_vec(vec![1.0, 0.1]), DVector::from_vec(vec![2.0, 0.2])],
        };
        let mut buf = Vec::new();
        traj.write_csv(&["x".into(), "y".into()], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,y\n0,1,0.1\n0.5,2,0.2\n");
    }
}
