//! Discrete dynamic iteration with restricted additive Schwarz splitting.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::aitken::InterfaceOperator;
use crate::dae::{self, CombinedSystem, Trajectory};
use crate::linalg::{self, Lu};
use crate::partition::OverlapPartition;
use crate::{Error, Result};

/// One partition's backward-Euler block on its extended set.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub part: usize,
    /// Global indices of the extended set.
    pub indices: Vec<usize>,
    /// Global indices read from neighbors.
    pub external: Vec<usize>,
    /// Which local entries are owned (written back).
    pub owned_mask: Vec<bool>,
    pub a_tilde: DMatrix<f64>,
    pub e_tilde: DMatrix<f64>,
    lu: Lu,
}

impl LocalSystem {
    /// `A_i^-1 (R_i b - E_i z_ext)` on the extended set.
    pub fn solve(&self, b_step: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let rhs = self.local_rhs(b_step, z);
        self.lu.solve(&rhs)
    }

    fn local_rhs(&self, b_step: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let mut rhs = DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&g| b_step[g]));
        if !self.external.is_empty() {
            let ext = DVector::from_iterator(self.external.len(), self.external.iter().map(|&g| z[g]));
            rhs -= &self.e_tilde * ext;
        }
        rhs
    }

    /// `A_i^-1 E_i`.
    pub fn coupling(&self) -> DMatrix<f64> {
        self.lu.solve_mat(&self.e_tilde)
    }

    pub fn inverse_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(rhs)
    }

    /// Writes the owned entries of a local solution into `out`.
    pub fn scatter_owned(&self, local: &DVector<f64>, out: &mut DVector<f64>) {
        for (a, &g) in self.indices.iter().enumerate() {
            if self.owned_mask[a] {
                out[g] = local[a];
            }
        }
    }

    /// Local row of global vertex `v`, if it lies in the extended set.
    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.indices.binary_search(&v).ok()
    }
}

/// Builds partition `i`'s local system from a precomputed step matrix.
pub fn build_local_from_step(step: &DMatrix<f64>, part: &OverlapPartition, i: usize) -> Result<LocalSystem> {
    let indices = part.extended[i].clone();
    let external = part.external[i].clone();
    let a_tilde = step.select_rows(&indices).select_columns(&indices);
    let e_tilde = step.select_rows(&indices).select_columns(&external);
    let lu = Lu::new(&a_tilde).ok_or(Error::SingularLocalMatrix { part: i })?;
    Ok(LocalSystem {
        part: i,
        owned_mask: part.owned_mask(i),
        indices,
        external,
        a_tilde,
        e_tilde,
        lu,
    })
}

pub fn build_local(sys: &CombinedSystem, part: &OverlapPartition, dt: f64, i: usize) -> Result<LocalSystem> {
    let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, dt);
    build_local_from_step(&step, part, i)
}

pub fn build_locals_from_step(step: &DMatrix<f64>, part: &OverlapPartition) -> Result<Vec<LocalSystem>> {
    (0..part.count())
        .map(|i| build_local_from_step(step, part, i))
        .collect()
}

pub fn build_locals(sys: &CombinedSystem, part: &OverlapPartition, dt: f64) -> Result<Vec<LocalSystem>> {
    if part.n() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition over {} vertices for a system of size {}",
            part.n(),
            sys.n()
        )));
    }
    let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, dt);
    build_locals_from_step(&step, part)
}

/// One RAS sweep: every partition solves against iterate `z`, owned entries
/// are assembled into the next iterate.
pub fn di_sweep(locals: &[LocalSystem], b_step: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(z.len());
    for local in locals {
        let sol = local.solve(b_step, z);
        local.scatter_owned(&sol, &mut out);
    }
    out
}

/// Dense `M_RAS^-1 = sum_i R~_i^T A_i^-1 R_i`.
pub fn ras_inverse(locals: &[LocalSystem], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for local in locals {
        let k = local.indices.len();
        let inv = local.lu.solve_mat(&DMatrix::identity(k, k));
        for (a, &ga) in local.indices.iter().enumerate() {
            if local.owned_mask[a] {
                for (b, &gb) in local.indices.iter().enumerate() {
                    m[(ga, gb)] += inv[(a, b)];
                }
            }
        }
    }
    m
}

/// `I - M_RAS^-1 A~`.
pub fn richardson_matrix(sys: &CombinedSystem, part: &OverlapPartition, dt: f64) -> Result<DMatrix<f64>> {
    let locals = build_locals(sys, part, dt)?;
    let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, dt);
    let n = sys.n();
    Ok(DMatrix::identity(n, n) - ras_inverse(&locals, n) * step)
}

/// Richardson form of one sweep: `z + M^-1 (b - A~ z)`.
pub fn richardson_update(
    m_inv: &DMatrix<f64>,
    step: &DMatrix<f64>,
    b_step: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    z + m_inv * (b_step - step * z)
}

/// Affine interface update `P zG + c`.
pub fn interface_iterate(p: &InterfaceOperator, zg: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    let n = p.matrix.nrows();
    if zg.len() != n || c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "interface vectors of length {} and {} for an operator of size {n}",
            zg.len(),
            c.len()
        )));
    }
    Ok(&p.matrix * zg + c)
}

/// Stopping rule for plain iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
}

impl Default for DiConfig {
    fn default() -> Self {
        DiConfig {
            rtol: 1e-10,
            atol: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub step: usize,
    pub iter: usize,
    pub err_inf: f64,
    /// `err_inf` over the previous iteration's; NaN on the first.
    pub err_ratio: f64,
}

/// `sqrt(err_k / err_{k-2})` within one step: the per-sweep contraction
/// averaged over two sweeps, which stays steady when the dominant
/// eigenvalues form a complex pair.
pub fn geometric_ratios(log: &[ConvergenceRecord]) -> Vec<f64> {
    (0..log.len())
        .map(|i| {
            if i >= 2 && log[i - 2].step == log[i].step {
                (log[i].err_inf / log[i - 2].err_inf).sqrt()
            } else {
                f64::NAN
            }
        })
        .collect()
}

pub fn write_convergence_csv<W: Write>(log: &[ConvergenceRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,iter,err_inf,err_ratio,geometric_ratio")?;
    for (r, g) in log.iter().zip(geometric_ratios(log)) {
        writeln!(w, "{},{},{},{},{}", r.step, r.iter, r.err_inf, r.err_ratio, g)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DiRun {
    pub trajectory: Trajectory,
    pub log: Vec<ConvergenceRecord>,
    /// First step whose iteration hit `max_iter`, if any. The run stops there.
    pub failed_step: Option<usize>,
}

impl DiRun {
    pub fn converged(&self) -> bool {
        self.failed_step.is_none()
    }
}

/// Iterates one step to tolerance from the warm start `z_prev`.
pub fn iterate_step(
    locals: &[LocalSystem],
    b_step: &DVector<f64>,
    z_prev: &DVector<f64>,
    cfg: &DiConfig,
    step: usize,
    log: &mut Vec<ConvergenceRecord>,
) -> (DVector<f64>, bool) {
    let mut z = z_prev.clone();
    let mut last = f64::NAN;
    for iter in 1..=cfg.max_iter {
        let next = di_sweep(locals, b_step, &z);
        let err = linalg::norm_inf(&(&next - &z));
        log.push(ConvergenceRecord {
            step,
            iter,
            err_inf: err,
            err_ratio: err / last,
        });
        last = err;
        let done = err <= cfg.rtol * linalg::norm_inf(&next) + cfg.atol;
        z = next;
        if done {
            return (z, true);
        }
        if !err.is_finite() {
            break;
        }
    }
    (z, false)
}

/// Plain (unaccelerated) dynamic iteration over `[0, t_end]`.
pub fn solve_di(sys: &CombinedSystem, part: &OverlapPartition, dt: f64, t_end: f64, cfg: &DiConfig) -> Result<DiRun> {
    let locals = build_locals(sys, part, dt)?;
    let mut traj = Trajectory::new(dt, dae::initial_state(sys)?);
    let mut log = Vec::new();
    for j in 1..=dae::step_count(dt, t_end) {
        let b = sys.b(j as f64 * dt);
        let b_step = dae::step_rhs(&sys.diff_mask, dt, traj.last(), &b);
        let (z, ok) = iterate_step(&locals, &b_step, traj.last(), cfg, j, &mut log);
        if !ok {
            log::warn!("plain iteration did not converge at step {j}");
            return Ok(DiRun {
                trajectory: traj,
                log,
                failed_step: Some(j),
            });
        }
        traj.push(z);
    }
    Ok(DiRun {
        trajectory: traj,
        log,
        failed_step: None,
    })
}

/// Runs `k` sweeps from `z0` and returns all iterates, `z0` included.
pub fn sweeps(locals: &[LocalSystem], b_step: &DVector<f64>, z0: &DVector<f64>, k: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(z0.clone());
    for _ in 0..k {
        let next = di_sweep(locals, b_step, out.last().unwrap());
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{combine, zero_forcing, LinearDae};
    use crate::linalg::mat;
    use crate::partition::{grow_overlap, AdjacencyGraph};
    use std::sync::Arc;

    fn small_system() -> CombinedSystem {
        let forcing: dae::Forcing = Arc::new(|t| DVector::from_vec(vec![t.cos(), 0.5, 1.0, -t]));
        let dae = LinearDae::new(
            mat(&[&[1.0, 0.3], &[0.0, 2.0]]),
            mat(&[&[0.5, 0.0], &[0.2, 0.1]]),
            mat(&[&[0.4, 0.0], &[0.0, 1.0]]),
            mat(&[&[3.0, 1.0], &[0.5, 4.0]]),
            forcing,
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        combine(&dae).unwrap()
    }

    fn split(sys: &CombinedSystem, base: &[Vec<usize>], p: usize) -> OverlapPartition {
        grow_overlap(&AdjacencyGraph::from_matrix(&sys.big_a), base, p, &sys.diff_mask).unwrap()
    }

    #[test]
    fn single_partition_is_monolithic() {
        let sys = small_system();
        let part = split(&sys, &[vec![0, 1, 2, 3]], 0);
        assert!(part.swallows_all(0));
        let r = richardson_matrix(&sys, &part, 0.1).unwrap();
        assert!(linalg::max_abs(&r) < 1e-14);
        let locals = build_locals(&sys, &part, 0.1).unwrap();
        let z0 = dae::initial_state(&sys).unwrap();
        let b_step = dae::step_rhs(&sys.diff_mask, 0.1, &z0, &sys.b(0.1));
        let z1 = di_sweep(&locals, &b_step, &z0);
        let mono = dae::Stepper::new(&sys, 0.1).unwrap().step(&z0, &sys.b(0.1));
        assert!(linalg::norm_inf(&(z1 - mono)) < 1e-14);
    }

    #[test]
    fn diagonal_system_converges_in_one_sweep() {
        let forcing: dae::Forcing = Arc::new(|_| DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let dae = LinearDae::new(
            mat(&[&[1.0]]),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(2, 1),
            mat(&[&[2.0, 0.0], &[0.0, 3.0]]),
            forcing,
            DVector::zeros(1),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        let part = grow_overlap(
            &AdjacencyGraph::from_matrix(&sys.big_a),
            &[vec![0], vec![1, 2]],
            0,
            &sys.diff_mask,
        )
        .unwrap();
        let locals = build_locals(&sys, &part, 0.1).unwrap();
        assert!(locals.iter().all(|l| l.e_tilde.is_empty()));
        let z0 = DVector::from_vec(vec![5.0, 5.0, 5.0]);
        let b_step = dae::step_rhs(&sys.diff_mask, 0.1, &z0, &sys.b(0.1));
        let z1 = di_sweep(&locals, &b_step, &z0);
        let mono = dae::Stepper::new(&sys, 0.1).unwrap().step(&z0, &sys.b(0.1));
        assert!(linalg::norm_inf(&(z1 - mono)) < 1e-14);
    }

    #[test]
    fn local_blocks_match_step_matrix() {
        let sys = small_system();
        let part = split(&sys, &[vec![0, 2], vec![1, 3]], 0);
        let dt = 0.05;
        let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, dt);
        for i in 0..2 {
            let l = build_local(&sys, &part, dt, i).unwrap();
            for (a, &ga) in l.indices.iter().enumerate() {
                for (b, &gb) in l.indices.iter().enumerate() {
                    assert_eq!(l.a_tilde[(a, b)], step[(ga, gb)]);
                }
                for (b, &gb) in l.external.iter().enumerate() {
                    assert_eq!(l.e_tilde[(a, b)], step[(ga, gb)]);
                }
            }
        }
    }

    #[test]
    fn monolithic_step_is_a_fixed_point() {
        let sys = small_system();
        let part = split(&sys, &[vec![0, 2], vec![1, 3]], 0);
        let dt = 0.05;
        let locals = build_locals(&sys, &part, dt).unwrap();
        let z0 = dae::initial_state(&sys).unwrap();
        let b_step = dae::step_rhs(&sys.diff_mask, dt, &z0, &sys.b(dt));
        let mono = dae::Stepper::new(&sys, dt).unwrap().step(&z0, &sys.b(dt));
        let again = di_sweep(&locals, &b_step, &mono);
        assert!(linalg::norm_inf(&(again - &mono)) < 1e-12);
    }

    #[test]
    fn sweep_equals_richardson_update() {
        let sys = small_system();
        let part = split(&sys, &[vec![0, 1], vec![2, 3]], 1);
        let dt = 0.05;
        let locals = build_locals(&sys, &part, dt).unwrap();
        let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, dt);
        let m_inv = ras_inverse(&locals, sys.n());
        let z = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        let b_step = DVector::from_vec(vec![1.0, 2.0, -0.5, 0.25]);
        let a = di_sweep(&locals, &b_step, &z);
        let b = richardson_update(&m_inv, &step, &b_step, &z);
        assert!(linalg::norm_inf(&(a - b)) < 1e-12);
    }

    #[test]
    fn interface_iterate_basics() {
        let p = InterfaceOperator::new(DMatrix::zeros(2, 2), crate::aitken::OperatorSource::Analytic);
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let out = interface_iterate(&p, &DVector::from_vec(vec![9.0, 9.0]), &c).unwrap();
        assert_eq!(out, c);
        let p = InterfaceOperator::new(
            mat(&[&[2.0, 0.0], &[0.0, -1.0]]),
            crate::aitken::OperatorSource::Analytic,
        );
        let v = DVector::from_vec(vec![0.0, 3.0]);
        let out = interface_iterate(&p, &v, &DVector::zeros(2)).unwrap();
        assert_eq!(out, -v);
        assert!(matches!(
            interface_iterate(&p, &DVector::zeros(3), &DVector::zeros(2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn plain_di_matches_monolithic_when_convergent() {
        let sys = small_system();
        let part = split(&sys, &[vec![0, 2], vec![1, 3]], 0);
        let run = solve_di(&sys, &part, 0.01, 0.2, &DiConfig::default()).unwrap();
        assert!(run.converged());
        let mono = dae::monolithic_solve(&sys, 0.01, 0.2).unwrap();
        assert!(run.trajectory.max_diff(&mono) < 1e-8);
        let mut buf = Vec::new();
        write_convergence_csv(&run.log, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("step,iter,err_inf,err_ratio,geometric_ratio\n1,1,"));
    }

    #[test]
    fn zero_forcing_zero_state_stays_zero() {
        let dae = LinearDae::new(
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[2.0]]),
            zero_forcing(2),
            DVector::zeros(1),
        )
        .unwrap();
        let sys = combine(&dae).unwrap();
        let part = split(&sys, &[vec![0], vec![1]], 0);
        let run = solve_di(&sys, &part, 0.1, 0.3, &DiConfig::default()).unwrap();
        assert!(run.trajectory.states.iter().all(|z| z.iter().all(|v| *v == 0.0)));
    }
}
