//! Interface error operators and Aitken extrapolation of the interface
//! iteration, with sequential and pipelined time-stepping strategies.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dae::{self, CombinedSystem, Trajectory};
use crate::linalg::{self, Lu};
use crate::partition::{interface_map, InterfaceMap, OverlapPartition};
use crate::ras::{self, LocalSystem};
use crate::{Error, Result};

/// Distance to 1 below which an eigenvalue counts as unit.
pub const UNIT_TOL: f64 = 1e-8;

/// Rows of the difference history at or below this fraction of its largest
/// entry are treated as inactive interface slots.
pub const INACTIVE_ROW_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSource {
    Analytic,
    Numeric,
    PerStepNonlinear,
    Probed,
}

/// Linear part `P` of the affine interface map.
#[derive(Clone, Debug)]
pub struct InterfaceOperator {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub spectral_radius: f64,
    pub has_unit_eigenvalue: bool,
    pub source: OperatorSource,
}

impl InterfaceOperator {
    pub fn new(matrix: DMatrix<f64>, source: OperatorSource) -> Self {
        let eigenvalues = linalg::eigenvalues(&matrix);
        let spectral_radius = eigenvalues.first().map(|l| l.norm()).unwrap_or(0.0);
        let has_unit_eigenvalue = eigenvalues.iter().any(|l| (l - 1.0).norm() <= UNIT_TOL);
        InterfaceOperator {
            matrix,
            eigenvalues,
            spectral_radius,
            has_unit_eigenvalue,
            source,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_source(mut self, source: OperatorSource) -> Self {
        self.source = source;
        self
    }
}

/// `P = R_Γ (I - M_RAS^-1 A~) R_Γ^T` assembled slot by slot. A slot holding
/// vertex `v` is rewritten by the partition owning `v`, which reads its own
/// external block, so that row is `-(A_o^-1 E_o)[v, :]` in `o`'s columns.
pub fn interface_operator(locals: &[LocalSystem], part: &OverlapPartition, map: &InterfaceMap) -> InterfaceOperator {
    let couplings: Vec<DMatrix<f64>> = locals.iter().map(|l| l.coupling()).collect();
    let mut p = DMatrix::zeros(map.n_gamma, map.n_gamma);
    for (s, &v) in map.gamma.iter().enumerate() {
        let o = part.owner_of(v);
        let row = locals[o].local_index(v).expect("owned vertex lies in its extended set");
        let cols = map.block(o);
        for (b, col) in cols.enumerate() {
            p[(s, col)] = -couplings[o][(row, b)];
        }
    }
    InterfaceOperator::new(p, OperatorSource::Analytic)
}

/// Affine term `c` of the interface map for one step right-hand side.
pub fn interface_affine(
    locals: &[LocalSystem],
    part: &OverlapPartition,
    map: &InterfaceMap,
    b_step: &DVector<f64>,
) -> DVector<f64> {
    let zero = DVector::zeros(b_step.len());
    let sols: Vec<DVector<f64>> = locals.iter().map(|l| l.solve(b_step, &zero)).collect();
    DVector::from_iterator(
        map.n_gamma,
        map.gamma.iter().map(|&v| {
            let o = part.owner_of(v);
            sols[o][locals[o].local_index(v).expect("owned vertex lies in its extended set")]
        }),
    )
}

/// Two-partition block form `[[0, P0], [P1, 0]]`: the first external set is
/// rewritten by partition 1 from the second external set, and vice versa.
pub fn analytic_p_two_partitions(
    locals: &[LocalSystem],
    part: &OverlapPartition,
    map: &InterfaceMap,
) -> Result<InterfaceOperator> {
    if part.count() != 2 || locals.len() != 2 {
        return Err(Error::NotTwoPartitions(part.count()));
    }
    let mut p = DMatrix::zeros(map.n_gamma, map.n_gamma);
    for (rows_of, solver) in [(0usize, 1usize), (1, 0)] {
        let coupling = locals[solver].coupling();
        let rows = map.block(rows_of);
        let cols = map.block(solver);
        for (s, &v) in rows.clone().zip(&part.external[rows_of]) {
            let r = locals[solver]
                .local_index(v)
                .expect("external vertex is owned by the other side");
            for (b, col) in cols.clone().enumerate() {
                p[(s, col)] = -coupling[(r, b)];
            }
        }
    }
    Ok(InterfaceOperator::new(p, OperatorSource::Analytic))
}

/// Builds the locals, interface map and exact operator at one step size.
pub fn operator_at(
    sys: &CombinedSystem,
    part: &OverlapPartition,
    dt: f64,
) -> Result<(InterfaceOperator, InterfaceMap)> {
    let locals = ras::build_locals(sys, part, dt)?;
    let map = interface_map(part)?;
    Ok((interface_operator(&locals, part, &map), map))
}

/// Least-squares fit of `P` from paired difference vectors.
#[derive(Clone, Debug)]
pub struct PEstimate {
    pub operator: InterfaceOperator,
    pub rank: usize,
    /// Number of slots that ever moved in the history.
    pub effective_dim: usize,
    /// `||Y - P X|| / ||Y||`.
    pub residual: f64,
}

impl PEstimate {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.effective_dim
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.rank_deficient() {
            return Err(Error::RankDeficientHistory {
                rank: self.rank,
                dim: self.effective_dim,
            });
        }
        Ok(())
    }
}

/// `P = Y X^+` where column `j` of `Y` is the successor of column `j` of `X`.
/// Minimum-norm when `X` does not have full row rank.
pub fn numeric_p_pairs(xs: &[DVector<f64>], ys: &[DVector<f64>]) -> Result<PEstimate> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "need matching nonempty pair lists, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let dim = xs[0].len();
    if xs.iter().chain(ys).any(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch("history vectors differ in length".into()));
    }
    let x = DMatrix::from_columns(xs);
    let y = DMatrix::from_columns(ys);
    let scale = linalg::max_abs(&x);
    let effective_dim = x
        .row_iter()
        .filter(|r| r.iter().any(|v| v.abs() > INACTIVE_ROW_TOL * scale))
        .count();
    // Differences shrink or grow geometrically over the sweeps; unit-norm
    // pairs keep the early directions above the singular value cutoff.
    let mut xn = x.clone();
    let mut yn = y.clone();
    for j in 0..x.ncols() {
        let norm = x.column(j).norm();
        if norm > 0.0 {
            xn.column_mut(j).scale_mut(1.0 / norm);
            yn.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    let (x_pinv, rank) = linalg::pinv(&xn, linalg::SVD_TOL);
    let p = &yn * x_pinv;
    let y_scale = linalg::max_abs(&y);
    let residual = if y_scale > 0.0 {
        linalg::max_abs(&(&y - &p * &x)) / y_scale
    } else {
        0.0
    };
    Ok(PEstimate {
        operator: InterfaceOperator::new(p, OperatorSource::Numeric),
        rank,
        effective_dim,
        residual,
    })
}

/// Operator from consecutive differences `e^1, e^2, ...` (oldest first),
/// paired as `[e^K .. e^2] = P [e^{K-1} .. e^1]`.
pub fn numeric_p(diffs: &[DVector<f64>]) -> Result<PEstimate> {
    if diffs.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least two differences, got {}",
            diffs.len()
        )));
    }
    let xs: Vec<DVector<f64>> = diffs[..diffs.len() - 1].iter().rev().cloned().collect();
    let ys: Vec<DVector<f64>> = diffs[1..].iter().rev().cloned().collect();
    numeric_p_pairs(&xs, &ys)
}

/// Consecutive differences of a sequence of vectors.
pub fn differences(seq: &[DVector<f64>]) -> Vec<DVector<f64>> {
    seq.windows(2).map(|w| &w[1] - &w[0]).collect()
}

/// Fixed point `(I - P)^-1 (z_k - P z_{k-1})` of the affine map through two
/// successive iterates.
pub fn accelerate(p: &InterfaceOperator, zk: &DVector<f64>, zkm1: &DVector<f64>) -> Result<DVector<f64>> {
    let n = p.dim();
    if zk.len() != n || zkm1.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "iterates of length {} and {} for an operator of size {n}",
            zk.len(),
            zkm1.len()
        )));
    }
    if p.has_unit_eigenvalue {
        return Err(Error::UnitEigenvalue);
    }
    let lu = Lu::new(&(DMatrix::identity(n, n) - &p.matrix)).ok_or(Error::UnitEigenvalue)?;
    Ok(lu.solve(&(zk - &p.matrix * zkm1)))
}

/// Sweeps from `z0` until the difference history identifies `P` on the
/// slots that move, starting at `n_Γ + 1` sweeps and adding one at a time up
/// to `max_sweeps`. Returns the estimate and the full iterates.
pub fn estimate_operator(
    locals: &[LocalSystem],
    map: &InterfaceMap,
    b_step: &DVector<f64>,
    z0: &DVector<f64>,
    max_sweeps: usize,
) -> Result<(PEstimate, Vec<DVector<f64>>)> {
    let min_sweeps = map.n_gamma + 1;
    let mut iterates = ras::sweeps(locals, b_step, z0, min_sweeps);
    loop {
        let gamma: Vec<DVector<f64>> = iterates.iter().map(|z| map.gather(z)).collect();
        let est = numeric_p(&differences(&gamma))?;
        let done = iterates.len() > max_sweeps.max(min_sweeps);
        if !est.rank_deficient() || done {
            if est.rank_deficient() {
                log::warn!(
                    "difference history has rank {} on {} active slots after {} sweeps; using the minimum-norm operator",
                    est.rank,
                    est.effective_dim,
                    iterates.len() - 1
                );
            }
            return Ok((est, iterates));
        }
        let next = ras::di_sweep(locals, b_step, iterates.last().unwrap());
        iterates.push(next);
    }
}

/// Result of one accelerated step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: DVector<f64>,
    /// Interface sweeps spent before the finishing solve.
    pub sweeps: usize,
    pub estimate: Option<PEstimate>,
}

/// How the interface operator is obtained for a step.
#[derive(Clone, Copy, Debug)]
pub enum StepMode<'a> {
    /// Sweep `n_Γ + 1` times (more if rank deficient) and fit `P`.
    FirstStep,
    /// One sweep, then extrapolate with a known operator.
    ReuseP(&'a InterfaceOperator),
}

/// One accelerated step from the warm start `z_prev`: sweeps, Aitken on the
/// earliest iterate pair (least amplified by divergence), then one finishing
/// local solve from the extrapolated interface.
pub fn accelerated_step(
    locals: &[LocalSystem],
    map: &InterfaceMap,
    b_step: &DVector<f64>,
    z_prev: &DVector<f64>,
    mode: StepMode<'_>,
) -> Result<StepOutcome> {
    let (operator, iterates, estimate) = match mode {
        StepMode::FirstStep => {
            let (est, it) = estimate_operator(locals, map, b_step, z_prev, 2 * map.n_gamma + 1)?;
            (est.operator.clone(), it, Some(est))
        }
        StepMode::ReuseP(p) => (p.clone(), ras::sweeps(locals, b_step, z_prev, 1), None),
    };
    let z_inf = accelerate(&operator, &map.gather(&iterates[1]), &map.gather(&iterates[0]))?;
    let mut seed = iterates[0].clone();
    map.scatter_into(&z_inf, &mut seed);
    Ok(StepOutcome {
        state: ras::di_sweep(locals, b_step, &seed),
        sweeps: iterates.len() - 1,
        estimate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Fit a fresh operator at every step.
    Rebuild,
    /// Fit once at step 1, one sweep per later step.
    ReuseP,
    /// Accelerate windows of `m` steps at once.
    Pipelined { m: usize },
}

#[derive(Clone, Debug)]
pub struct AcceleratedRun {
    pub trajectory: Trajectory,
    /// Interface sweeps per step (finishing solve excluded).
    pub sweeps: Vec<usize>,
    /// Operator fitted at step 1.
    pub operator: Option<InterfaceOperator>,
}

/// Accelerated dynamic iteration over `[0, t_end]`.
pub fn solve_accelerated(
    sys: &CombinedSystem,
    part: &OverlapPartition,
    dt: f64,
    t_end: f64,
    strategy: Strategy,
) -> Result<AcceleratedRun> {
    let locals = ras::build_locals(sys, part, dt)?;
    let z0 = dae::initial_state(sys)?;
    let steps = dae::step_count(dt, t_end);
    let mut traj = Trajectory::new(dt, z0);
    let map = match interface_map(part) {
        Ok(map) => map,
        Err(Error::EmptyInterface) => {
            for j in 1..=steps {
                let b_step = dae::step_rhs(&sys.diff_mask, dt, traj.last(), &sys.b(j as f64 * dt));
                let z = ras::di_sweep(&locals, &b_step, traj.last());
                traj.push(z);
            }
            return Ok(AcceleratedRun {
                trajectory: traj,
                sweeps: vec![1; steps],
                operator: None,
            });
        }
        Err(e) => return Err(e),
    };
    match strategy {
        Strategy::Rebuild | Strategy::ReuseP => {
            let mut sweeps = Vec::with_capacity(steps);
            let mut operator: Option<InterfaceOperator> = None;
            for j in 1..=steps {
                let b_step = dae::step_rhs(&sys.diff_mask, dt, traj.last(), &sys.b(j as f64 * dt));
                let mode = match (&operator, strategy) {
                    (Some(p), Strategy::ReuseP) => StepMode::ReuseP(p),
                    _ => StepMode::FirstStep,
                };
                let out = accelerated_step(&locals, &map, &b_step, traj.last(), mode).map_err(|e| e.at_step(j))?;
                if operator.is_none() {
                    operator = out.estimate.as_ref().map(|e| e.operator.clone());
                }
                sweeps.push(out.sweeps);
                traj.push(out.state);
            }
            Ok(AcceleratedRun {
                trajectory: traj,
                sweeps,
                operator,
            })
        }
        Strategy::Pipelined { m } => solve_pipelined(sys, &locals, &map, dt, steps, m, traj),
    }
}

/// Gauss-Seidel-in-time sweep over a window: step `j` uses the freshly
/// updated state of step `j - 1` as its previous state.
pub fn window_sweep(
    locals: &[LocalSystem],
    diff_mask: &[bool],
    dt: f64,
    z_start: &DVector<f64>,
    forcing: &[DVector<f64>],
    iterates: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(iterates.len());
    for (j, (b, z)) in forcing.iter().zip(iterates).enumerate() {
        let prev = if j == 0 { z_start } else { &out[j - 1] };
        let b_step = dae::step_rhs(diff_mask, dt, prev, b);
        out.push(ras::di_sweep(locals, &b_step, z));
    }
    out
}

/// Blocks `L_0 .. L_{m-1}` of the window map's linear part, where `L_l`
/// maps step `j`'s interface iterate to step `j + l`'s next iterate. Probed
/// with unit interface vectors under zero forcing and zero start state.
pub fn probe_step_coupling(
    locals: &[LocalSystem],
    map: &InterfaceMap,
    diff_mask: &[bool],
    dt: f64,
    m: usize,
) -> Vec<DMatrix<f64>> {
    let n = diff_mask.len();
    let ng = map.n_gamma;
    let mut blocks = vec![DMatrix::zeros(ng, ng); m];
    let zero = DVector::zeros(n);
    let forcing = vec![zero.clone(); m];
    for q in 0..ng {
        let mut iterates = vec![zero.clone(); m];
        let mut unit = DVector::zeros(ng);
        unit[q] = 1.0;
        map.scatter_into(&unit, &mut iterates[0]);
        let out = window_sweep(locals, diff_mask, dt, &zero, &forcing, &iterates);
        for (lag, z) in out.iter().enumerate() {
            blocks[lag].set_column(q, &map.gather(z));
        }
    }
    blocks
}

/// Window operator `Z^{k+1} = 𝐏 Z^k + C` over `m` steps.
#[derive(Clone, Debug)]
pub struct PipelineOperator {
    pub m: usize,
    pub matrix: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Assembles the block lower-triangular Toeplitz operator with `p` on the
/// diagonal and `coupling[l - 1]` on the `l`-th subdiagonal.
pub fn build_pipeline(
    p: &InterfaceOperator,
    m: usize,
    coupling: &[DMatrix<f64>],
    c_window: &DVector<f64>,
) -> Result<PipelineOperator> {
    let ng = p.dim();
    if m == 0 {
        return Err(Error::InvalidConfig("window length must be at least 1".into()));
    }
    if c_window.len() != m * ng || coupling.len() + 1 < m || coupling.iter().any(|b| b.shape() != (ng, ng)) {
        return Err(Error::DimensionMismatch(format!(
            "window of {m} steps over {ng} interface slots"
        )));
    }
    let mut matrix = DMatrix::zeros(m * ng, m * ng);
    for j in 0..m {
        matrix.view_mut((j * ng, j * ng), (ng, ng)).copy_from(&p.matrix);
        for l in 1..=j {
            matrix
                .view_mut((j * ng, (j - l) * ng), (ng, ng))
                .copy_from(&coupling[l - 1]);
        }
    }
    Ok(PipelineOperator {
        m,
        matrix,
        c: c_window.clone(),
    })
}

impl PipelineOperator {
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.matrix * z + &self.c
    }

    pub fn fixed_point(&self) -> Result<DVector<f64>> {
        let n = self.matrix.nrows();
        let lu = Lu::new(&(DMatrix::identity(n, n) - &self.matrix)).ok_or(Error::UnitEigenvalue)?;
        Ok(lu.solve(&self.c))
    }
}

fn stack(map: &InterfaceMap, states: &[DVector<f64>]) -> DVector<f64> {
    let ng = map.n_gamma;
    let mut out = DVector::zeros(states.len() * ng);
    for (j, z) in states.iter().enumerate() {
        out.rows_mut(j * ng, ng).copy_from(&map.gather(z));
    }
    out
}

fn solve_pipelined(
    sys: &CombinedSystem,
    locals: &[LocalSystem],
    map: &InterfaceMap,
    dt: f64,
    steps: usize,
    m: usize,
    mut traj: Trajectory,
) -> Result<AcceleratedRun> {
    if m == 0 {
        return Err(Error::InvalidConfig("window length must be at least 1".into()));
    }
    let ng = map.n_gamma;
    // Diagonal block fitted from the first step's sweeps.
    let b1 = dae::step_rhs(&sys.diff_mask, dt, traj.last(), &sys.b(dt));
    let (est, _) = estimate_operator(locals, map, &b1, traj.last(), 2 * ng + 1).map_err(|e| e.at_step(1))?;
    let p = est.operator.clone();
    let coupling = probe_step_coupling(locals, map, &sys.diff_mask, dt, m);
    let mut sweeps = Vec::with_capacity(steps);
    let mut start = 0;
    while start < steps {
        let len = m.min(steps - start);
        let z_start = traj.last().clone();
        let forcing: Vec<DVector<f64>> = (1..=len).map(|j| sys.b((start + j) as f64 * dt)).collect();
        let z_iter0 = vec![z_start.clone(); len];
        let z_iter1 = window_sweep(locals, &sys.diff_mask, dt, &z_start, &forcing, &z_iter0);
        let skeleton = build_pipeline(&p, len, &coupling[1..], &DVector::zeros(len * ng))?;
        let c = stack(map, &z_iter1) - &skeleton.matrix * stack(map, &z_iter0);
        let window = PipelineOperator { c, ..skeleton };
        let z_inf = window.fixed_point().map_err(|e| e.at_step(start + 1))?;
        let mut prev = z_start;
        for (j, b) in forcing.iter().enumerate() {
            let b_step = dae::step_rhs(&sys.diff_mask, dt, &prev, b);
            let mut seed = prev.clone();
            map.scatter_into(&z_inf.rows(j * ng, ng).into_owned(), &mut seed);
            prev = ras::di_sweep(locals, &b_step, &seed);
            traj.push(prev.clone());
            sweeps.push(1);
        }
        start += len;
    }
    Ok(AcceleratedRun {
        trajectory: traj,
        sweeps,
        operator: Some(p),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converges,
    Stagnates,
    Diverges,
}

impl Classification {
    pub fn from_rho(rho: f64) -> Self {
        if (rho - 1.0).abs() <= UNIT_TOL {
            Classification::Stagnates
        } else if rho < 1.0 {
            Classification::Converges
        } else {
            Classification::Diverges
        }
    }
}

/// Parameters of the two circuits with closed-form spectra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "circuit", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Inductor `l1` across the cut between two non-ground nodes.
    Ex1 { l1: f64, c: f64, g: f64 },
    /// Inductor `l1` from the cut to ground, `l2` on the other side.
    Ex2 { l1: f64, l2: f64, c: f64, g: f64 },
}

impl ClosedForm {
    /// Spectral radius of the interface operator at step `dt`.
    pub fn rho(&self, dt: f64) -> f64 {
        match *self {
            ClosedForm::Ex1 { l1, c, g } => (dt / (l1 * (c / dt + g))).sqrt(),
            ClosedForm::Ex2 { l1, l2, c, g } => (l2 / l1 + dt / (l1 * (c / dt + g))).sqrt(),
        }
    }

    /// Step size at which the spectral radius equals 1, if any.
    pub fn dt0(&self) -> Option<f64> {
        match *self {
            ClosedForm::Ex1 { l1, c, g } => Some((l1 * g + ((l1 * g).powi(2) + 4.0 * l1 * c).sqrt()) / 2.0),
            ClosedForm::Ex2 { l1, l2, c, g } => {
                if l2 >= l1 {
                    return None;
                }
                let d = l1 - l2;
                Some((d * g + ((d * g).powi(2) + 4.0 * d * c).sqrt()) / 2.0)
            }
        }
    }

    /// Nonzero eigenvalue pair: purely imaginary `±i rho`.
    pub fn eigenvalues(&self, dt: f64) -> [Complex<f64>; 2] {
        let r = self.rho(dt);
        [Complex::new(0.0, r), Complex::new(0.0, -r)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub dt: Option<f64>,
    /// `(re, im)` pairs, largest modulus first.
    pub eigenvalues: Vec<(f64, f64)>,
    pub rho: f64,
    pub classification: Classification,
    pub has_unit_eigenvalue: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_closed_form: Option<f64>,
}

pub fn spectral_report(p: &InterfaceOperator, dt: Option<f64>, closed: Option<ClosedForm>) -> SpectralReport {
    SpectralReport {
        dt,
        eigenvalues: p.eigenvalues.iter().map(|l| (l.re, l.im)).collect(),
        rho: p.spectral_radius,
        classification: Classification::from_rho(p.spectral_radius),
        has_unit_eigenvalue: p.has_unit_eigenvalue,
        dt0: closed.and_then(|c| c.dt0()),
        rho_closed_form: match (closed, dt) {
            (Some(c), Some(dt)) => Some(c.rho(dt)),
            _ => None,
        },
    }
}

/// `(dt, rho)` over a grid of step sizes.
pub fn spectral_sweep(sys: &CombinedSystem, part: &OverlapPartition, dts: &[f64]) -> Result<Vec<(f64, f64)>> {
    dts.iter()
        .map(|&dt| operator_at(sys, part, dt).map(|(p, _)| (dt, p.spectral_radius)))
        .collect()
}

/// First grid cell `[dt_i, dt_{i+1}]` over which rho crosses 1.
pub fn locate_crossing(sweep: &[(f64, f64)]) -> Option<(f64, f64)> {
    sweep
        .windows(2)
        .find(|w| (w[0].1 < 1.0) != (w[1].1 < 1.0))
        .map(|w| (w[0].0, w[1].0))
}

/// Evenly spaced grid `a, ..., b` with `n` points.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
