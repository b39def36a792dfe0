//! EMT-phasor co-simulation: one partition is advanced with small
//! time-domain steps, the other as dynamic phasors with large steps, coupled
//! through mode extraction and recombination at every large step.
//!
//! Phasors are referenced to absolute time, `z(t) = sum_k z_k exp(i k w t)`,
//! and stored as real blocks per variable: `[z_0 | Re z_1, Im z_1 | ...]`
//! over the nonnegative modes of a symmetric mode set.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};

use crate::aitken::{self, InterfaceOperator, PEstimate};
use crate::dae::{self, CombinedSystem, Forcing};
use crate::linalg::{self, Lu};
use crate::partition::OverlapPartition;
use crate::ras::{self, LocalSystem};
use crate::{Error, Result};

/// How phasor coefficients are evaluated between large steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    /// Hold the new coefficients over the whole step.
    #[default]
    Hold,
    /// Blend linearly from the previous accepted coefficients.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasorConfig {
    pub omega0: f64,
    /// Sorted, symmetric under negation.
    pub modes: Vec<i32>,
    pub dt_ts: f64,
    pub dt_emt: f64,
    /// Small steps per large step.
    pub m: usize,
    /// Small steps per period.
    pub n_hist: usize,
    pub interpolation: Interpolation,
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let r = (num / den).round();
    (r >= 1.0 && (r * den - num).abs() <= 1e-9 * num.abs()).then_some(r as usize)
}

impl PhasorConfig {
    pub fn new(omega0: f64, modes: &[i32], dt_ts: f64, dt_emt: f64) -> Result<Self> {
        if !(omega0 > 0.0 && dt_ts > 0.0 && dt_emt > 0.0) {
            return Err(Error::InvalidConfig("frequency and step sizes must be positive".into()));
        }
        let mut modes = modes.to_vec();
        modes.sort_unstable();
        modes.dedup();
        if modes.is_empty() {
            return Err(Error::InvalidConfig("mode set is empty".into()));
        }
        if modes.iter().any(|k| modes.binary_search(&-k).is_err()) {
            return Err(Error::InvalidConfig(format!("mode set {modes:?} is not symmetric")));
        }
        let m = integer_ratio(dt_ts, dt_emt).ok_or_else(|| {
            Error::InvalidConfig(format!("dt_ts = {dt_ts} is not a whole multiple of dt_emt = {dt_emt}"))
        })?;
        let period = 2.0 * std::f64::consts::PI / omega0;
        let n_hist = integer_ratio(period, dt_emt).ok_or_else(|| {
            Error::InvalidConfig(format!("period {period} is not a whole multiple of dt_emt = {dt_emt}"))
        })?;
        Ok(PhasorConfig {
            omega0,
            modes,
            dt_ts,
            dt_emt,
            m,
            n_hist,
            interpolation: Interpolation::Hold,
        })
    }

    pub fn has_dc(&self) -> bool {
        self.modes.contains(&0)
    }

    pub fn positive_modes(&self) -> impl Iterator<Item = i32> + '_ {
        self.modes.iter().copied().filter(|k| *k > 0)
    }

    /// Real slots per variable.
    pub fn width(&self) -> usize {
        usize::from(self.has_dc()) + 2 * self.positive_modes().count()
    }

    /// Slot of `Re z_k` for the `j`-th positive mode.
    fn re_slot(&self, j: usize) -> usize {
        usize::from(self.has_dc()) + 2 * j
    }
}

/// Real-stacked phasor coefficients, one row per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorState {
    pub coeffs: DMatrix<f64>,
}

impl PhasorState {
    pub fn zeros(vars: usize, cfg: &PhasorConfig) -> Self {
        PhasorState {
            coeffs: DMatrix::zeros(vars, cfg.width()),
        }
    }

    /// DC-only state holding `values`.
    pub fn constant(values: &DVector<f64>, cfg: &PhasorConfig) -> Self {
        let mut s = PhasorState::zeros(values.len(), cfg);
        if cfg.has_dc() {
            s.coeffs.set_column(0, values);
        }
        s
    }

    pub fn vars(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Complex coefficient of mode `k` for variable `var`; zero if `k` is not retained.
    pub fn coefficient(&self, var: usize, k: i32, cfg: &PhasorConfig) -> Complex<f64> {
        if k == 0 {
            return Complex::new(if cfg.has_dc() { self.coeffs[(var, 0)] } else { 0.0 }, 0.0);
        }
        match cfg.positive_modes().position(|p| p == k.abs()) {
            Some(j) => {
                let s = cfg.re_slot(j);
                let z = Complex::new(self.coeffs[(var, s)], self.coeffs[(var, s + 1)]);
                if k > 0 {
                    z
                } else {
                    z.conj()
                }
            }
            None => Complex::new(0.0, 0.0),
        }
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs
                .row_iter()
                .flat_map(|r| r.iter().copied().collect::<Vec<_>>()),
        )
    }

    pub fn unflatten(v: &DVector<f64>, vars: usize, cfg: &PhasorConfig) -> Self {
        let w = cfg.width();
        PhasorState {
            coeffs: DMatrix::from_fn(vars, w, |i, j| v[i * w + j]),
        }
    }

    fn select_rows(&self, rows: &[usize]) -> PhasorState {
        PhasorState {
            coeffs: self.coeffs.select_rows(rows),
        }
    }
}

/// Mode extraction over exactly one period of samples ending at `t_end`
/// (oldest first, spaced `dt_emt`): `z_k = (1/N) sum_j h_j exp(-i k w t_j)`.
pub fn f_mod(samples: &[&DVector<f64>], t_end: f64, cfg: &PhasorConfig) -> Result<PhasorState> {
    let n = cfg.n_hist;
    if samples.len() != n {
        return Err(Error::HistoryNotFull {
            have: samples.len(),
            need: n,
        });
    }
    let vars = samples[0].len();
    let mut out = PhasorState::zeros(vars, cfg);
    let inv_n = 1.0 / n as f64;
    if cfg.has_dc() {
        let mut sum = DVector::zeros(vars);
        for s in samples {
            sum += *s;
        }
        out.coeffs.set_column(0, &(sum * inv_n));
    }
    for (j, k) in cfg.positive_modes().enumerate() {
        let mut re = DVector::zeros(vars);
        let mut im = DVector::zeros(vars);
        for (idx, s) in samples.iter().enumerate() {
            let t = t_end - (n - 1 - idx) as f64 * cfg.dt_emt;
            let phase = k as f64 * cfg.omega0 * t;
            re.axpy(phase.cos(), s, 1.0);
            im.axpy(-phase.sin(), s, 1.0);
        }
        let slot = cfg.re_slot(j);
        out.coeffs.set_column(slot, &(re * inv_n));
        out.coeffs.set_column(slot + 1, &(im * inv_n));
    }
    Ok(out)
}

/// Real signal `sum_k z_k exp(i k w t)` at time `t`.
pub fn r_mod(ph: &PhasorState, t: f64, cfg: &PhasorConfig) -> DVector<f64> {
    let mut v = if cfg.has_dc() {
        ph.coeffs.column(0).into_owned()
    } else {
        DVector::zeros(ph.vars())
    };
    for (j, k) in cfg.positive_modes().enumerate() {
        let phase = k as f64 * cfg.omega0 * t;
        let s = cfg.re_slot(j);
        v.axpy(2.0 * phase.cos(), &ph.coeffs.column(s).into_owned(), 1.0);
        v.axpy(-2.0 * phase.sin(), &ph.coeffs.column(s + 1).into_owned(), 1.0);
    }
    v
}

/// `r_mod` at small step `sub_step` of the large step starting at `t_start`.
pub fn r_mod_sub(ph: &PhasorState, t_start: f64, sub_step: usize, cfg: &PhasorConfig) -> DVector<f64> {
    r_mod(ph, t_start + sub_step as f64 * cfg.dt_emt, cfg)
}

/// Real-stacked phasor form of a matrix: every entry becomes a diagonal
/// block over the slots, and each differential row gains the rotation
/// `Re: -k w Im`, `Im: +k w Re` scaled by `rotation_scale`.
pub fn phasor_matrix(a: &DMatrix<f64>, diff_rows: &[bool], cfg: &PhasorConfig, rotation_scale: f64) -> DMatrix<f64> {
    let w = cfg.width();
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(r * w, c * w);
    for i in 0..r {
        for j in 0..c {
            if a[(i, j)] != 0.0 {
                for q in 0..w {
                    out[(i * w + q, j * w + q)] = a[(i, j)];
                }
            }
        }
    }
    for (i, d) in diff_rows.iter().enumerate() {
        if *d {
            for (jm, k) in cfg.positive_modes().enumerate() {
                let s = i * w + cfg.re_slot(jm);
                let rot = rotation_scale * k as f64 * cfg.omega0;
                out[(s, s + 1)] -= rot;
                out[(s + 1, s)] += rot;
            }
        }
    }
    out
}

/// Whole system rewritten in phasor variables. The forcing is the mode
/// extraction of `b` over the period ending at `t`.
pub fn ts_system(sys: &CombinedSystem, cfg: &PhasorConfig) -> CombinedSystem {
    let w = cfg.width();
    let big_a = phasor_matrix(&sys.big_a, &sys.diff_mask, cfg, 1.0);
    let diff_mask = sys.diff_mask.iter().flat_map(|d| std::iter::repeat_n(*d, w)).collect();
    let inner = sys.forcing.clone();
    let fcfg = cfg.clone();
    let forcing: Forcing = std::sync::Arc::new(move |t| {
        let samples: Vec<DVector<f64>> = (0..fcfg.n_hist)
            .map(|j| inner(t - (fcfg.n_hist - 1 - j) as f64 * fcfg.dt_emt))
            .collect();
        let refs: Vec<&DVector<f64>> = samples.iter().collect();
        f_mod(&refs, t, &fcfg).expect("sample count matches").flatten()
    });
    let x0 = PhasorState::constant(&sys.x0, cfg).flatten();
    debug_assert_eq!(x0.len(), sys.n1() * w);
    CombinedSystem {
        big_a,
        diff_mask,
        forcing,
        x0,
    }
}

/// One period of samples ending at the latest push.
#[derive(Clone, Debug)]
pub struct EmtHistory {
    samples: VecDeque<DVector<f64>>,
    capacity: usize,
}

impl EmtHistory {
    /// History pre-filled with a constant sample.
    pub fn constant(sample: &DVector<f64>, capacity: usize) -> Self {
        EmtHistory {
            samples: std::iter::repeat_n(sample.clone(), capacity).collect(),
            capacity,
        }
    }

    pub fn push(&mut self, sample: DVector<f64>) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The last `capacity` samples after appending `extra`, oldest first.
    pub fn window_with<'a>(&'a self, extra: &'a [DVector<f64>]) -> Vec<&'a DVector<f64>> {
        let keep = self.capacity.saturating_sub(extra.len());
        let skip = self.samples.len().saturating_sub(keep);
        let tail = extra.len().saturating_sub(self.capacity);
        self.samples.iter().skip(skip).chain(extra[tail..].iter()).collect()
    }
}

/// Accepted co-simulation state at a large-step boundary.
#[derive(Clone, Debug)]
pub struct MultirateState {
    pub step: usize,
    pub t: f64,
    /// Accepted full state: EMT values on the EMT side, recombined phasors on the other.
    pub state: DVector<f64>,
    /// Phasors of the phasor side's extended set.
    pub ts_phasors: PhasorState,
    history: EmtHistory,
    forcing_history: EmtHistory,
}

/// Result of one co-simulation sweep.
#[derive(Clone, Debug)]
struct EmtPass {
    samples: Vec<DVector<f64>>,
    /// Extended-set EMT states at each small step.
    states: Vec<DVector<f64>>,
}

/// Report of one accepted large step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub sweeps: usize,
    pub estimate: Option<PEstimate>,
    /// Interface change under one more sweep from the accepted fixed point.
    pub stationarity: Option<f64>,
}

/// Jacobi co-simulation of an EMT partition (index 0) and a phasor
/// partition (index 1).
pub struct MultirateSolver {
    pub cfg: PhasorConfig,
    sys: CombinedSystem,
    part: OverlapPartition,
    emt_local: LocalSystem,
    ts_lu: Lu,
    ts_coupling: DMatrix<f64>,
    /// Samples sent from the EMT side: the phasor side's external set plus
    /// EMT-owned differential variables inside the phasor extended set.
    feed: Vec<usize>,
}

pub const EMT: usize = 0;
pub const TS: usize = 1;

impl MultirateSolver {
    pub fn new(sys: &CombinedSystem, part: &OverlapPartition, cfg: PhasorConfig) -> Result<Self> {
        if part.count() != 2 {
            return Err(Error::NotTwoPartitions(part.count()));
        }
        let emt_step = dae::step_matrix(&sys.big_a, &sys.diff_mask, cfg.dt_emt);
        let emt_local = ras::build_local_from_step(&emt_step, part, EMT)?;
        let ts_step = dae::step_matrix(&sys.big_a, &sys.diff_mask, cfg.dt_ts);
        let ts_local = ras::build_local_from_step(&ts_step, part, TS)?;
        let diff_rows: Vec<bool> = part.extended[TS].iter().map(|&g| sys.diff_mask[g]).collect();
        let ts_matrix = phasor_matrix(&ts_local.a_tilde, &diff_rows, &cfg, cfg.dt_ts);
        let ts_lu = Lu::new(&ts_matrix).ok_or(Error::SingularLocalMatrix { part: TS })?;
        let mut feed: Vec<usize> = part.external[TS].clone();
        for &g in &part.extended[TS] {
            if sys.diff_mask[g] && part.owner_of(g) == EMT && !feed.contains(&g) {
                feed.push(g);
            }
        }
        feed.sort_unstable();
        if feed.iter().any(|g| emt_local.local_index(*g).is_none()) {
            return Err(Error::InvalidConfig(
                "EMT side does not compute every value the phasor side reads".into(),
            ));
        }
        Ok(MultirateSolver {
            cfg,
            sys: sys.clone(),
            part: part.clone(),
            emt_local,
            ts_lu,
            ts_coupling: ts_local.e_tilde,
            feed,
        })
    }

    pub fn feed(&self) -> &[usize] {
        &self.feed
    }

    /// Interface unknowns accelerated on the phasor side.
    pub fn n_interface(&self) -> usize {
        self.part.external[EMT].len() * self.cfg.width()
    }

    /// Phasor-side interface coefficients read by the EMT side, flattened.
    pub fn interface_value(&self, st: &MultirateState) -> DVector<f64> {
        self.interface_of(&st.ts_phasors)
    }

    pub fn initial_state(&self) -> Result<MultirateState> {
        let z0 = dae::initial_state(&self.sys)?;
        let ts_vals = DVector::from_iterator(
            self.part.extended[TS].len(),
            self.part.extended[TS].iter().map(|&g| z0[g]),
        );
        Ok(MultirateState {
            step: 0,
            t: 0.0,
            history: EmtHistory::constant(&self.gather_feed(&z0), self.cfg.n_hist),
            forcing_history: EmtHistory::constant(&self.sys.b(0.0), self.cfg.n_hist),
            ts_phasors: PhasorState::constant(&ts_vals, &self.cfg),
            state: z0,
        })
    }

    fn gather_feed(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.feed.len(), self.feed.iter().map(|&g| z[g]))
    }

    fn feed_row(&self, g: usize) -> usize {
        self.feed.binary_search(&g).expect("variable is fed by the EMT side")
    }

    fn ts_row(&self, g: usize) -> usize {
        self.part.extended[TS]
            .binary_search(&g)
            .expect("variable lies in the phasor extended set")
    }

    fn small_step_times(&self, st: &MultirateState) -> Vec<f64> {
        (1..=self.cfg.m).map(|s| st.t + s as f64 * self.cfg.dt_emt).collect()
    }

    fn forcing_samples(&self, st: &MultirateState) -> Vec<DVector<f64>> {
        self.small_step_times(st).iter().map(|&t| self.sys.b(t)).collect()
    }

    /// Phasor-side interface values read by the EMT side, flattened.
    fn interface_of(&self, ts: &PhasorState) -> DVector<f64> {
        let rows: Vec<usize> = self.part.external[EMT].iter().map(|&g| self.ts_row(g)).collect();
        ts.select_rows(&rows).flatten()
    }

    /// Phasor-side large step driven by EMT samples `h_new` for the current step.
    fn ts_solve(&self, st: &MultirateState, forcing: &[DVector<f64>], h_new: &[DVector<f64>]) -> Result<PhasorState> {
        let cfg = &self.cfg;
        let t1 = st.t + cfg.dt_ts;
        let w = cfg.width();
        let ext_ph = f_mod(&st.history.window_with(h_new), t1, cfg)?;
        let prev_ph = f_mod(&st.history.window_with(&[]), st.t, cfg)?;
        let b_ph = f_mod(&st.forcing_history.window_with(forcing), t1, cfg)?;
        let ext_rows: Vec<usize> = self.part.external[TS].iter().map(|&g| self.feed_row(g)).collect();
        let ext = ext_ph.select_rows(&ext_rows).coeffs;
        let coupled = &self.ts_coupling * ext;
        let ext_set = &self.part.extended[TS];
        let mut rhs = DVector::zeros(ext_set.len() * w);
        for (a, &g) in ext_set.iter().enumerate() {
            let diff = self.sys.diff_mask[g];
            for q in 0..w {
                let prev = if !diff {
                    0.0
                } else if self.part.owner_of(g) == TS {
                    st.ts_phasors.coeffs[(a, q)]
                } else {
                    prev_ph.coeffs[(self.feed_row(g), q)]
                };
                let scale = if diff { cfg.dt_ts } else { 1.0 };
                rhs[a * w + q] = prev + scale * b_ph.coeffs[(g, q)] - coupled[(a, q)];
            }
        }
        Ok(PhasorState::unflatten(&self.ts_lu.solve(&rhs), ext_set.len(), cfg))
    }

    /// EMT-side small steps driven by recombined phasor interface values `u`.
    fn emt_solve(&self, st: &MultirateState, u: &DVector<f64>) -> EmtPass {
        let cfg = &self.cfg;
        let ext_vars = self.part.external[EMT].len();
        let u_ph = PhasorState::unflatten(u, ext_vars, cfg);
        let u_prev = PhasorState::unflatten(&self.interface_of(&st.ts_phasors), ext_vars, cfg);
        let local = &self.emt_local;
        let mut x = DVector::from_iterator(local.indices.len(), local.indices.iter().map(|&g| st.state[g]));
        let mut pass = EmtPass {
            samples: Vec::with_capacity(cfg.m),
            states: Vec::with_capacity(cfg.m),
        };
        for (s, t) in self.small_step_times(st).into_iter().enumerate() {
            let ext = match cfg.interpolation {
                Interpolation::Hold => r_mod(&u_ph, t, cfg),
                Interpolation::Linear => {
                    let theta = (s + 1) as f64 / cfg.m as f64;
                    let blend = PhasorState {
                        coeffs: &u_prev.coeffs * (1.0 - theta) + &u_ph.coeffs * theta,
                    };
                    r_mod(&blend, t, cfg)
                }
            };
            let b = self.sys.b(t);
            let rhs = DVector::from_iterator(
                local.indices.len(),
                local.indices.iter().enumerate().map(|(a, &g)| {
                    if self.sys.diff_mask[g] {
                        x[a] + cfg.dt_emt * b[g]
                    } else {
                        b[g]
                    }
                }),
            ) - &local.e_tilde * ext;
            x = local.inverse_solve(&rhs);
            pass.samples.push(DVector::from_iterator(
                self.feed.len(),
                self.feed
                    .iter()
                    .map(|&g| x[local.local_index(g).expect("fed variable is local")]),
            ));
            pass.states.push(x.clone());
        }
        pass
    }

    /// Runs `count` Jacobi sweeps from the accepted state and returns the
    /// phasor-side interface iterates `u^0 .. u^count`.
    pub fn interface_sweeps(&self, st: &MultirateState, count: usize) -> Result<Vec<DVector<f64>>> {
        let forcing = self.forcing_samples(st);
        let mut u = self.interface_of(&st.ts_phasors);
        let mut h = vec![self.gather_feed(&st.state); self.cfg.m];
        let mut us = vec![u.clone()];
        for _ in 0..count {
            let (u_next, h_next) = self.multirate_sweep(st, &forcing, &u, &h)?;
            u = u_next;
            h = h_next;
            us.push(u.clone());
        }
        Ok(us)
    }

    /// One Jacobi sweep: both sides read only iteration-`k` data.
    fn multirate_sweep(
        &self,
        st: &MultirateState,
        forcing: &[DVector<f64>],
        u: &DVector<f64>,
        h: &[DVector<f64>],
    ) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        let ts = self.ts_solve(st, forcing, h)?;
        let pass = self.emt_solve(st, u);
        Ok((self.interface_of(&ts), pass.samples))
    }

    /// Resolves EMT then phasor side from interface `u` and advances `st`.
    fn accept(&self, st: &mut MultirateState, forcing: Vec<DVector<f64>>, u: &DVector<f64>) -> Result<EmtPass> {
        let pass = self.emt_solve(st, u);
        let ts = self.ts_solve(st, &forcing, &pass.samples)?;
        self.commit(st, forcing, pass.clone(), ts);
        Ok(pass)
    }

    fn commit(&self, st: &mut MultirateState, forcing: Vec<DVector<f64>>, pass: EmtPass, ts: PhasorState) {
        let t1 = st.t + self.cfg.dt_ts;
        let recombined = r_mod(&ts, t1, &self.cfg);
        let last = pass.states.last().expect("at least one small step");
        let mut state = DVector::zeros(self.sys.n());
        for g in 0..self.sys.n() {
            state[g] = if self.part.owner_of(g) == EMT {
                last[self.emt_local.local_index(g).expect("owned variable is local")]
            } else {
                recombined[self.ts_row(g)]
            };
        }
        for s in pass.samples {
            st.history.push(s);
        }
        for b in forcing {
            st.forcing_history.push(b);
        }
        st.ts_phasors = ts;
        st.state = state;
        st.step += 1;
        st.t = (st.step as f64) * self.cfg.dt_ts;
    }

    /// Plain step: `sweeps` Jacobi sweeps, then both sides' latest results are kept.
    pub fn step_plain(&self, st: &mut MultirateState, sweeps: usize) -> Result<StepReport> {
        let forcing = self.forcing_samples(st);
        let mut u = self.interface_of(&st.ts_phasors);
        let mut h = vec![self.gather_feed(&st.state); self.cfg.m];
        let mut last: Option<(PhasorState, EmtPass)> = None;
        for _ in 0..sweeps.max(1) {
            let ts = self.ts_solve(st, &forcing, &h)?;
            let pass = self.emt_solve(st, &u);
            u = self.interface_of(&ts);
            h = pass.samples.clone();
            last = Some((ts, pass));
        }
        let (ts, pass) = last.expect("at least one sweep");
        let step = st.step + 1;
        self.commit(st, forcing, pass, ts);
        Ok(StepReport {
            step,
            sweeps: sweeps.max(1),
            estimate: None,
            stationarity: None,
        })
    }

    /// Accelerated step: sweeps until the stride-2 interface operator is
    /// identified, extrapolates the phasor-side interface, then resolves the
    /// EMT side and the phasor side once each.
    pub fn step_accelerated(&self, st: &mut MultirateState) -> Result<StepReport> {
        let nu = self.n_interface();
        let min = nu + 3;
        let cap = 2 * nu + 4;
        let mut us = self.interface_sweeps(st, min)?;
        let (u_inf, est) = loop {
            let (u_inf, est) = accelerate_ts_interface(&us)?;
            if !est.rank_deficient() || us.len() > cap {
                if est.rank_deficient() {
                    log::warn!(
                        "phasor interface history has rank {} on {} active slots; using the minimum-norm operator",
                        est.rank,
                        est.effective_dim
                    );
                }
                break (u_inf, est);
            }
            us = self.interface_sweeps(st, us.len())?;
        };
        let sweeps = us.len() - 1;
        let forcing = self.forcing_samples(st);
        let probe = st.clone();
        let step = st.step + 1;
        let pass = self.accept(st, forcing.clone(), &u_inf)?;
        // One more sweep from the accepted fixed point.
        let ts_again = self.ts_solve(&probe, &forcing, &pass.samples)?;
        let stationarity = linalg::norm_inf(&(self.interface_of(&ts_again) - &u_inf));
        Ok(StepReport {
            step,
            sweeps,
            estimate: Some(est),
            stationarity: Some(stationarity),
        })
    }
}

/// Stride-2 extrapolation of the phasor-side interface. With Jacobi
/// exchange `u^{k+2} = Q u^k + c`, so `Q` is fitted from
/// `d_j = u^{j+2} - u^j` paired with `d_{j+2}` and applied to `(u^0, u^2)`.
pub fn accelerate_ts_interface(us: &[DVector<f64>]) -> Result<(DVector<f64>, PEstimate)> {
    if us.len() < 5 {
        return Err(Error::DimensionMismatch(format!(
            "need at least five interface iterates, got {}",
            us.len()
        )));
    }
    let d: Vec<DVector<f64>> = (0..us.len() - 2).map(|j| &us[j + 2] - &us[j]).collect();
    let xs: Vec<DVector<f64>> = d[..d.len() - 2].to_vec();
    let ys: Vec<DVector<f64>> = d[2..].to_vec();
    let est = aitken::numeric_p_pairs(&xs, &ys)?;
    let u_inf = aitken::accelerate(&est.operator, &us[2], &us[0])?;
    Ok((u_inf, est))
}

/// `sqrt(|e^{k+2}| / |e^k|)` for consecutive interface differences `e^k`.
pub fn growth_ratios(us: &[DVector<f64>]) -> Vec<f64> {
    let norms: Vec<f64> = aitken::differences(us).iter().map(linalg::norm_inf).collect();
    norms.windows(3).map(|w| (w[2] / w[0]).sqrt()).collect()
}

/// Residual of `e^{k+2} = Q e^k` relative to `|e^{k+2}|`, worst over the history.
pub fn linearity_defect(q: &InterfaceOperator, us: &[DVector<f64>]) -> f64 {
    let e = aitken::differences(us);
    e.windows(3)
        .map(|w| linalg::norm_inf(&(&w[2] - &q.matrix * &w[0])) / linalg::norm_inf(&w[2]).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultirateMode {
    Accelerated,
    Plain { sweeps: usize },
}

/// Outputs of a co-simulation run.
#[derive(Clone, Debug)]
pub struct MultirateRun {
    /// Accepted states at large-step boundaries.
    pub trajectory: dae::Trajectory,
    /// EMT-owned variables at every small step: `(t, values)`.
    pub emt_trace: Vec<(f64, DVector<f64>)>,
    /// Phasor-side owned variables' mode magnitudes at every large step.
    pub ts_trace: Vec<(f64, DMatrix<f64>)>,
    pub reports: Vec<StepReport>,
}

impl MultirateSolver {
    pub fn emt_owned(&self) -> &[usize] {
        &self.part.base[EMT]
    }

    pub fn ts_owned(&self) -> &[usize] {
        &self.part.base[TS]
    }

    pub fn run(&self, t_end: f64, mode: MultirateMode) -> Result<MultirateRun> {
        let mut st = self.initial_state()?;
        let mut run = MultirateRun {
            trajectory: dae::Trajectory::new(self.cfg.dt_ts, st.state.clone()),
            emt_trace: vec![(0.0, self.pick(&st.state, self.emt_owned()))],
            ts_trace: Vec::new(),
            reports: Vec::new(),
        };
        for j in 1..=dae::step_count(self.cfg.dt_ts, t_end) {
            let t0 = st.t;
            let before = st.clone();
            let report = match mode {
                MultirateMode::Accelerated => self.step_accelerated(&mut st),
                MultirateMode::Plain { sweeps } => self.step_plain(&mut st, sweeps),
            }
            .map_err(|e| e.at_step(j))?;
            // Replay the accepted EMT pass for the small-step trace.
            let pass = self.emt_solve(&before, &self.interface_for_trace(&before, &st));
            for (s, x) in pass.states.iter().enumerate() {
                let t = t0 + (s + 1) as f64 * self.cfg.dt_emt;
                let vals = DVector::from_iterator(
                    self.emt_owned().len(),
                    self.emt_owned()
                        .iter()
                        .map(|&g| x[self.emt_local.local_index(g).expect("owned is local")]),
                );
                run.emt_trace.push((t, vals));
            }
            run.ts_trace.push((st.t, self.magnitudes(&st.ts_phasors)));
            run.trajectory.push(st.state.clone());
            run.reports.push(report);
        }
        Ok(run)
    }

    fn pick(&self, z: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|&g| z[g]))
    }

    /// Interface that drove the accepted EMT pass of the step `before -> after`.
    fn interface_for_trace(&self, before: &MultirateState, after: &MultirateState) -> DVector<f64> {
        let _ = before;
        self.interface_of(&after.ts_phasors)
    }

    /// `|z_k|` for owned phasor-side variables over the nonnegative modes.
    fn magnitudes(&self, ph: &PhasorState) -> DMatrix<f64> {
        let ks: Vec<i32> = self.cfg.modes.iter().copied().filter(|k| *k >= 0).collect();
        let owned = self.ts_owned();
        DMatrix::from_fn(owned.len(), ks.len(), |i, j| {
            ph.coefficient(self.ts_row(owned[i]), ks[j], &self.cfg).norm()
        })
    }

    pub fn write_emt_csv<W: Write>(&self, run: &MultirateRun, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for &g in self.emt_owned() {
            write!(w, ",{}", names[g])?;
        }
        writeln!(w)?;
        for (t, v) in &run.emt_trace {
            write!(w, "{t}")?;
            for x in v.iter() {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_ts_csv<W: Write>(&self, run: &MultirateRun, names: &[String], mut w: W) -> std::io::Result<()> {
        let ks: Vec<i32> = self.cfg.modes.iter().copied().filter(|k| *k >= 0).collect();
        write!(w, "t")?;
        for &g in self.ts_owned() {
            for k in &ks {
                write!(w, ",|{}_{k}|", names[g])?;
            }
        }
        writeln!(w)?;
        for (t, mags) in &run.ts_trace {
            write!(w, "{t}")?;
            for i in 0..mags.nrows() {
                for j in 0..mags.ncols() {
                    write!(w, ",{}", mags[(i, j)])?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
