//! Command-line driver behind the `simulate` binary.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 solver failure,
//! 4 I/O failure, 5 plain iteration did not converge.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aitken::{self, ClosedForm, Strategy};
use crate::circuits::{self, CircuitDae, CircuitId, NonlinearParams, Preset, RingParams, RingPreset, TwoBranchParams};
use crate::dae::{self, Trajectory};
use crate::nonlinear::{self, NonlinearStrategy};
use crate::partition::PartitionSpec;
use crate::phasor::{Interpolation, MultirateMode, MultirateSolver, PhasorConfig};
use crate::ras::{self, DiConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

/// Environment variable holding the log filter, e.g. `RASDI_LOG=debug`.
pub const LOG_ENV: &str = "RASDI_LOG";

#[derive(Parser, Debug)]
#[command(name = "simulate", version, about = "Partitioned simulation of linear circuit DAEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one solver mode on a built-in scenario or a netlist file.
    #[command(allow_negative_numbers = true)]
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Monolithic,
    Di,
    DiAitken,
    DiAitkenPipelined,
    Spectral,
    EmtTs,
    Nonlinear,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// ex1, ex2, ex2-swapped, emt-ts, nonlinear, or a netlist path.
    pub scenario: Option<String>,
    /// Solver mode (default monolithic).
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Time step; each scenario has its own default.
    #[arg(long)]
    pub dt: Option<f64>,
    /// End time (default 0.05).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Step-size grid `a:b[:n]` for spectral mode.
    #[arg(long = "sweep-dt")]
    pub sweep_dt: Option<String>,
    /// Steps per window in pipelined mode.
    #[arg(long)]
    pub window: Option<usize>,
    /// Keep the step-1 operator and spend one sweep per later step.
    #[arg(long = "reuse-p")]
    pub reuse_p: bool,
    /// Inductance of the split-off branch.
    #[arg(long)]
    pub l1: Option<f64>,
    /// Inductance of the second branch.
    #[arg(long)]
    pub l2: Option<f64>,
    /// Capacitance.
    #[arg(long)]
    pub c: Option<f64>,
    /// Conductance of the linear circuits.
    #[arg(long)]
    pub g: Option<f64>,
    /// Nonlinear mode: the conductance is `1 / (g0 + alpha i2)`.
    #[arg(long)]
    pub g0: Option<f64>,
    /// Nonlinear mode: current coefficient in `1 / (g0 + alpha i2)`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base angular frequency of the phasor side (default 2 pi 50).
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Phasor-side step for emt-ts.
    #[arg(long = "dt-ts")]
    pub dt_ts: Option<f64>,
    /// Time-domain step for emt-ts.
    #[arg(long = "dt-emt")]
    pub dt_emt: Option<f64>,
    /// Ring preset for emt-ts: baseline, disturbance or divergent.
    #[arg(long)]
    pub preset: Option<String>,
    /// Retained harmonics, e.g. `-1,0,1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i32>>,
    /// Plain emt-ts iteration with this many sweeps per step instead of acceleration.
    #[arg(long = "plain-sweeps")]
    pub plain_sweeps: Option<usize>,
    /// Blend phasor coefficients linearly across a large step.
    #[arg(long = "linear-interp")]
    pub linear_interp: bool,
    /// Partition description (JSON) for netlist scenarios.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Two-way split for netlist scenarios: comma-separated variables of the first partition.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<String>>,
    /// Overlap depth used with `--split`.
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Relative sweep tolerance for di mode.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute sweep tolerance for di mode.
    #[arg(long)]
    pub atol: Option<f64>,
    /// Sweep cap per step for di mode.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// JSON run description; flags given on the command line take precedence.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

/// Fully resolved run description. Also the on-disk format of `--spec`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub scenario: Option<String>,
    pub mode: Option<Mode>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub out: Option<PathBuf>,
    pub sweep_dt: Option<String>,
    pub window: Option<usize>,
    pub reuse_p: Option<bool>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub c: Option<f64>,
    pub g: Option<f64>,
    pub g0: Option<f64>,
    pub alpha: Option<f64>,
    pub omega0: Option<f64>,
    pub dt_ts: Option<f64>,
    pub dt_emt: Option<f64>,
    pub preset: Option<String>,
    pub modes: Option<Vec<i32>>,
    pub plain_sweeps: Option<usize>,
    pub linear_interp: Option<bool>,
    pub partition: Option<PathBuf>,
    pub split: Option<Vec<String>>,
    pub overlap: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_iter: Option<usize>,
}

macro_rules! overlay {
    ($spec:ident, $args:ident, $($field:ident),*) => {
        $( if $args.$field.is_some() { $spec.$field = $args.$field.clone(); } )*
    };
}

impl RunSpec {
    pub fn from_args(args: &RunArgs) -> Result<RunSpec> {
        let mut spec = match &args.spec {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<RunSpec>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => RunSpec::default(),
        };
        overlay!(
            spec,
            args,
            scenario,
            mode,
            dt,
            t_end,
            out,
            sweep_dt,
            window,
            l1,
            l2,
            c,
            g,
            g0,
            alpha,
            omega0,
            dt_ts,
            dt_emt,
            preset,
            modes,
            plain_sweeps,
            partition,
            split,
            overlap,
            rtol,
            atol,
            max_iter
        );
        if args.reuse_p {
            spec.reuse_p = Some(true);
        }
        if args.linear_interp {
            spec.linear_interp = Some(true);
        }
        Ok(spec)
    }

    fn scenario(&self) -> Result<&str> {
        self.scenario
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no scenario given".into()))
    }

    fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Monolithic)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidConfig(format!("--{name} must be positive"))),
            _ => Ok(v),
        }
    }

    /// Rejects nonpositive step sizes and horizons before any work starts.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("t-end", self.t_end),
            ("omega0", self.omega0),
            ("dt-ts", self.dt_ts),
            ("dt-emt", self.dt_emt),
            ("l1", self.l1),
            ("l2", self.l2),
            ("c", self.c),
            ("g", self.g),
            ("g0", self.g0),
            ("rtol", self.rtol),
        ] {
            Self::positive(name, v)?;
        }
        if self.window == Some(0) || self.plain_sweeps == Some(0) || self.max_iter == Some(0) {
            return Err(Error::InvalidConfig("counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Step-size grid from `a:b[:n]`, 41 points by default.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidConfig(format!("bad grid `{text}`; expected a:b[:n]"));
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = match parts.get(2) {
        Some(s) => s.trim().parse().map_err(|_| bad())?,
        None => 41,
    };
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(bad());
    }
    Ok(aitken::linspace(a, b, n))
}

/// What a scenario resolves to.
struct Scenario {
    name: String,
    preset: Preset,
    nonlinear: Option<nonlinear::NonlinearConductance>,
    default_dt: f64,
}

fn two_branch_params(base: TwoBranchParams, spec: &RunSpec) -> TwoBranchParams {
    TwoBranchParams {
        l1: spec.l1.unwrap_or(base.l1),
        l2: spec.l2.unwrap_or(base.l2),
        c: spec.c.unwrap_or(base.c),
        g: spec.g.unwrap_or(base.g),
        ..base
    }
}

fn ring_preset(spec: &RunSpec) -> Result<RingPreset> {
    spec.preset.as_deref().unwrap_or("divergent").parse()
}

fn resolve(spec: &RunSpec) -> Result<Scenario> {
    let name = spec.scenario()?.to_string();
    if let Ok(id) = name.parse::<CircuitId>() {
        let (preset, nonlinear, default_dt) = match id {
            CircuitId::Ex1 => (
                circuits::ex1(&two_branch_params(TwoBranchParams::ex1(), spec))?,
                None,
                1.2e-3,
            ),
            CircuitId::Ex2 => (
                circuits::ex2(&two_branch_params(TwoBranchParams::ex2(), spec))?,
                None,
                4.5e-4,
            ),
            CircuitId::Ex2Swapped => (
                circuits::ex2(&two_branch_params(TwoBranchParams::ex2_swapped(), spec))?,
                None,
                4.5e-4,
            ),
            CircuitId::EmtTs => (circuits::emt_ts(&RingParams::preset(ring_preset(spec)?))?, None, 2e-5),
            CircuitId::Ex2Nonlinear => {
                let base = NonlinearParams::default();
                let params = NonlinearParams {
                    l1: spec.l1.unwrap_or(base.l1),
                    l2: spec.l2.unwrap_or(base.l2),
                    c: spec.c.unwrap_or(base.c),
                    g0: spec.g0.unwrap_or(base.g0),
                    alpha: spec.alpha.unwrap_or(base.alpha),
                    ..base
                };
                let (preset, element) = circuits::ex2_nonlinear(&params)?;
                (preset, Some(element), 2e-4)
            }
        };
        return Ok(Scenario {
            name,
            preset,
            nonlinear,
            default_dt,
        });
    }
    let path = Path::new(&name);
    if !path.exists() {
        return Err(Error::UnknownCircuit(name));
    }
    let text = fs::read_to_string(path)?;
    let circuit = circuits::assemble(&circuits::Netlist::parse(&text)?)?;
    let partition = netlist_partition(&circuit, spec)?;
    Ok(Scenario {
        name,
        preset: Preset {
            circuit,
            partition,
            closed_form: None,
        },
        nonlinear: None,
        default_dt: 1e-4,
    })
}

fn netlist_partition(circuit: &CircuitDae, spec: &RunSpec) -> Result<crate::partition::OverlapPartition> {
    match (&spec.partition, &spec.split) {
        (Some(path), None) => {
            let ps = PartitionSpec::from_json(&fs::read_to_string(path)?)?;
            ps.build(&circuit.names, &circuit.graph(), &circuit.system.diff_mask)
        }
        (None, Some(first)) => {
            let names: Vec<&str> = first.iter().map(String::as_str).collect();
            circuit.two_way(&names, spec.overlap.unwrap_or(0))
        }
        // Without a split the whole circuit is one partition.
        (None, None) => crate::partition::grow_overlap(
            &circuit.graph(),
            &[(0..circuit.names.len()).collect()],
            0,
            &circuit.system.diff_mask,
        ),
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "give either --partition or --split, not both".into(),
        )),
    }
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(file))?))
}

fn write_json(dir: &Path, file: &str, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(file), text)?;
    Ok(())
}

fn write_trajectory(dir: &Path, names: &[String], traj: &Trajectory) -> Result<()> {
    traj.write_csv(names, create(dir, "trajectory.csv")?)?;
    Ok(())
}

/// Result of a run that finished without a hard error.
pub struct RunOutcome {
    pub summary: serde_json::Value,
    pub converged: bool,
}

pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let scenario = resolve(spec)?;
    let out = spec.out_dir();
    fs::create_dir_all(&out)?;
    let sys = &scenario.preset.circuit.system;
    let names = &scenario.preset.circuit.names;
    let part = &scenario.preset.partition;
    let closed = scenario.preset.closed_form;
    let dt = spec.dt.unwrap_or(scenario.default_dt);
    let t_end = spec.t_end.unwrap_or(0.05);
    let mode = spec.mode();
    log::info!("{} in {:?} mode, dt = {dt}, t_end = {t_end}", scenario.name, mode);
    let mut summary = json!({
        "scenario": scenario.name,
        "mode": mode,
        "n": sys.n(),
        "variables": names,
    });
    let mut converged = true;
    match mode {
        Mode::Monolithic => {
            let traj = dae::monolithic_solve(sys, dt, t_end)?;
            let (be, alg) = dae::trajectory_residuals(sys, &traj);
            write_trajectory(&out, names, &traj)?;
            summary["dt"] = json!(dt);
            summary["steps"] = json!(traj.len() - 1);
            summary["residual_backward_euler"] = json!(be);
            summary["residual_algebraic"] = json!(alg);
        }
        Mode::Di => {
            let cfg = DiConfig {
                rtol: spec.rtol.unwrap_or(DiConfig::default().rtol),
                atol: spec.atol.unwrap_or(DiConfig::default().atol),
                max_iter: spec.max_iter.unwrap_or(DiConfig::default().max_iter),
            };
            let run = ras::solve_di(sys, part, dt, t_end, &cfg)?;
            write_trajectory(&out, names, &run.trajectory)?;
            ras::write_convergence_csv(&run.log, create(&out, "convergence.csv")?)?;
            converged = run.converged();
            let ratios: Vec<f64> = run
                .log
                .iter()
                .zip(ras::geometric_ratios(&run.log))
                .filter(|(r, g)| r.step == 1 && g.is_finite())
                .map(|(_, g)| g)
                .collect();
            summary["dt"] = json!(dt);
            summary["converged"] = json!(converged);
            summary["failed_step"] = json!(run.failed_step);
            summary["total_sweeps"] = json!(run.log.len());
            summary["step1_geometric_ratio"] = json!(ratios.last());
            if let Some(cf) = closed {
                summary["rho_closed_form"] = json!(cf.rho(dt));
            }
        }
        Mode::DiAitken | Mode::DiAitkenPipelined => {
            let strategy = if mode == Mode::DiAitkenPipelined {
                Strategy::Pipelined {
                    m: spec.window.unwrap_or(3),
                }
            } else if spec.reuse_p.unwrap_or(false) {
                Strategy::ReuseP
            } else {
                Strategy::Rebuild
            };
            let run = aitken::solve_accelerated(sys, part, dt, t_end, strategy)?;
            let mono = dae::monolithic_solve(sys, dt, t_end)?;
            write_trajectory(&out, names, &run.trajectory)?;
            if let Some(op) = &run.operator {
                let report = aitken::spectral_report(op, Some(dt), closed);
                write_json(&out, "spectral.json", &serde_json::to_value(report)?)?;
            }
            summary["dt"] = json!(dt);
            summary["strategy"] = json!(format!("{strategy:?}"));
            summary["sweeps_per_step"] = json!(run.sweeps);
            summary["max_error_vs_monolithic"] = json!(run.trajectory.max_diff(&mono));
        }
        Mode::Spectral => {
            summary["spectral"] = spectral(spec, &scenario, dt, closed)?;
            write_json(&out, "spectral.json", &summary["spectral"])?;
        }
        Mode::EmtTs => summary["emt_ts"] = emt_ts(spec, &scenario, t_end, &out)?,
        Mode::Nonlinear => {
            let element = scenario
                .nonlinear
                .ok_or_else(|| Error::InvalidConfig("nonlinear mode needs the `nonlinear` scenario".into()))?;
            let strategy = if spec.reuse_p.unwrap_or(false) {
                NonlinearStrategy::ReuseFirst
            } else {
                NonlinearStrategy::Rebuild
            };
            let run = nonlinear::solve_nonlinear_accelerated(sys, part, &[element], dt, t_end, strategy)?;
            let oracle = nonlinear::frozen_oracle(sys, &[element], dt, t_end)?;
            write_trajectory(&out, names, &run.trajectory)?;
            nonlinear::write_spectral_csv(&run.spectra, create(&out, "spectral.csv")?)?;
            let rho: Vec<f64> = run.spectra.iter().map(|s| s.rho).collect();
            summary["dt"] = json!(dt);
            summary["rho_first"] = json!(rho.first());
            summary["rho_min"] = json!(rho.iter().copied().fold(f64::INFINITY, f64::min));
            summary["rho_max"] = json!(rho.iter().copied().fold(0.0, f64::max));
            summary["max_error_vs_frozen_oracle"] = json!(run.trajectory.max_diff(&oracle));
        }
    }
    write_json(&out, "summary.json", &summary)?;
    Ok(RunOutcome { summary, converged })
}

fn spectral(spec: &RunSpec, scenario: &Scenario, dt: f64, closed: Option<ClosedForm>) -> Result<serde_json::Value> {
    let sys = &scenario.preset.circuit.system;
    let part = &scenario.preset.partition;
    let (op, _) = aitken::operator_at(sys, part, dt)?;
    let mut value = json!({ "at_dt": aitken::spectral_report(&op, Some(dt), closed) });
    if let Some(grid) = &spec.sweep_dt {
        let grid = parse_grid(grid)?;
        let sweep = aitken::spectral_sweep(sys, part, &grid)?;
        let points: Vec<serde_json::Value> = sweep
            .iter()
            .map(|&(dt, rho)| {
                json!({
                    "dt": dt,
                    "rho": rho,
                    "classification": aitken::Classification::from_rho(rho),
                    "rho_closed_form": closed.map(|c| c.rho(dt)),
                })
            })
            .collect();
        value["sweep"] = json!(points);
        value["crossing"] = json!(aitken::locate_crossing(&sweep));
        value["dt0_closed_form"] = json!(closed.and_then(|c| c.dt0()));
    }
    Ok(value)
}

fn emt_ts(spec: &RunSpec, scenario: &Scenario, t_end: f64, out: &Path) -> Result<serde_json::Value> {
    let sys = &scenario.preset.circuit.system;
    let part = &scenario.preset.partition;
    let names = &scenario.preset.circuit.names;
    let modes = spec.modes.clone().unwrap_or_else(|| vec![-1, 0, 1]);
    let mut cfg = PhasorConfig::new(
        spec.omega0.unwrap_or(2.0 * std::f64::consts::PI * 50.0),
        &modes,
        spec.dt_ts.unwrap_or(2e-3),
        spec.dt_emt.unwrap_or(2e-5),
    )?;
    if spec.linear_interp.unwrap_or(false) {
        cfg.interpolation = Interpolation::Linear;
    }
    let dt_emt = cfg.dt_emt;
    let solver = MultirateSolver::new(sys, part, cfg)?;
    let mode = match spec.plain_sweeps {
        Some(k) => MultirateMode::Plain { sweeps: k },
        None => MultirateMode::Accelerated,
    };
    let run = solver.run(t_end, mode)?;
    write_trajectory(out, names, &run.trajectory)?;
    solver.write_emt_csv(&run, names, create(out, "emt_trace.csv")?)?;
    solver.write_ts_csv(&run, names, create(out, "ts_trace.csv")?)?;
    // Deviation of the EMT side from a fully time-domain run at the small step.
    let mono = dae::monolithic_solve(sys, dt_emt, t_end)?;
    let deviation = run
        .emt_trace
        .iter()
        .zip(&mono.states)
        .map(|((_, v), z)| {
            solver
                .emt_owned()
                .iter()
                .zip(v.iter())
                .map(|(&g, x)| (x - z[g]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(json!({
        "mode": format!("{mode:?}"),
        "omega0": solver.cfg.omega0,
        "modes": solver.cfg.modes,
        "dt_ts": solver.cfg.dt_ts,
        "dt_emt": dt_emt,
        "substeps": solver.cfg.m,
        "history": solver.cfg.n_hist,
        "sweeps_per_step": run.reports.iter().map(|r| r.sweeps).collect::<Vec<_>>(),
        "max_stationarity": run.reports.iter().filter_map(|r| r.stationarity).fold(0.0, f64::max),
        "max_emt_deviation_from_time_domain": deviation,
    }))
}

/// Maps an error to its process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Step { source, .. } => exit_code(source),
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. }
        | Error::UnknownCircuit(_)
        | Error::UnknownSelector(_)
        | Error::InvalidConfig(_)
        | Error::Json(_)
        | Error::NotACover(_)
        | Error::FloatingNode(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Entry point: parses `args`, runs, prints a summary, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let Command::Run(args) = cli.command;
    let result = RunSpec::from_args(&args).and_then(|spec| run(&spec));
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome.summary).unwrap_or_default());
            if outcome.converged {
                EXIT_OK
            } else {
                eprintln!("error[not_converged]: plain dynamic iteration did not converge");
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}
