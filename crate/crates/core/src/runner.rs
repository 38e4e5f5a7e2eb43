//! Run setup, time loop and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::diagnostics::{alpha_range, mass_report, EnergyBudget};
use crate::error::{Error, Result};
use crate::fields::{state_to_primitives, StateField};
use crate::grid::TensorOps2D;
use crate::pressure::{constraint_norm, project_velocity};
use crate::problem::Problem;
use crate::timestep::{stable_dt, DtMode, Stepper};

pub const TIMESERIES_HEADER: &str =
    "t,energy,dE_dt,dissipation,bt_advective,bt_viscous,sat_energy,residual,constraint_norm,total_mass,alpha_min,alpha_max";

pub const SNAPSHOT_HEADER: &str = "x,y,alpha,u1,u2,p,phi0,phi1,phi2,phi3";

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IdentityViolation { .. } => 2,
            Error::Solver(_) | Error::Positivity { .. } => 3,
            Error::Io(_) => 1,
            _ => 4,
        }
    }
}

/// Discretization and projected initial state for a configuration.
pub fn setup(cfg: &RunConfig) -> Result<(Problem, StateField)> {
    let grid = cfg.grid()?;
    let ops = TensorOps2D::new(&grid, cfg.order)?;
    let mut problem = Problem::new(ops, cfg.fluids, cfg.bcs.clone()).with_kappa(cfg.kappa);
    if let Some(f) = cfg.scenario.forcing(&cfg.fluids) {
        problem = problem.with_forcing(f);
    }
    let raw = cfg.scenario.initial_state(&grid, &cfg.fluids)?;
    let state = project_velocity(&problem, &raw)?;
    Ok((problem, state))
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub budget: EnergyBudget,
    pub constraint_norm: f64,
    pub total_mass: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl SeriesRow {
    pub fn from_stepper(st: &Stepper) -> Self {
        let budget = st.budget();
        let (alpha_min, alpha_max) = alpha_range(&st.state, &st.problem.fluids);
        SeriesRow {
            budget,
            constraint_norm: constraint_norm(&st.problem, &st.state, &st.eval.classes),
            total_mass: mass_report(&st.state, &st.problem.ops).total_mass,
            alpha_min,
            alpha_max,
        }
    }

    pub fn csv(&self) -> String {
        let b = &self.budget;
        [
            b.t,
            b.energy,
            b.de_dt,
            b.dissipation,
            b.bt_advective,
            b.bt_viscous,
            b.sat_energy,
            b.residual,
            self.constraint_norm,
            self.total_mass,
            self.alpha_min,
            self.alpha_max,
        ]
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub t_final: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest `|residual| / scale` over every stage.
    pub max_residual: f64,
    pub max_constraint: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Accepted steps where the energy grew by more than `1e-10 E₀`.
    pub energy_increases: usize,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "steps = {}\nt_final = {:e}\ninitial_energy = {:e}\nfinal_energy = {:e}\nmax_identity_residual = {:e}\n\
             max_constraint_norm = {:e}\nalpha_min = {:e}\nalpha_max = {:e}\nenergy_increases = {}\n",
            self.steps,
            self.t_final,
            self.initial_energy,
            self.final_energy,
            self.max_residual,
            self.max_constraint,
            self.alpha_min,
            self.alpha_max,
            self.energy_increases
        );
        for w in &self.warnings {
            s.push_str(&format!("warning = {w}\n"));
        }
        s
    }
}

pub fn write_snapshot(path: &Path, st: &Stepper) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = &st.problem.ops.grid;
    writeln!(w, "# t={:e} nx={} ny={}", st.t, g.nx, g.ny)?;
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    let prim = state_to_primitives(&st.state, &st.problem.fluids);
    let s = &st.state;
    for k in 0..g.len() {
        let (x, y) = g.coords(k);
        let vals = [
            x,
            y,
            prim.alpha[k],
            prim.u1[k],
            prim.u2[k],
            prim.p[k],
            s.phi0[k],
            s.phi1[k],
            s.phi2[k],
            s.phi3[k],
        ];
        writeln!(w, "{}", vals.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Time loop observer; the file-writing runner and in-memory callers share the loop.
pub trait Observer {
    fn accepted(&mut self, _step: usize, _st: &Stepper, _row: &SeriesRow) -> Result<()> {
        Ok(())
    }
    fn failed(&mut self, _step: usize, _st: &Stepper) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Run the configured time loop from a prepared stepper.
pub fn integrate(cfg: &RunConfig, st: &mut Stepper, obs: &mut dyn Observer) -> Result<RunReport> {
    let first = SeriesRow::from_stepper(st);
    obs.accepted(0, st, &first)?;
    let mut report = RunReport {
        steps: 0,
        t_final: st.t,
        initial_energy: first.budget.energy,
        final_energy: first.budget.energy,
        max_residual: first.budget.relative_residual(),
        max_constraint: first.constraint_norm,
        alpha_min: first.alpha_min,
        alpha_max: first.alpha_max,
        energy_increases: 0,
        warnings: Vec::new(),
    };
    if cfg.assert_identity {
        first.budget.check(cfg.tolerance)?;
    }
    let t_end = cfg.time.t_end;
    let mut prev_energy = first.budget.energy;
    let mut step = 0usize;
    while st.t < t_end * (1.0 - 1e-12) && (cfg.time.max_steps == 0 || step < cfg.time.max_steps) {
        let mut dt = match cfg.time.mode {
            DtMode::Fixed => cfg.time.dt,
            DtMode::Cfl => stable_dt(
                &st.state,
                &st.problem.ops.grid,
                &st.problem.fluids,
                cfg.time.cfl,
                cfg.time.dt_max,
            )?,
        };
        dt = dt.min(t_end - st.t);
        let rec = match st.step(dt) {
            Ok(rec) => rec,
            Err(e) => {
                obs.failed(step, st)?;
                return Err(e);
            }
        };
        step += 1;
        let row = SeriesRow::from_stepper(st);
        for b in rec.stages.iter().chain(std::iter::once(&rec.accepted)) {
            report.max_residual = report.max_residual.max(b.relative_residual());
            if cfg.assert_identity {
                if let Err(e) = b.check(cfg.tolerance) {
                    obs.failed(step, st)?;
                    return Err(e);
                }
            }
        }
        if row.budget.energy > prev_energy + 1e-10 * report.initial_energy.max(f64::MIN_POSITIVE) {
            report.energy_increases += 1;
        }
        prev_energy = row.budget.energy;
        report.max_constraint = report.max_constraint.max(row.constraint_norm);
        report.alpha_min = report.alpha_min.min(row.alpha_min);
        report.alpha_max = report.alpha_max.max(row.alpha_max);
        log::debug!("step {step} t={:e} dt={dt:e} E={:e}", st.t, row.budget.energy);
        obs.accepted(step, st, &row)?;
    }
    report.steps = step;
    report.t_final = st.t;
    report.final_energy = prev_energy;
    if report.alpha_min < -crate::fields::ALPHA_TOL || report.alpha_max > 1.0 + crate::fields::ALPHA_TOL {
        report.warnings.push(format!(
            "volume fraction left [0, 1]: [{:e}, {:e}]",
            report.alpha_min, report.alpha_max
        ));
    }
    if report.max_residual > cfg.tolerance {
        report.warnings.push(format!(
            "identity residual {:e} above {:e}",
            report.max_residual, cfg.tolerance
        ));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(report)
}

struct FileObserver {
    dir: PathBuf,
    series: BufWriter<File>,
    snapshot_every: usize,
    last_snapshot: Option<usize>,
}

impl FileObserver {
    fn snapshot(&mut self, step: usize, st: &Stepper) -> Result<()> {
        write_snapshot(&self.dir.join(format!("snapshot_{step}.csv")), st)?;
        self.last_snapshot = Some(step);
        Ok(())
    }
}

impl Observer for FileObserver {
    fn accepted(&mut self, step: usize, st: &Stepper, row: &SeriesRow) -> Result<()> {
        writeln!(self.series, "{}", row.csv())?;
        if self.snapshot_every > 0 && step % self.snapshot_every == 0 {
            self.snapshot(step, st)?;
        }
        Ok(())
    }

    fn failed(&mut self, step: usize, st: &Stepper) -> Result<()> {
        self.series.flush()?;
        self.snapshot(step, st)
    }
}

/// Run a configuration and write `timeseries.csv`, snapshots, `config.echo` and `report.txt` into `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.echo"), cfg.to_text())?;
    let (problem, state) = setup(cfg)?;
    let mut st = Stepper::new(problem, state, 0.0)?;
    st.reproject = cfg.reproject;
    let mut series = BufWriter::new(File::create(dir.join("timeseries.csv"))?);
    writeln!(series, "{TIMESERIES_HEADER}")?;
    let mut obs = FileObserver {
        dir: dir.to_path_buf(),
        series,
        snapshot_every: cfg.snapshot_every,
        last_snapshot: None,
    };
    let result = integrate(cfg, &mut st, &mut obs);
    obs.series.flush()?;
    match result {
        Ok(report) => {
            if obs.snapshot_every > 0 && obs.last_snapshot != Some(report.steps) {
                obs.snapshot(report.steps, &st)?;
            }
            fs::write(dir.join("report.txt"), report.to_text())?;
            Ok(report)
        }
        Err(e) => {
            fs::write(
                dir.join("report.txt"),
                format!("error = {e}\nexit_code = {}\n", e.exit_code()),
            )?;
            Err(e)
        }
    }
}

/// Single evaluation at the initial state.
pub fn budget(cfg: &RunConfig) -> Result<EnergyBudget> {
    let (problem, state) = setup(cfg)?;
    let st = Stepper::new(problem, state, 0.0)?;
    Ok(st.budget())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(
            Error::IdentityViolation {
                t: 0.0,
                residual: 1.0,
                bound: 0.0
            }
            .exit_code(),
            2
        );
        assert_eq!(Error::Solver("x".into()).exit_code(), 3);
        assert_eq!(Error::Config("x".into()).exit_code(), 4);
        assert_eq!(Error::InvalidPenalty("x".into()).exit_code(), 4);
    }

    #[test]
    fn quiescent_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_str(
            "grid.nx = 9\nscenario.name = quiescent-box\ntime.mode = fixed\ntime.dt = 0.01\ntime.t_end = 0.05\noutput.snapshot_every = 2\nrun.assert = true\n",
        )
        .unwrap();
        let report = run(&cfg, dir.path()).unwrap();
        assert_eq!(report.steps, 5);
        assert!(report.max_residual <= 1e-11);
        assert!((report.final_energy - report.initial_energy).abs() <= 1e-12 * report.initial_energy);
        let series = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        assert_eq!(series.lines().next().unwrap(), TIMESERIES_HEADER);
        assert_eq!(series.lines().count(), 7);
        for step in [0, 2, 4, 5] {
            assert!(dir.path().join(format!("snapshot_{step}.csv")).exists(), "{step}");
        }
        let echo = fs::read_to_string(dir.path().join("config.echo")).unwrap();
        assert_eq!(RunConfig::from_str(&echo).unwrap(), cfg);
        assert!(dir.path().join("report.txt").exists());
    }
}
